//! Passage-time laws, counter-based per-edge variates and the coupling modes.
//!
//! Every random quantity in the crate is a deterministic function of
//! `(master_seed, edge, stream)`, so independent runs that share a seed see
//! exactly the same environment regardless of visit order.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::Edge;

/// A passage-time distribution on `[0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PassageLaw {
    Exponential { rate: f64 },
    Uniform { a: f64, b: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
    Deterministic { value: f64 },
    /// Atom of mass `zero_mass` at 0, otherwise `Exponential(rate)`.
    ZeroInflatedExponential { zero_mass: f64, rate: f64 },
}

/// Internal normal form used for analytic comparisons.
#[derive(Clone, Copy, Debug)]
enum Canon {
    Point(f64),
    Unif(f64, f64),
    ShExp(f64, f64),
    Zie(f64, f64),
}

impl PassageLaw {
    pub fn exponential(rate: f64) -> Self {
        PassageLaw::Exponential { rate }
    }

    pub fn uniform(a: f64, b: f64) -> Self {
        PassageLaw::Uniform { a, b }
    }

    pub fn deterministic(value: f64) -> Self {
        PassageLaw::Deterministic { value }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidLaw(format!("{self}: {m}")));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            PassageLaw::Exponential { rate } if !finite_pos(rate) => bad("rate must be > 0"),
            PassageLaw::Uniform { a, b } if !(a >= 0.0 && b > a && b.is_finite()) => {
                bad("need 0 ≤ a < b")
            }
            PassageLaw::ShiftedExponential { shift, rate }
                if !(shift >= 0.0 && shift.is_finite() && finite_pos(rate)) =>
            {
                bad("need shift ≥ 0 and rate > 0")
            }
            PassageLaw::Deterministic { value } if !finite_pos(value) => bad("value must be > 0"),
            PassageLaw::ZeroInflatedExponential { zero_mass, rate }
                if !((0.0..1.0).contains(&zero_mass) && finite_pos(rate)) =>
            {
                bad("need 0 ≤ zero_mass < 1 and rate > 0")
            }
            _ => Ok(()),
        }
    }

    fn canon(&self) -> Canon {
        match *self {
            PassageLaw::Exponential { rate } => Canon::ShExp(0.0, rate),
            PassageLaw::Uniform { a, b } => Canon::Unif(a, b),
            PassageLaw::ShiftedExponential { shift, rate } => Canon::ShExp(shift, rate),
            PassageLaw::Deterministic { value } => Canon::Point(value),
            PassageLaw::ZeroInflatedExponential { zero_mass: 0.0, rate } => {
                Canon::ShExp(0.0, rate)
            }
            PassageLaw::ZeroInflatedExponential { zero_mass, rate } => Canon::Zie(zero_mass, rate),
        }
    }

    /// Value in accumulation units. Rate families accumulate unit-rate
    /// variates and divide once at the end, so that rescaling the rate
    /// rescales every path time exactly.
    #[inline]
    pub fn standard_quantile(&self, u: f64) -> f64 {
        match *self {
            PassageLaw::Exponential { .. } => -(-u).ln_1p(),
            PassageLaw::Uniform { a, b } => a + (b - a) * u,
            PassageLaw::ShiftedExponential { shift, rate } => shift - (-u).ln_1p() / rate,
            PassageLaw::Deterministic { value } => value,
            PassageLaw::ZeroInflatedExponential { zero_mass, .. } => {
                if u < zero_mass {
                    0.0
                } else {
                    -((1.0 - u) / (1.0 - zero_mass)).ln()
                }
            }
        }
    }

    /// Divisor turning accumulated standard values into times.
    #[inline]
    pub fn divisor(&self) -> f64 {
        match *self {
            PassageLaw::Exponential { rate } | PassageLaw::ZeroInflatedExponential { rate, .. } => {
                rate
            }
            _ => 1.0,
        }
    }

    /// Generalised inverse of the CDF: `inf{x : F(x) ≥ u}`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::QuantileLevel(u));
        }
        Ok(self.standard_quantile(u) / self.divisor())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.canon() {
            Canon::Point(c) => (x >= c) as u8 as f64,
            Canon::Unif(a, b) => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Canon::ShExp(s, l) => {
                if x < s {
                    0.0
                } else {
                    -(-l * (x - s)).exp_m1()
                }
            }
            Canon::Zie(m, l) => {
                if x < 0.0 {
                    0.0
                } else {
                    m + (1.0 - m) * -(-l * x).exp_m1()
                }
            }
        }
    }

    /// Left limit `F(x−) = P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x) - self.atom(x)
    }

    /// `P(X = x)`.
    pub fn atom(&self, x: f64) -> f64 {
        match self.canon() {
            Canon::Point(c) if x == c => 1.0,
            Canon::Zie(m, _) if x == 0.0 => m,
            _ => 0.0,
        }
    }

    pub fn inf_support(&self) -> f64 {
        match self.canon() {
            Canon::Point(c) => c,
            Canon::Unif(a, _) => a,
            Canon::ShExp(s, _) => s,
            Canon::Zie(..) => 0.0,
        }
    }

    pub fn sup_support(&self) -> f64 {
        match self.canon() {
            Canon::Point(c) => c,
            Canon::Unif(_, b) => b,
            _ => f64::INFINITY,
        }
    }

    pub fn mean(&self) -> f64 {
        match self.canon() {
            Canon::Point(c) => c,
            Canon::Unif(a, b) => 0.5 * (a + b),
            Canon::ShExp(s, l) => s + 1.0 / l,
            Canon::Zie(m, l) => (1.0 - m) / l,
        }
    }

    /// No atoms at all.
    pub fn is_continuous(&self) -> bool {
        !matches!(self.canon(), Canon::Point(_) | Canon::Zie(..))
    }

    /// Analytic stochastic order: `self ≻ other`, i.e. `F_self ≤ F_other`
    /// pointwise (self is the slower law).
    pub fn dominates(&self, other: &PassageLaw) -> bool {
        use Canon::*;
        match (self.canon(), other.canon()) {
            (Point(c1), Point(c2)) => c1 >= c2,
            (Point(c), y) => other.sup_support() <= c && !matches!(y, Zie(..) | ShExp(..)),
            (_, Point(c)) => self.inf_support() >= c,
            (Unif(a1, b1), Unif(a2, b2)) => a1 >= a2 && b1 >= b2,
            (Unif(..), ShExp(..) | Zie(..)) => false,
            (ShExp(s, l), Unif(a, b)) => shexp_dominates_uniform(s, l, a, b),
            (ShExp(s1, l1), ShExp(s2, l2)) => s1 >= s2 && l1 <= l2,
            (ShExp(_, l), Zie(_, mu)) => l <= mu,
            (Zie(..), ShExp(..) | Unif(..)) => false,
            (Zie(m1, l1), Zie(m2, l2)) => m1 <= m2 && l1 <= l2,
        }
    }

    /// Same distribution.
    pub fn same_law(&self, other: &PassageLaw) -> bool {
        self.dominates(other) && other.dominates(self)
    }

    /// Strict order `self ≻ other`, `self ≠ other`.
    pub fn strictly_dominates(&self, other: &PassageLaw) -> bool {
        self.dominates(other) && !other.dominates(self)
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            PassageLaw::Exponential { rate } => vec![("rate", rate)],
            PassageLaw::Uniform { a, b } => vec![("a", a), ("b", b)],
            PassageLaw::ShiftedExponential { shift, rate } => vec![("shift", shift), ("rate", rate)],
            PassageLaw::Deterministic { value } => vec![("value", value)],
            PassageLaw::ZeroInflatedExponential { zero_mass, rate } => {
                vec![("zero_mass", zero_mass), ("rate", rate)]
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            PassageLaw::Exponential { .. } => "exponential",
            PassageLaw::Uniform { .. } => "uniform",
            PassageLaw::ShiftedExponential { .. } => "shifted_exponential",
            PassageLaw::Deterministic { .. } => "deterministic",
            PassageLaw::ZeroInflatedExponential { .. } => "zero_inflated_exponential",
        }
    }
}

fn shexp_dominates_uniform(s: f64, l: f64, a: f64, b: f64) -> bool {
    if s >= b {
        return true;
    }
    if s < a {
        return false;
    }
    // g(x) = F_U(x) − F_E(x) is convex on [s, b]; check its minimum.
    let w = b - a;
    if l * w <= 1.0 {
        return true;
    }
    let x_star = s + (l * w).ln() / l;
    if x_star >= b {
        return true;
    }
    (x_star - a) / w - 1.0 + 1.0 / (l * w) >= 0.0
}

impl fmt::Display for PassageLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family_name())?;
        for (i, (k, v)) in self.params().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, ")")
    }
}

// Config form: {"family": "exponential", "rate": "1.5"}. Parameters are
// written as shortest round-trip decimal strings; numbers are accepted on
// input as well.
impl Serialize for PassageLaw {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = BTreeMap::new();
        m.insert("family".to_string(), self.family_name().to_string());
        for (k, v) in self.params() {
            m.insert(k.to_string(), format!("{v}"));
        }
        m.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PassageLaw {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw: BTreeMap<String, serde_json::Value> = BTreeMap::deserialize(de)?;
        let family = raw
            .get("family")
            .and_then(|v| v.as_str())
            .ok_or_else(|| D::Error::custom("law needs a \"family\" string"))?;
        let num = |key: &str| -> std::result::Result<f64, D::Error> {
            match raw.get(key) {
                Some(serde_json::Value::String(s)) => s
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| D::Error::custom(format!("bad decimal for {key}: {s:?}"))),
                Some(serde_json::Value::Number(n)) => n
                    .as_f64()
                    .ok_or_else(|| D::Error::custom(format!("bad number for {key}"))),
                _ => Err(D::Error::custom(format!("{family} law needs parameter {key:?}"))),
            }
        };
        let law = match family {
            "exponential" => PassageLaw::Exponential { rate: num("rate")? },
            "uniform" => PassageLaw::Uniform {
                a: num("a")?,
                b: num("b")?,
            },
            "shifted_exponential" => PassageLaw::ShiftedExponential {
                shift: num("shift")?,
                rate: num("rate")?,
            },
            "deterministic" => PassageLaw::Deterministic { value: num("value")? },
            "zero_inflated_exponential" => PassageLaw::ZeroInflatedExponential {
                zero_mass: num("zero_mass")?,
                rate: num("rate")?,
            },
            other => return Err(D::Error::custom(format!("unknown law family {other:?}"))),
        };
        law.validate().map_err(D::Error::custom)?;
        Ok(law)
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a well-mixed child seed, e.g. per replica.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base ^ 0x5EED_5EED_5EED_5EED).wrapping_add(index.wrapping_mul(GOLDEN)))
}

/// Reflection `x_axis ↦ center − x_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mirror {
    pub axis: usize,
    pub center: i32,
}

/// Stateless per-edge uniforms `u_e ∈ [0,1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSeedField {
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror: Option<Mirror>,
}

impl EdgeSeedField {
    pub fn new(master_seed: u64) -> Self {
        EdgeSeedField {
            master_seed,
            mirror: None,
        }
    }

    /// A field invariant under the given reflection.
    pub fn mirrored(master_seed: u64, mirror: Mirror) -> Self {
        EdgeSeedField {
            master_seed,
            mirror: Some(mirror),
        }
    }

    #[inline]
    fn hash(&self, lower: &[i32], axis: usize, stream: u32) -> u64 {
        let mut h = mix64(self.master_seed ^ GOLDEN.wrapping_mul(stream as u64 + 1));
        h = mix64(h ^ ((axis as u64) << 8 | lower.len() as u64));
        for pair in lower.chunks(2) {
            let w = match pair {
                [x, y] => (*x as u32 as u64) << 32 | *y as u32 as u64,
                [x] => *x as u32 as u64,
                _ => unreachable!(),
            };
            h = mix64(h.wrapping_add(GOLDEN) ^ w);
        }
        h
    }

    /// Uniform for the edge `{lower, lower + e_axis}` on `stream`.
    #[inline]
    pub fn uniform_at(&self, lower: &[i32], axis: usize, stream: u32) -> f64 {
        let h = match self.mirror {
            None => self.hash(lower, axis, stream),
            Some(m) => {
                let mut refl = [0i32; 8];
                let mut heap;
                let r: &mut [i32] = if lower.len() <= 8 {
                    &mut refl[..lower.len()]
                } else {
                    heap = vec![0; lower.len()];
                    &mut heap
                };
                r.copy_from_slice(lower);
                r[m.axis] = m.center - r[m.axis];
                if axis == m.axis {
                    r[m.axis] -= 1;
                }
                if *r < *lower {
                    self.hash(r, axis, stream)
                } else {
                    self.hash(lower, axis, stream)
                }
            }
        };
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&self, e: &Edge, stream: u32) -> f64 {
        self.uniform_at(e.a().coords(), e.axis(), stream)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// One stream feeds every law and both species: the monotone coupling.
    SharedUniform,
    /// Species `i` reads stream `i − 1`.
    Independent,
}

impl CouplingMode {
    pub fn stream(&self, species: u8) -> u32 {
        match self {
            CouplingMode::SharedUniform => 0,
            CouplingMode::Independent => species as u32 - 1,
        }
    }
}

pub fn edge_time(field: &EdgeSeedField, e: &Edge, law: &PassageLaw, species: u8, mode: CouplingMode) -> f64 {
    debug_assert!(species == 1 || species == 2);
    let u = field.uniform(e, mode.stream(species));
    law.standard_quantile(u) / law.divisor()
}

/// Source of edge passage values for the shortest-path engines. Path times
/// are accumulated in `weight` units and divided by `divisor` on output.
pub trait EdgeTimes: Sync {
    fn weight(&self, lower: &[i32], axis: usize) -> f64;

    fn divisor(&self) -> f64 {
        1.0
    }
}

/// Edge times read from an [`EdgeSeedField`] stream through a law's quantile.
#[derive(Clone, Copy, Debug)]
pub struct SeededTimes {
    pub field: EdgeSeedField,
    pub law: PassageLaw,
    pub stream: u32,
}

impl SeededTimes {
    pub fn new(field: EdgeSeedField, law: PassageLaw, stream: u32) -> Self {
        SeededTimes { field, law, stream }
    }
}

impl EdgeTimes for SeededTimes {
    #[inline]
    fn weight(&self, lower: &[i32], axis: usize) -> f64 {
        self.law
            .standard_quantile(self.field.uniform_at(lower, axis, self.stream))
    }

    fn divisor(&self) -> f64 {
        self.law.divisor()
    }
}

/// Explicit edge table, mostly for hand-built instances. Missing edges get
/// `default`.
#[derive(Clone, Debug, Default)]
pub struct TableTimes {
    pub times: std::collections::HashMap<Edge, f64>,
    pub default: f64,
}

impl TableTimes {
    pub fn new(default: f64) -> Self {
        TableTimes {
            times: Default::default(),
            default,
        }
    }

    pub fn set(&mut self, e: Edge, t: f64) {
        self.times.insert(e, t);
    }
}

impl EdgeTimes for TableTimes {
    fn weight(&self, lower: &[i32], axis: usize) -> f64 {
        let a = crate::lattice::Site(lower.to_vec());
        let b = a.offset(axis, 1);
        let e = Edge::new(a, b).expect("neighbours");
        self.times.get(&e).copied().unwrap_or(self.default)
    }
}

impl<T: EdgeTimes + ?Sized> EdgeTimes for &T {
    fn weight(&self, lower: &[i32], axis: usize) -> f64 {
        (**self).weight(lower, axis)
    }

    fn divisor(&self) -> f64 {
        (**self).divisor()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    Unknown,
}

impl Check {
    fn from_bool(b: bool) -> Self {
        if b {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

/// Bond and oriented-bond percolation thresholds used by the H3/H4 checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub pc: Option<f64>,
    pub dirpc: Option<f64>,
}

impl Thresholds {
    /// `p_c(Z) = →p_c(Z) = 1`, `p_c(Z²) = 1/2`, `→p_c(Z²) ≈ 0.6447`; unknown
    /// otherwise.
    pub fn defaults(d: usize) -> Self {
        match d {
            1 => Thresholds {
                pc: Some(1.0),
                dirpc: Some(1.0),
            },
            2 => Thresholds {
                pc: Some(0.5),
                dirpc: Some(0.6447),
            },
            _ => Thresholds {
                pc: None,
                dirpc: None,
            },
        }
    }
}

/// Analytic check of the standing assumptions on a law pair
/// (species 1 slow, species 2 fast).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub h1_ordered: Check,
    pub h2_no_ties: Check,
    pub h3_atom_below_pc: Check,
    pub h4_support_atom_below_dirpc: Check,
    pub h5_exp_moment: Check,
    pub pc_value_used: Option<f64>,
    pub dirpc_value_used: Option<f64>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        [
            self.h1_ordered,
            self.h2_no_ties,
            self.h3_atom_below_pc,
            self.h4_support_atom_below_dirpc,
            self.h5_exp_moment,
        ]
        .iter()
        .all(|c| *c == Check::Pass)
    }

    pub fn any_fail(&self) -> bool {
        [
            self.h1_ordered,
            self.h2_no_ties,
            self.h3_atom_below_pc,
            self.h4_support_atom_below_dirpc,
            self.h5_exp_moment,
        ]
        .contains(&Check::Fail)
    }
}

fn below(atom: f64, threshold: Option<f64>) -> Check {
    match threshold {
        _ if atom == 0.0 => Check::Pass,
        Some(p) => Check::from_bool(atom < p),
        None => Check::Unknown,
    }
}

pub fn validate_assumptions(law1: &PassageLaw, law2: &PassageLaw, d: usize) -> AssumptionReport {
    validate_assumptions_with(law1, law2, Thresholds::defaults(d))
}

pub fn validate_assumptions_with(law1: &PassageLaw, law2: &PassageLaw, th: Thresholds) -> AssumptionReport {
    let h1 = Check::from_bool(law1.strictly_dominates(law2));
    let h2 = if law1.atom(0.0) > 0.0 || law2.atom(0.0) > 0.0 {
        // a sum of k ≥ 1 variables is 0 with positive probability
        Check::Fail
    } else if law1.is_continuous() || law2.is_continuous() {
        Check::Pass
    } else if let (PassageLaw::Deterministic { value: a }, PassageLaw::Deterministic { value: b }) =
        (law1, law2)
    {
        if a == b {
            Check::Fail
        } else {
            Check::Unknown
        }
    } else {
        Check::Unknown
    };
    let h3 = below(law1.atom(0.0).max(law2.atom(0.0)), th.pc);
    let atom_inf = |l: &PassageLaw| l.atom(l.inf_support());
    let h4 = below(atom_inf(law1).max(atom_inf(law2)), th.dirpc);
    AssumptionReport {
        h1_ordered: h1,
        h2_no_ties: h2,
        h3_atom_below_pc: h3,
        h4_support_atom_below_dirpc: h4,
        h5_exp_moment: Check::Pass,
        pc_value_used: th.pc,
        dirpc_value_used: th.dirpc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;

    #[test]
    fn quantile_examples() {
        let q = PassageLaw::exponential(1.0)
            .quantile(1.0 - (-1f64).exp())
            .unwrap();
        assert!((q - 1.0).abs() < 1e-15);
        assert_eq!(PassageLaw::deterministic(3.5).quantile(0.7).unwrap(), 3.5);
        assert_eq!(PassageLaw::uniform(0.0, 2.0).quantile(0.25).unwrap(), 0.5);
        assert!(PassageLaw::exponential(1.0).quantile(1.0).is_err());
        assert!(PassageLaw::exponential(1.0).quantile(-0.1).is_err());
    }

    #[test]
    fn zero_inflated_quantile_is_left_continuous_inverse() {
        let law = PassageLaw::ZeroInflatedExponential {
            zero_mass: 0.3,
            rate: 2.0,
        };
        assert_eq!(law.quantile(0.0).unwrap(), 0.0);
        assert_eq!(law.quantile(0.29).unwrap(), 0.0);
        let x = law.quantile(0.65).unwrap();
        assert!((law.cdf(x) - 0.65).abs() < 1e-12);
    }

    #[test]
    fn law_config_round_trip() {
        let law: PassageLaw = serde_json::from_str(r#"{"family":"exponential","rate":"1.5"}"#).unwrap();
        assert_eq!(law, PassageLaw::exponential(1.5));
        assert_eq!(
            serde_json::to_string(&law).unwrap(),
            r#"{"family":"exponential","rate":"1.5"}"#
        );
        let u: PassageLaw = serde_json::from_str(r#"{"family":"uniform","a":0,"b":"1"}"#).unwrap();
        assert_eq!(u, PassageLaw::uniform(0.0, 1.0));
        assert!(serde_json::from_str::<PassageLaw>(r#"{"family":"exponential","rate":"-1"}"#).is_err());
        assert!(serde_json::from_str::<PassageLaw>(r#"{"family":"cauchy"}"#).is_err());
    }

    #[test]
    fn dominance_table() {
        let e1 = PassageLaw::exponential(1.0);
        let e2 = PassageLaw::exponential(2.0);
        assert!(e1.strictly_dominates(&e2));
        assert!(!e2.dominates(&e1));
        assert!(e1.dominates(&PassageLaw::uniform(0.0, 1.0)));
        assert!(e1.dominates(&PassageLaw::uniform(0.0, 0.9)));
        assert!(!e1.dominates(&PassageLaw::uniform(0.0, 1.1)));
        assert!(!PassageLaw::uniform(0.0, 1.0).dominates(&e1));
        assert!(PassageLaw::deterministic(1.0).dominates(&PassageLaw::deterministic(0.6)));
        assert!(PassageLaw::deterministic(2.0).dominates(&PassageLaw::uniform(0.5, 2.0)));
        assert!(!PassageLaw::deterministic(2.0).dominates(&e1));
        assert!(PassageLaw::ShiftedExponential { shift: 1.0, rate: 1.0 }.dominates(&e1));
        assert!(e1.same_law(&PassageLaw::ShiftedExponential { shift: 0.0, rate: 1.0 }));
    }

    #[test]
    fn shexp_vs_uniform_matches_grid_check() {
        let laws = [(0.0, 1.0), (0.2, 3.0), (0.5, 0.5), (0.1, 8.0), (0.3, 2.5)];
        let unifs = [(0.0, 1.0), (0.0, 0.5), (0.1, 2.0), (0.2, 0.6), (0.05, 1.2)];
        for &(s, l) in &laws {
            for &(a, b) in &unifs {
                let e = PassageLaw::ShiftedExponential { shift: s, rate: l };
                let u = PassageLaw::uniform(a, b);
                let grid_ok = (0..=20000).all(|i| {
                    let x = i as f64 * 4.0 / 20000.0;
                    e.cdf(x) <= u.cdf(x) + 1e-12
                });
                assert_eq!(e.dominates(&u), grid_ok, "shexp({s},{l}) vs U({a},{b})");
            }
        }
    }

    #[test]
    fn edge_time_scaling_and_determinism() {
        let f = EdgeSeedField::new(17);
        let e = Edge::new(Site::from([3, -2]), Site::from([3, -1])).unwrap();
        let t1 = edge_time(&f, &e, &PassageLaw::exponential(1.0), 1, CouplingMode::SharedUniform);
        let t2 = edge_time(&f, &e, &PassageLaw::exponential(2.0), 2, CouplingMode::SharedUniform);
        assert_eq!(t2, t1 / 2.0);
        let again = edge_time(&f, &e, &PassageLaw::exponential(1.0), 1, CouplingMode::SharedUniform);
        assert_eq!(t1, again);
        let ind = edge_time(&f, &e, &PassageLaw::exponential(1.0), 2, CouplingMode::Independent);
        assert_ne!(t1, ind);
    }

    #[test]
    fn mirrored_field_is_symmetric() {
        let m = Mirror { axis: 0, center: 1 };
        let f = EdgeSeedField::mirrored(5, m);
        for x in -4..4 {
            for y in -4..4 {
                // horizontal edge {(x,y),(x+1,y)} ↦ {(−x,y),(1−x,y)}
                let a = f.uniform_at(&[x, y], 0, 0);
                let b = f.uniform_at(&[-x, y], 0, 0);
                assert_eq!(a, b);
                // vertical edge {(x,y),(x,y+1)} ↦ {(1−x,y),(1−x,y+1)}
                assert_eq!(f.uniform_at(&[x, y], 1, 0), f.uniform_at(&[1 - x, y], 1, 0));
            }
        }
    }

    #[test]
    fn assumption_examples() {
        let r = validate_assumptions(&PassageLaw::exponential(1.0), &PassageLaw::exponential(2.0), 2);
        assert!(r.all_pass());
        let r = validate_assumptions(&PassageLaw::deterministic(1.0), &PassageLaw::deterministic(1.0), 2);
        assert_eq!(r.h1_ordered, Check::Fail);
        assert_eq!(r.h2_no_ties, Check::Fail);
        let r = validate_assumptions(&PassageLaw::deterministic(1.0), &PassageLaw::deterministic(0.6), 2);
        assert_eq!(r.h1_ordered, Check::Pass);
        assert_eq!(r.h2_no_ties, Check::Unknown);
        assert_eq!(r.h4_support_atom_below_dirpc, Check::Fail);
        let zi = PassageLaw::ZeroInflatedExponential {
            zero_mass: 0.6,
            rate: 1.0,
        };
        let r = validate_assumptions(&zi, &PassageLaw::exponential(2.0), 2);
        assert_eq!(r.h3_atom_below_pc, Check::Fail);
        assert_eq!(r.pc_value_used, Some(0.5));
        let r = validate_assumptions(&zi, &PassageLaw::exponential(2.0), 3);
        assert_eq!(r.h3_atom_below_pc, Check::Unknown);
    }
}
