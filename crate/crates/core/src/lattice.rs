//! Geometry of Z^d: sites, edges, finite boxes, norms, cylinders, shells and
//! sphere coverings.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of Z^d.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i32>);

impl Site {
    pub fn new(coords: impl Into<Vec<i32>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(d: usize) -> Self {
        Site(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    pub fn l1_distance(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a as i64 - b as i64).abs())
            .sum()
    }

    /// Unit vector along `axis` with the given sign.
    pub fn unit(d: usize, axis: usize, sign: i32) -> Self {
        let mut c = vec![0; d];
        c[axis] = sign;
        Site(c)
    }

    pub fn offset(&self, axis: usize, delta: i32) -> Site {
        let mut c = self.0.clone();
        c[axis] += delta;
        Site(c)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<i32>> for Site {
    fn from(v: Vec<i32>) -> Self {
        Site(v)
    }
}

impl<const N: usize> From<[i32; N]> for Site {
    fn from(v: [i32; N]) -> Self {
        Site(v.to_vec())
    }
}

/// The 2d nearest neighbours of `x`: for each axis, `+e_k` then `-e_k`.
pub fn neighbors(x: &Site) -> Vec<Site> {
    let d = x.dim();
    let mut out = Vec::with_capacity(2 * d);
    for k in 0..d {
        out.push(x.offset(k, 1));
        out.push(x.offset(k, -1));
    }
    out
}

/// A nearest-neighbour edge stored with its lexicographically smaller
/// endpoint first.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Edge {
    a: Site,
    b: Site,
}

impl Edge {
    pub fn new(x: Site, y: Site) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::Dimension {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        if x.l1_distance(&y) != 1 {
            return Err(Error::InvalidArgument(format!(
                "{x:?} and {y:?} are not neighbours"
            )));
        }
        Ok(if x <= y { Edge { a: x, b: y } } else { Edge { a: y, b: x } })
    }

    pub fn a(&self) -> &Site {
        &self.a
    }

    pub fn b(&self) -> &Site {
        &self.b
    }

    /// Axis along which the endpoints differ.
    pub fn axis(&self) -> usize {
        self.a
            .0
            .iter()
            .zip(&self.b.0)
            .position(|(p, q)| p != q)
            .expect("endpoints differ")
    }
}

/// The finite truncation `{x : ‖x‖_∞ ≤ L}` of Z^d.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LatticeBox {
    pub dim: usize,
    pub radius: i32,
}

impl LatticeBox {
    pub fn new(dim: usize, radius: i32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
        }
        if radius <= 0 {
            return Err(Error::InvalidArgument("box radius must be positive".into()));
        }
        Ok(LatticeBox { dim, radius })
    }

    pub fn contains(&self, x: &Site) -> bool {
        x.dim() == self.dim && x.0.iter().all(|c| c.abs() <= self.radius)
    }

    /// True for sites on the box frame `‖x‖_∞ = L`.
    pub fn on_frame(&self, x: &Site) -> bool {
        self.contains(x) && x.0.iter().any(|c| c.abs() == self.radius)
    }

    pub fn grid(&self) -> Grid {
        Grid::new(vec![-self.radius; self.dim], vec![self.radius; self.dim])
            .expect("box is non-empty")
    }

    pub fn site_count(&self) -> usize {
        (2 * self.radius as usize + 1).pow(self.dim as u32)
    }
}

/// Dense indexing of an axis-aligned rectangular region of Z^d. Index order
/// coincides with lexicographic order of the coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    lo: Vec<i32>,
    hi: Vec<i32>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(lo: Vec<i32>, hi: Vec<i32>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("bad grid bounds".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        let d = lo.len();
        let mut strides = vec![1usize; d];
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * (hi[k + 1] - lo[k + 1] + 1) as usize;
        }
        let len = strides[0] * (hi[0] - lo[0] + 1) as usize;
        Ok(Grid { lo, hi, strides, len })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lo(&self) -> &[i32] {
        &self.lo
    }

    pub fn hi(&self) -> &[i32] {
        &self.hi
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn contains_coords(&self, c: &[i32]) -> bool {
        c.len() == self.dim()
            && c.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| x >= l && x <= h)
    }

    pub fn index_of(&self, c: &[i32]) -> Option<usize> {
        if !self.contains_coords(c) {
            return None;
        }
        Some(
            c.iter()
                .zip(&self.lo)
                .zip(&self.strides)
                .map(|((x, l), s)| (x - l) as usize * s)
                .sum(),
        )
    }

    pub fn index(&self, x: &Site) -> Option<usize> {
        self.index_of(&x.0)
    }

    pub fn coords_into(&self, mut idx: usize, out: &mut [i32]) {
        for k in 0..self.dim() {
            let q = idx / self.strides[k];
            idx -= q * self.strides[k];
            out[k] = self.lo[k] + q as i32;
        }
    }

    pub fn site(&self, idx: usize) -> Site {
        let mut c = vec![0; self.dim()];
        self.coords_into(idx, &mut c);
        Site(c)
    }

    /// True when the site at `coords` touches the outer face of the region.
    pub fn on_frame_coords(&self, c: &[i32]) -> bool {
        c.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .any(|(x, (l, h))| x == l || x == h)
    }

    /// Calls `f(neighbor_index, axis, lower_endpoint_is_self)` for every
    /// in-region neighbour of the site `idx` with coordinates `c`.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, c: &[i32], mut f: impl FnMut(usize, usize, bool)) {
        for k in 0..self.dim() {
            if c[k] < self.hi[k] {
                f(idx + self.strides[k], k, true);
            }
            if c[k] > self.lo[k] {
                f(idx - self.strides[k], k, false);
            }
        }
    }
}

/// A norm on R^d. The `linf_bounds` constants `(a, b)` satisfy
/// `a‖x‖_∞ ≤ |x| ≤ b‖x‖_∞`.
pub trait Norm: Send + Sync {
    fn eval(&self, x: &[f64]) -> f64;

    fn linf_bounds(&self, d: usize) -> (f64, f64);

    fn name(&self) -> String;

    fn is_euclidean(&self) -> bool {
        false
    }

    fn is_max_norm(&self) -> bool {
        false
    }

    fn eval_site(&self, x: &Site) -> f64 {
        self.eval(&x.to_real())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdNorm {
    L1,
    L2,
    Linf,
}

impl Norm for StdNorm {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            StdNorm::L1 => x.iter().map(|v| v.abs()).sum(),
            StdNorm::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            StdNorm::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    fn linf_bounds(&self, d: usize) -> (f64, f64) {
        match self {
            StdNorm::L1 => (1.0, d as f64),
            StdNorm::L2 => (1.0, (d as f64).sqrt()),
            StdNorm::Linf => (1.0, 1.0),
        }
    }

    fn name(&self) -> String {
        match self {
            StdNorm::L1 => "l1",
            StdNorm::L2 => "l2",
            StdNorm::Linf => "linf",
        }
        .to_string()
    }

    fn is_euclidean(&self) -> bool {
        matches!(self, StdNorm::L2)
    }

    fn is_max_norm(&self) -> bool {
        matches!(self, StdNorm::Linf)
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn l2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `|x/|x| − y/|y||` in the given norm.
pub fn direction_gap(x: &[f64], y: &[f64], norm: &dyn Norm) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let nx = norm.eval(x);
    let ny = norm.eval(y);
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a / nx - b / ny).collect();
    Ok(norm.eval(&diff))
}

/// Right-hand side `2|x−y| / max(|x|,|y|)` of the direction inequality.
pub fn direction_gap_bound(x: &[f64], y: &[f64], norm: &dyn Norm) -> f64 {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    2.0 * norm.eval(&diff) / norm.eval(x).max(norm.eval(y))
}

pub const CYLINDER_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CylinderKind {
    /// `0 ≤ ⟨y−z, x̂⟩ ≤ h`
    Finite { height: f64 },
    /// `0 ≤ ⟨y−z, x̂⟩`
    HalfInfinite,
    /// No axial constraint.
    BiInfinite,
}

/// Closed cylinder around the axis `z + R·x̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpec {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub radius: f64,
    pub kind: CylinderKind,
}

impl CylinderSpec {
    pub fn new(base: Vec<f64>, direction: Vec<f64>, radius: f64, kind: CylinderKind) -> Result<Self> {
        if base.len() != direction.len() {
            return Err(Error::Dimension {
                expected: base.len(),
                got: direction.len(),
            });
        }
        if (l2(&direction) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "cylinder direction must be a Euclidean unit vector (norm {})",
                l2(&direction)
            )));
        }
        if !(radius >= 0.0) {
            return Err(Error::InvalidArgument("cylinder radius must be ≥ 0".into()));
        }
        if let CylinderKind::Finite { height } = kind {
            if !(height > 0.0) {
                return Err(Error::InvalidArgument("cylinder height must be > 0".into()));
            }
        }
        Ok(CylinderSpec {
            base,
            direction,
            radius,
            kind,
        })
    }

    /// `Cyl_+(x̂, R)`: based at the origin, half-infinite.
    pub fn half_infinite(direction: Vec<f64>, radius: f64) -> Result<Self> {
        let d = direction.len();
        Self::new(vec![0.0; d], direction, radius, CylinderKind::HalfInfinite)
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Axial coordinate and distance to the axis of `y`.
    pub fn axial_and_radial(&self, y: &[f64]) -> (f64, f64) {
        let w: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let a = dot(&w, &self.direction);
        let perp: f64 = w
            .iter()
            .zip(&self.direction)
            .map(|(wi, xi)| {
                let p = wi - a * xi;
                p * p
            })
            .sum::<f64>()
            .sqrt();
        (a, perp)
    }

    pub fn contains_point(&self, y: &[f64]) -> bool {
        let (a, perp) = self.axial_and_radial(y);
        if perp > self.radius + CYLINDER_TOLERANCE {
            return false;
        }
        match self.kind {
            CylinderKind::Finite { height } => {
                a >= -CYLINDER_TOLERANCE && a <= height + CYLINDER_TOLERANCE
            }
            CylinderKind::HalfInfinite => a >= -CYLINDER_TOLERANCE,
            CylinderKind::BiInfinite => true,
        }
    }
}

pub fn cylinder_contains(y: &Site, c: &CylinderSpec) -> bool {
    c.contains_point(&y.to_real())
}

/// Shell(A, r, r') with the directions enlarged by `phi`: sites whose
/// normalised direction lies within `phi` of `A` and whose norm lies in
/// `[r, r']`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub directions: Vec<Vec<f64>>,
    pub r: f64,
    pub r_outer: f64,
    pub phi: f64,
}

impl ShellSpec {
    pub fn new(directions: Vec<Vec<f64>>, r: f64, r_outer: f64, phi: f64, norm: &dyn Norm) -> Result<Self> {
        if !(0.0 < r && r < r_outer) {
            return Err(Error::InvalidArgument("shell radii must satisfy 0 < r < r'".into()));
        }
        if phi < 0.0 {
            return Err(Error::InvalidArgument("enlargement must be ≥ 0".into()));
        }
        for a in &directions {
            if (norm.eval(a) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(
                    "shell directions must be unit vectors of the norm".into(),
                ));
            }
        }
        Ok(ShellSpec {
            directions,
            r,
            r_outer,
            phi,
        })
    }

    /// `A ⊕ φ`: the same shell with a wider direction tolerance.
    pub fn enlarged(&self, phi: f64) -> ShellSpec {
        ShellSpec {
            phi: self.phi + phi,
            ..self.clone()
        }
    }

    /// Whether the unit vector `u` lies in `A ⊕ φ`.
    pub fn direction_admitted(&self, u: &[f64], norm: &dyn Norm) -> bool {
        self.directions.iter().any(|a| {
            let diff: Vec<f64> = u.iter().zip(a).map(|(p, q)| p - q).collect();
            norm.eval(&diff) <= self.phi + 1e-12
        })
    }

    pub fn contains(&self, x: &[f64], norm: &dyn Norm) -> bool {
        let n = norm.eval(x);
        if n < self.r || n > self.r_outer || n == 0.0 {
            return false;
        }
        let u: Vec<f64> = x.iter().map(|v| v / n).collect();
        self.direction_admitted(&u, norm)
    }

    /// All lattice sites of the shell inside `bx`.
    pub fn sites(&self, bx: &LatticeBox, norm: &dyn Norm) -> Vec<Site> {
        let grid = bx.grid();
        let mut out = Vec::new();
        let mut c = vec![0; grid.dim()];
        for idx in 0..grid.len() {
            grid.coords_into(idx, &mut c);
            let x: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            if self.contains(&x, norm) {
                out.push(Site(c.clone()));
            }
        }
        out
    }
}

/// Centres on the unit sphere of a norm such that every unit vector is within
/// `epsilon` of one of them. `count ≤ bound_constant·(1+1/ε)^{d−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereCover {
    pub epsilon: f64,
    pub dim: usize,
    pub norm: String,
    pub centers: Vec<Vec<f64>>,
    pub bound_constant: f64,
    pub construction: String,
}

impl SphereCover {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn cardinality_bound(&self) -> f64 {
        self.bound_constant * (1.0 + 1.0 / self.epsilon).powi(self.dim as i32 - 1)
    }
}

pub fn sphere_cover(epsilon: f64, norm: &dyn Norm, d: usize) -> Result<SphereCover> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("cover radius must be > 0".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
    }
    let normalise = |v: Vec<f64>| {
        let n = norm.eval(&v);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    if d == 1 {
        return Ok(SphereCover {
            epsilon,
            dim: 1,
            norm: norm.name(),
            centers: vec![normalise(vec![1.0]), normalise(vec![-1.0])],
            bound_constant: 2.0,
            construction: "points".into(),
        });
    }
    if d == 2 && norm.is_euclidean() {
        // chord between consecutive points is 2 sin(π/N); covering radius is
        // half the arc, i.e. chord 2 sin(π/(2N))
        let needed = if epsilon >= 2.0 {
            2
        } else {
            (PI / (2.0 * (epsilon / 2.0).asin())).ceil() as usize
        };
        let n = needed.max(2).next_power_of_two();
        let centers = (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
        return Ok(SphereCover {
            epsilon,
            dim: 2,
            norm: norm.name(),
            centers,
            bound_constant: 2.0 * PI,
            construction: "equiangular".into(),
        });
    }
    // Cover the faces of the ℓ∞ cube with a grid of mesh ≤ 2ε∞, then project
    // radially onto the sphere of `norm`.
    let (a, b) = norm.linf_bounds(d);
    let k = if norm.is_max_norm() { 1.0 } else { a / (2.0 * b) };
    let eps_inf = k * epsilon;
    let mut segments = 1usize;
    while 2.0 / segments as f64 > 2.0 * eps_inf {
        segments *= 2;
    }
    let n = segments + 1;
    let grid_val = |i: usize| -1.0 + 2.0 * i as f64 / segments as f64;
    let mut centers = Vec::new();
    let mut idx = vec![0usize; d - 1];
    for axis in 0..d {
        for sign in [1.0, -1.0] {
            idx.iter_mut().for_each(|v| *v = 0);
            loop {
                let mut p = vec![0.0; d];
                let mut dup = false;
                let mut j = 0;
                for (ax, slot) in p.iter_mut().enumerate() {
                    if ax == axis {
                        *slot = sign;
                    } else {
                        let v = grid_val(idx[j]);
                        if ax < axis && v.abs() == 1.0 {
                            dup = true;
                        }
                        *slot = v;
                        j += 1;
                    }
                }
                if !dup {
                    centers.push(normalise(p));
                }
                // odometer
                let mut carry = 0;
                while carry < d - 1 {
                    idx[carry] += 1;
                    if idx[carry] < n {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                }
                if carry == d - 1 {
                    break;
                }
            }
        }
    }
    let c = (2.0 / k).max(2.0);
    Ok(SphereCover {
        epsilon,
        dim: d,
        norm: norm.name(),
        centers,
        bound_constant: 2.0 * d as f64 * c.powi(d as i32 - 1),
        construction: "cube-faces".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_in_low_dimensions() {
        assert_eq!(
            neighbors(&Site::from([0, 0])),
            vec![
                Site::from([1, 0]),
                Site::from([-1, 0]),
                Site::from([0, 1]),
                Site::from([0, -1])
            ]
        );
        let mut one_d = neighbors(&Site::from([5]));
        one_d.sort();
        assert_eq!(one_d, vec![Site::from([4]), Site::from([6])]);
        let three = neighbors(&Site::from([0, 0, 0]));
        assert_eq!(three.len(), 6);
        for s in &three {
            assert_eq!(s.0.iter().map(|c| c.abs()).sum::<i32>(), 1);
        }
    }

    #[test]
    fn edge_is_canonical() {
        let e1 = Edge::new(Site::from([1, 0]), Site::from([0, 0])).unwrap();
        let e2 = Edge::new(Site::from([0, 0]), Site::from([1, 0])).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.a(), &Site::from([0, 0]));
        assert_eq!(e1.axis(), 0);
        assert!(Edge::new(Site::from([0, 0]), Site::from([1, 1])).is_err());
    }

    #[test]
    fn grid_index_order_is_lexicographic() {
        let g = LatticeBox::new(2, 2).unwrap().grid();
        let sites: Vec<Site> = (0..g.len()).map(|i| g.site(i)).collect();
        let mut sorted = sites.clone();
        sorted.sort();
        assert_eq!(sites, sorted);
        for (i, s) in sites.iter().enumerate() {
            assert_eq!(g.index(s), Some(i));
        }
    }

    #[test]
    fn half_infinite_cylinder_membership() {
        let c = CylinderSpec::half_infinite(vec![1.0, 0.0], 1.0).unwrap();
        assert!(cylinder_contains(&Site::from([3, 0]), &c));
        assert!(!cylinder_contains(&Site::from([3, 2]), &c));
        assert!(!cylinder_contains(&Site::from([-1, 0]), &c));
        // boundary is closed
        assert!(cylinder_contains(&Site::from([3, 1]), &c));
        assert!(cylinder_contains(&Site::from([0, 0]), &c));
    }

    #[test]
    fn cylinder_kinds() {
        let fin = CylinderSpec::new(vec![0.0, 0.0], vec![1.0, 0.0], 1.0, CylinderKind::Finite { height: 2.0 })
            .unwrap();
        assert!(cylinder_contains(&Site::from([2, 0]), &fin));
        assert!(!cylinder_contains(&Site::from([3, 0]), &fin));
        let bi = CylinderSpec::new(vec![0.0, 0.0], vec![1.0, 0.0], 1.0, CylinderKind::BiInfinite).unwrap();
        assert!(cylinder_contains(&Site::from([-7, 1]), &bi));
        assert!(CylinderSpec::half_infinite(vec![1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn direction_gap_examples() {
        let g = direction_gap(&[1.0, 0.0], &[2.0, 0.0], &StdNorm::L2).unwrap();
        assert_eq!(g, 0.0);
        let g = direction_gap(&[1.0, 0.0], &[0.0, 1.0], &StdNorm::L2).unwrap();
        assert!((g - 2f64.sqrt()).abs() < 1e-15);
        let bound = direction_gap_bound(&[1.0, 0.0], &[0.0, 1.0], &StdNorm::L2);
        assert!((bound - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            direction_gap(&[0.0, 0.0], &[1.0, 0.0], &StdNorm::L2),
            Err(Error::ZeroVector)
        );
    }

    #[test]
    fn one_dimensional_cover_is_two_points() {
        for norm in [StdNorm::L1, StdNorm::L2, StdNorm::Linf] {
            for eps in [0.01, 1.0, 5.0] {
                let c = sphere_cover(eps, &norm, 1).unwrap();
                assert_eq!(c.centers, vec![vec![1.0], vec![-1.0]]);
            }
        }
    }

    #[test]
    fn equiangular_cover_sizes() {
        let c = sphere_cover(2.0, &StdNorm::L2, 2).unwrap();
        assert_eq!(c.len(), 2);
        let c = sphere_cover(0.2, &StdNorm::L2, 2).unwrap();
        assert_eq!(c.len(), 16);
        let c = sphere_cover(0.1, &StdNorm::L2, 2).unwrap();
        assert!(c.len() as f64 <= c.cardinality_bound());
    }

    #[test]
    fn covers_are_nested_under_refinement() {
        for (norm, d) in [(StdNorm::L2, 2), (StdNorm::L1, 2), (StdNorm::L2, 3)] {
            let coarse = sphere_cover(0.4, &norm, d).unwrap();
            let fine = sphere_cover(0.1, &norm, d).unwrap();
            for c in &coarse.centers {
                assert!(fine
                    .centers
                    .iter()
                    .any(|f| f.iter().zip(c).all(|(a, b)| (a - b).abs() < 1e-12)));
            }
        }
    }

    #[test]
    fn shell_membership() {
        let dirs = vec![vec![1.0, 0.0]];
        let s = ShellSpec::new(dirs, 2.0, 4.0, 0.1, &StdNorm::L2).unwrap();
        assert!(s.contains(&[3.0, 0.0], &StdNorm::L2));
        assert!(!s.contains(&[3.0, 1.0], &StdNorm::L2));
        assert!(s.enlarged(0.4).contains(&[3.0, 1.0], &StdNorm::L2));
        assert!(!s.contains(&[5.0, 0.0], &StdNorm::L2));
        assert!(ShellSpec::new(vec![], 3.0, 2.0, 0.0, &StdNorm::L2).is_err());
        let bx = LatticeBox::new(2, 5).unwrap();
        let sites = s.sites(&bx, &StdNorm::L2);
        assert_eq!(sites, vec![Site::from([2, 0]), Site::from([3, 0]), Site::from([4, 0])]);
    }
}
