//! Experiment orchestration: JSON experiment specs, seeded replicas,
//! conditioning on escape proxies, CSV/JSON artifacts and exact replay.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    density_curve, fit_density, fluctuation_gap, median, outer_radius, shade_radius_adaptive, DensityCurve,
    ExponentFit, Snapshot,
};
use crate::competition::{run_competition, CompetitionConfig, ExtinctionHalt, GrowthOutcome, StopRule};
use crate::error::{Error, Result};
use crate::fpp::{estimate_shape, FieldPolicy, ShapeEstimate};
use crate::lattice::{LatticeBox, Site, StdNorm};
use crate::passage::{derive_seed, validate_assumptions, AssumptionReport, CouplingMode, EdgeSeedField, PassageLaw};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SingleRun,
    CoexistenceSweep,
    DensityStudy,
    ShadeStudy,
    ShapeStudy,
    FluctuationStudy,
    Validate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    #[default]
    None,
    G1,
    Coex,
}

impl Conditioning {
    pub fn accepts(&self, o: &GrowthOutcome) -> bool {
        match self {
            Conditioning::None => true,
            Conditioning::G1 => o.g1_proxy,
            Conditioning::Coex => o.coex_proxy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// The slow law varies; the fast law stays `law2`.
    Species1,
    /// The fast law varies; the slow law stays `law1`.
    Species2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Ordered so that each law dominates the next.
    pub laws: Vec<PassageLaw>,
    #[serde(default = "yes")]
    pub common_seeds: bool,
    /// Box radii to repeat the sweep at; empty means the spec's `box_radius`.
    /// Escape proxies only approach the true events as `L` grows, so a few
    /// sizes show how stable the estimates are.
    #[serde(default)]
    pub box_radii: Vec<i32>,
}

impl SweepSpec {
    pub fn radii(&self, fallback: i32) -> Vec<i32> {
        if self.box_radii.is_empty() {
            vec![fallback]
        } else {
            self.box_radii.clone()
        }
    }
}

fn yes() -> bool {
    true
}

/// Settings for the density, shade and fluctuation probes. Radii `t` are in
/// lattice units; the matching time is `t · μ̂₁(e₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub density_radii: Vec<f64>,
    pub snapshot_radii: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub shade_exponent: f64,
    pub shade_eps_min: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            density_radii: geometric(50.0, 380.0, 12),
            snapshot_radii: vec![100.0, 200.0, 350.0],
            r_grid: vec![1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0],
            shade_exponent: 0.75,
            shade_eps_min: 1.0 / 64.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeSpec {
    pub epsilon_cover: f64,
    pub ladder: Vec<f64>,
    pub replicas: usize,
}

impl Default for ShapeSpec {
    fn default() -> Self {
        ShapeSpec {
            epsilon_cover: 0.1,
            ladder: vec![100.0, 200.0],
            replicas: 8,
        }
    }
}

/// `n` points from `a` to `b`, evenly spaced on a log scale and rounded to
/// two decimals.
pub fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let v = a * (b / a).powf(k as f64 / (n - 1) as f64);
            (v * 100.0).round() / 100.0
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "two")]
    pub dim: usize,
    pub box_radius: i32,
    /// Defaults to the origin.
    #[serde(default)]
    pub s1: Option<Site>,
    /// Defaults to `e₁`.
    #[serde(default)]
    pub s2: Option<Site>,
    pub law1: PassageLaw,
    pub law2: PassageLaw,
    #[serde(default = "shared")]
    pub mode: CouplingMode,
    /// Replicas attempted (an upper bound when `target_survivors` is set).
    pub replicas: usize,
    /// Stop launching replicas once this many pass the conditioning.
    #[serde(default)]
    pub target_survivors: Option<usize>,
    pub base_seed: u64,
    #[serde(default)]
    pub conditioning: Conditioning,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default)]
    pub shape: ShapeSpec,
    /// Not part of the manifest: results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

fn two() -> usize {
    2
}

fn shared() -> CouplingMode {
    CouplingMode::SharedUniform
}

impl ExperimentSpec {
    /// Desk-scale defaults: `d = 2`, `L = 400`, Exp(1) against Exp(1.5).
    pub fn desk_default(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            dim: 2,
            box_radius: 400,
            s1: None,
            s2: None,
            law1: PassageLaw::exponential(1.0),
            law2: PassageLaw::exponential(1.5),
            mode: CouplingMode::SharedUniform,
            replicas: 200,
            target_survivors: None,
            base_seed: 0,
            conditioning: Conditioning::None,
            sweep: None,
            probe: ProbeSpec::default(),
            shape: ShapeSpec::default(),
            workers: None,
            out_dir: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn sources(&self) -> (Site, Site) {
        let s1 = self.s1.clone().unwrap_or_else(|| Site::origin(self.dim));
        let s2 = self.s2.clone().unwrap_or_else(|| Site::unit(self.dim, 0, 1));
        (s1, s2)
    }

    pub fn lattice_box(&self) -> Result<LatticeBox> {
        LatticeBox::new(self.dim, self.box_radius)
    }

    /// Seed of replica `i`.
    pub fn replica_seed(&self, i: usize) -> u64 {
        derive_seed(self.base_seed, i as u64)
    }

    pub fn base_config(&self, seed: u64) -> Result<CompetitionConfig> {
        let (s1, s2) = self.sources();
        let mut cfg = CompetitionConfig::new(self.lattice_box()?, s1, s2, self.law1, self.law2, seed);
        cfg.mode = self.mode;
        cfg.field = EdgeSeedField::new(seed);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be ≥ 1".into()));
        }
        self.base_config(0)?.validate()?;
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("replicas must be ≥ 1".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.laws.is_empty() {
                return Err(Error::InvalidArgument("sweep needs at least one law".into()));
            }
            for l in &sw.laws {
                l.validate()?;
            }
            if let Some(w) = sw.laws.windows(2).find(|w| !w[0].dominates(&w[1])) {
                return Err(Error::NotOrdered(format!("sweep grid: {} does not dominate {}", w[0], w[1])));
            }
            for r in &sw.box_radii {
                let mut cfg = self.base_config(0)?;
                cfg.bx = LatticeBox::new(self.dim, *r)?;
                cfg.validate()?;
            }
        }
        if self.kind == ExperimentKind::CoexistenceSweep && self.sweep.is_none() {
            return Err(Error::Config("coexistence-sweep needs a `sweep` section".into()));
        }
        let needs_2d = matches!(
            self.kind,
            ExperimentKind::DensityStudy | ExperimentKind::ShadeStudy | ExperimentKind::FluctuationStudy
        );
        if needs_2d && self.dim != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: self.dim,
            });
        }
        let p = &self.probe;
        for (name, v) in [
            ("density_radii", &p.density_radii),
            ("snapshot_radii", &p.snapshot_radii),
            ("r_grid", &p.r_grid),
        ] {
            if v.is_empty() || v[0] <= 0.0 || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("probe.{name} must be positive and increasing")));
            }
        }
        if self.shape.replicas < 2 || self.shape.ladder.is_empty() || !(self.shape.epsilon_cover > 0.0) {
            return Err(Error::Config("shape needs ε > 0, a ladder and ≥ 2 replicas".into()));
        }
        Ok(())
    }
}

/// One written file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub package_version: String,
    pub spec: ExperimentSpec,
    pub assumptions: AssumptionReport,
    pub artifacts: Vec<Artifact>,
    pub content_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub kept: usize,
    pub discarded: usize,
    pub lines: Vec<String>,
    pub validation_failed: bool,
    pub manifest: Manifest,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Sink {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Sink {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, data: Vec<u8>) -> Result<()> {
        fs::write(self.dir.join(name), &data)?;
        self.artifacts.push(Artifact {
            name: name.to_string(),
            sha256: hex(&Sha256::digest(&data)),
            bytes: data.len(),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, s.into_bytes())
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let data = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.write(name, data)
    }

    fn finish(self, spec: &ExperimentSpec, assumptions: AssumptionReport) -> Result<Manifest> {
        let mut h = Sha256::new();
        for a in &self.artifacts {
            h.update(a.name.as_bytes());
            h.update([0]);
            h.update(a.sha256.as_bytes());
            h.update(b"\n");
        }
        let manifest = Manifest {
            manifest_version: MANIFEST_VERSION,
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
            assumptions,
            artifacts: self.artifacts,
            content_hash: hex(&h.finalize()),
        };
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        fs::write(self.dir.join("manifest.json"), s)?;
        Ok(manifest)
    }
}

/// Conditioning bookkeeping for one replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub replica: usize,
    pub seed: u64,
    pub g1: bool,
    pub g2: bool,
    pub coex: bool,
    pub count1: usize,
    pub count2: usize,
    pub kept: bool,
}

/// Runs `f` over replicas in index order, in batches, until `target`
/// accepted results exist or `max` replicas were tried. Only the first
/// `target` acceptances are kept, so the outcome does not depend on the
/// number of workers.
fn conditioned_replicas<T: Send>(
    max: usize,
    target: Option<usize>,
    f: impl Fn(usize) -> Result<(ReplicaRow, Option<T>)> + Sync,
) -> Result<(Vec<ReplicaRow>, Vec<T>)> {
    let batch = rayon::current_num_threads().max(1) * 4;
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut next = 0;
    while next < max && target.is_none_or(|t| kept.len() < t) {
        let end = (next + batch).min(max);
        let results: Vec<Result<(ReplicaRow, Option<T>)>> = (next..end).into_par_iter().map(&f).collect();
        for r in results {
            let (mut row, v) = r?;
            if target.is_some_and(|t| kept.len() >= t) {
                break;
            }
            match v {
                Some(v) if row.kept => kept.push(v),
                _ => row.kept = false,
            }
            rows.push(row);
        }
        next = end;
    }
    Ok((rows, kept))
}

fn outcome_row(replica: usize, seed: u64, o: &GrowthOutcome, kept: bool) -> ReplicaRow {
    ReplicaRow {
        replica,
        seed,
        g1: o.g1_proxy,
        g2: o.g2_proxy,
        coex: o.coex_proxy,
        count1: o.final_counts.0,
        count2: o.final_counts.1,
        kept,
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let center = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub box_radius: i32,
    pub law1: PassageLaw,
    pub law2: PassageLaw,
    pub replicas: usize,
    pub g1: usize,
    pub g2: usize,
    pub coex: usize,
    pub p_g1: f64,
    pub p_g1_lo: f64,
    pub p_g1_hi: f64,
    pub p_g2: f64,
    pub p_g2_lo: f64,
    pub p_g2_hi: f64,
    pub p_coex: f64,
    pub p_coex_lo: f64,
    pub p_coex_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub common_seeds: bool,
    pub cells: Vec<SweepCell>,
    /// `indicators[cell][replica] = (g1, g2, coex)`.
    pub indicators: Vec<Vec<(bool, bool, bool)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub axis: SweepAxis,
    /// Checked replica by replica (common seeds) rather than on estimates.
    pub replica_wise: bool,
    pub statistical_only: bool,
    /// `(replica, cell)` pairs where the G¹ indicator moved the wrong way
    /// between `cell - 1` and `cell`.
    pub replica_violations: Vec<(usize, usize)>,
    pub estimate_monotone: bool,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.replica_violations.is_empty() && (self.replica_wise || self.estimate_monotone)
    }
}

/// Along the sweep the varying law gets faster. The slow species' escape
/// indicator must not decrease when its own law speeds up, and must not
/// increase when the fast law speeds up.
pub fn sweep_monotonicity_report(r: &SweepResult) -> MonotonicityReport {
    let up = r.axis == SweepAxis::Species1;
    let ok = |a: bool, b: bool| if up { a <= b } else { a >= b };
    let mut violations = Vec::new();
    if r.common_seeds {
        let n = r.indicators.first().map_or(0, |c| c.len());
        for i in 0..n {
            for c in 1..r.indicators.len() {
                if r.cells[c - 1].box_radius != r.cells[c].box_radius {
                    continue;
                }
                if !ok(r.indicators[c - 1][i].0, r.indicators[c][i].0) {
                    violations.push((i, c));
                }
            }
        }
    }
    let estimate_monotone = r.cells.windows(2).all(|w| {
        if w[0].box_radius != w[1].box_radius {
            true
        } else if up {
            w[0].p_g1 <= w[1].p_g1
        } else {
            w[0].p_g1 >= w[1].p_g1
        }
    });
    MonotonicityReport {
        axis: r.axis,
        replica_wise: r.common_seeds,
        statistical_only: !r.common_seeds,
        replica_violations: violations,
        estimate_monotone,
    }
}

/// Runs a coexistence sweep without writing anything.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    let sw = spec
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("missing sweep section".into()))?;
    let mut cells = Vec::new();
    let mut indicators = Vec::new();
    let grid: Vec<(i32, &PassageLaw)> = sw
        .radii(spec.box_radius)
        .into_iter()
        .flat_map(|r| sw.laws.iter().map(move |l| (r, l)))
        .collect();
    for (c, (radius, law)) in grid.into_iter().enumerate() {
        let bx = LatticeBox::new(spec.dim, radius)?;
        let (l1, l2) = match sw.axis {
            SweepAxis::Species1 => (*law, spec.law2),
            SweepAxis::Species2 => (spec.law1, *law),
        };
        let ind: Vec<(bool, bool, bool)> = (0..spec.replicas)
            .into_par_iter()
            .map(|i| {
                let seed = if sw.common_seeds {
                    spec.replica_seed(i)
                } else {
                    derive_seed(derive_seed(spec.base_seed, 1 << 40 | c as u64), i as u64)
                };
                let mut cfg = spec.base_config(seed)?;
                cfg.bx = bx;
                cfg.law1 = l1;
                cfg.law2 = l2;
                cfg.mode = CouplingMode::SharedUniform;
                cfg.stop = StopRule::OutcomeDetermined;
                let (_, o) = run_competition(&cfg)?;
                Ok((o.g1_proxy, o.g2_proxy, o.coex_proxy))
            })
            .collect::<Result<_>>()?;
        let n = ind.len();
        let g1 = ind.iter().filter(|x| x.0).count();
        let g2 = ind.iter().filter(|x| x.1).count();
        let coex = ind.iter().filter(|x| x.2).count();
        let (a, b) = wilson_interval(g1, n);
        let (c2, d2) = wilson_interval(g2, n);
        let (e, f) = wilson_interval(coex, n);
        cells.push(SweepCell {
            index: c,
            box_radius: radius,
            law1: l1,
            law2: l2,
            replicas: n,
            g1,
            g2,
            coex,
            p_g1: g1 as f64 / n as f64,
            p_g1_lo: a,
            p_g1_hi: b,
            p_g2: g2 as f64 / n as f64,
            p_g2_lo: c2,
            p_g2_hi: d2,
            p_coex: coex as f64 / n as f64,
            p_coex_lo: e,
            p_coex_hi: f,
        });
        indicators.push(ind);
    }
    Ok(SweepResult {
        axis: sw.axis,
        common_seeds: sw.common_seeds,
        cells,
        indicators,
    })
}

/// Measurements at one snapshot radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeAtRadius {
    pub t: f64,
    pub tau: f64,
    pub r_t: Option<f64>,
    pub r_t_scaled: Option<f64>,
    pub shade_directions: usize,
    pub inner_defect: Option<f64>,
    pub outer_excess: Option<f64>,
    pub gap_over_tau: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub replica: usize,
    pub seed: u64,
    pub density: Option<DensityCurve>,
    pub fit: Option<ExponentFit>,
    pub fit_error: Option<String>,
    pub radii: Vec<ProbeAtRadius>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeParts {
    pub density: bool,
    pub shade: bool,
    pub fluctuation: bool,
}

impl ProbeParts {
    pub const ALL: ProbeParts = ProbeParts {
        density: true,
        shade: true,
        fluctuation: true,
    };
}

/// Shape estimate of `law1` used to convert radii to times and as the norm
/// for fluctuation gaps.
pub fn probe_shape(spec: &ExperimentSpec) -> Result<ShapeEstimate> {
    let policy = FieldPolicy::new(derive_seed(spec.base_seed, u64::MAX));
    estimate_shape(
        &spec.law1,
        spec.dim,
        spec.shape.epsilon_cover,
        &spec.shape.ladder,
        spec.shape.replicas,
        &policy,
    )
}

/// `μ̂(e₁)` of a shape estimate.
pub fn axis_time_constant(shape: &ShapeEstimate) -> f64 {
    let mut e1 = vec![0.0; shape.dim()];
    e1[0] = 1.0;
    shape.mu_hat[shape.nearest_direction(&e1)]
}

fn probe_one(
    spec: &ExperimentSpec,
    shape: &ShapeEstimate,
    parts: ProbeParts,
    i: usize,
) -> Result<(ReplicaRow, Option<ProbeRecord>)> {
    let seed = spec.replica_seed(i);
    let mut cfg = spec.base_config(seed)?;
    if spec.conditioning != Conditioning::None {
        cfg.halt_on_extinction = ExtinctionHalt::Species1;
    }
    let (trace, o) = run_competition(&cfg)?;
    let kept = spec.conditioning.accepts(&o);
    let row = outcome_row(i, seed, &o, kept);
    if !kept {
        return Ok((row, None));
    }
    let scale = axis_time_constant(shape);
    let mut rec = ProbeRecord {
        replica: i,
        seed,
        density: None,
        fit: None,
        fit_error: None,
        radii: Vec::new(),
    };
    if parts.density {
        let fin = Snapshot::final_of(&trace);
        let mut curve = density_curve(&fin, &StdNorm::L2, &spec.probe.density_radii)?;
        curve.incomplete = !o.counts_final;
        match fit_density(&curve) {
            Ok(f) => rec.fit = Some(f),
            Err(e) => rec.fit_error = Some(e.to_string()),
        }
        rec.density = Some(curve);
    }
    if parts.shade || parts.fluctuation {
        for &t in &spec.probe.snapshot_radii {
            let tau = t * scale;
            let snap = Snapshot::from_trace(&trace, tau)?;
            let mut m = ProbeAtRadius {
                t,
                tau,
                r_t: None,
                r_t_scaled: None,
                shade_directions: 0,
                inner_defect: None,
                outer_excess: None,
                gap_over_tau: None,
                status: "ok".into(),
            };
            if parts.shade {
                let t_outer = outer_radius(&snap).max(1.0);
                match shade_radius_adaptive(&snap, t_outer, &spec.probe.r_grid, spec.probe.shade_eps_min) {
                    Ok(rep) => {
                        m.r_t = Some(rep.r_t);
                        m.r_t_scaled = Some(rep.r_t / t.powf(spec.probe.shade_exponent));
                        m.shade_directions = rep.directions_tested;
                    }
                    Err(e) => m.status = format!("shade: {e}"),
                }
            }
            if parts.fluctuation {
                match fluctuation_gap(&snap, shape) {
                    Ok(g) => {
                        m.inner_defect = Some(g.inner_defect);
                        m.outer_excess = Some(g.outer_excess);
                        m.gap_over_tau = Some(g.worst() / tau);
                    }
                    Err(e) => m.status = format!("fluctuation: {e}"),
                }
            }
            rec.radii.push(m);
        }
    }
    Ok((row, Some(rec)))
}

/// Conditioned replicas with the selected probe measurements.
pub fn run_probe(
    spec: &ExperimentSpec,
    shape: &ShapeEstimate,
    parts: ProbeParts,
) -> Result<(Vec<ReplicaRow>, Vec<ProbeRecord>)> {
    conditioned_replicas(spec.replicas, spec.target_survivors, |i| probe_one(spec, shape, parts, i))
}

/// Per-radius medians over records, ignoring missing values.
pub fn probe_medians(records: &[ProbeRecord], radius_index: usize, pick: impl Fn(&ProbeAtRadius) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = records
        .iter()
        .filter_map(|r| r.radii.get(radius_index).and_then(&pick))
        .collect();
    median(&v)
}

#[derive(Serialize)]
struct DensityRow {
    replica: usize,
    seed: u64,
    t: f64,
    ball_size: usize,
    strong_count: usize,
    density: f64,
    clipped: bool,
}

#[derive(Serialize)]
struct FitRow {
    replica: usize,
    seed: u64,
    slope: Option<f64>,
    stderr: Option<f64>,
    used: Option<usize>,
    error: Option<String>,
}

#[derive(Serialize)]
struct RadiusRow<'a> {
    replica: usize,
    seed: u64,
    t: f64,
    tau: f64,
    r_t: Option<f64>,
    r_t_scaled: Option<f64>,
    shade_directions: usize,
    inner_defect: Option<f64>,
    outer_excess: Option<f64>,
    gap_over_tau: Option<f64>,
    status: &'a str,
}

#[derive(Serialize)]
struct SweepRow {
    index: usize,
    box_radius: i32,
    law1: String,
    law2: String,
    replicas: usize,
    g1: usize,
    g2: usize,
    coex: usize,
    p_g1: f64,
    p_g1_lo: f64,
    p_g1_hi: f64,
    p_g2: f64,
    p_g2_lo: f64,
    p_g2_hi: f64,
    p_coex: f64,
    p_coex_lo: f64,
    p_coex_hi: f64,
}

impl From<&SweepCell> for SweepRow {
    fn from(c: &SweepCell) -> Self {
        SweepRow {
            index: c.index,
            box_radius: c.box_radius,
            law1: c.law1.to_string(),
            law2: c.law2.to_string(),
            replicas: c.replicas,
            g1: c.g1,
            g2: c.g2,
            coex: c.coex,
            p_g1: c.p_g1,
            p_g1_lo: c.p_g1_lo,
            p_g1_hi: c.p_g1_hi,
            p_g2: c.p_g2,
            p_g2_lo: c.p_g2_lo,
            p_g2_hi: c.p_g2_hi,
            p_coex: c.p_coex,
            p_coex_lo: c.p_coex_lo,
            p_coex_hi: c.p_coex_hi,
        }
    }
}

#[derive(Serialize)]
struct SiteRow {
    site: String,
    species: u8,
    claim_time: f64,
}

#[derive(Serialize)]
struct ShapeRow {
    direction: String,
    mu_hat: f64,
    ci_halfwidth: f64,
    std_error: f64,
}

fn fmt_site(s: &Site) -> String {
    s.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

fn shape_rows(s: &ShapeEstimate) -> Vec<ShapeRow> {
    s.directions
        .iter()
        .enumerate()
        .map(|(k, d)| ShapeRow {
            direction: d.iter().map(|v| format!("{v:.12}")).collect::<Vec<_>>().join(" "),
            mu_hat: s.mu_hat[k],
            ci_halfwidth: s.ci_halfwidth[k],
            std_error: s.std_error[k],
        })
        .collect()
}

fn median_line(label: &str, v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{label}: {x:.6}"),
        None => format!("{label}: n/a"),
    }
}

/// Runs an experiment, writing artifacts and `manifest.json` to `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunSummary> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_inner(spec, out_dir))
}

fn run_inner(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunSummary> {
    let assumptions = validate_assumptions(&spec.law1, &spec.law2, spec.dim);
    let mut sink = Sink::new(out_dir)?;
    let mut lines = vec![format!(
        "{:?}: {} vs {}, L = {}, base seed {}",
        spec.kind, spec.law1, spec.law2, spec.box_radius, spec.base_seed
    )];
    let mut kept = 0;
    let mut discarded = 0;
    let mut validation_failed = false;
    match spec.kind {
        ExperimentKind::Validate => {
            sink.json("assumptions.json", &assumptions)?;
            validation_failed = assumptions.any_fail();
            lines.push(format!("assumptions: {assumptions:?}"));
        }
        ExperimentKind::SingleRun => {
            let seed = spec.replica_seed(0);
            let cfg = spec.base_config(seed)?;
            let (trace, o) = run_competition(&cfg)?;
            let mut buf = Vec::new();
            trace.write_jsonl(&mut buf)?;
            sink.write("trace.jsonl", buf)?;
            let grid = trace.grid();
            let rows: Vec<SiteRow> = (0..grid.len())
                .filter(|&i| trace.species_at(i) != 0)
                .map(|i| SiteRow {
                    site: fmt_site(&grid.site(i)),
                    species: trace.species_at(i),
                    claim_time: trace.claim_at(i),
                })
                .collect();
            sink.csv("final.csv", &rows)?;
            sink.json("outcome.json", &o)?;
            kept = 1;
            lines.push(format!("seed {seed}: {o:?}, ties {}", trace.tie_count()));
        }
        ExperimentKind::CoexistenceSweep => {
            let r = run_sweep(spec)?;
            let rep = sweep_monotonicity_report(&r);
            let rows: Vec<SweepRow> = r.cells.iter().map(SweepRow::from).collect();
            sink.csv("sweep.csv", &rows)?;
            #[derive(Serialize)]
            struct IndRow {
                cell: usize,
                replica: usize,
                g1: bool,
                g2: bool,
                coex: bool,
            }
            let ind: Vec<IndRow> = r
                .indicators
                .iter()
                .enumerate()
                .flat_map(|(c, v)| {
                    v.iter().enumerate().map(move |(i, x)| IndRow {
                        cell: c,
                        replica: i,
                        g1: x.0,
                        g2: x.1,
                        coex: x.2,
                    })
                })
                .collect();
            sink.csv("indicators.csv", &ind)?;
            sink.json("monotonicity.json", &rep)?;
            kept = spec.replicas * r.cells.len();
            for c in &r.cells {
                lines.push(format!(
                    "cell {}: {} vs {}: P(G1) = {:.4} [{:.4}, {:.4}], P(G2) = {:.4}, P(Coex) = {:.4} [{:.4}, {:.4}]",
                    c.index, c.law1, c.law2, c.p_g1, c.p_g1_lo, c.p_g1_hi, c.p_g2, c.p_coex, c.p_coex_lo, c.p_coex_hi
                ));
            }
            lines.push(format!("monotone in G1: {}", rep.holds()));
        }
        ExperimentKind::ShapeStudy => {
            let policy = FieldPolicy::new(derive_seed(spec.base_seed, u64::MAX));
            for (name, law) in [("law1", spec.law1), ("law2", spec.law2)] {
                let s = estimate_shape(
                    &law,
                    spec.dim,
                    spec.shape.epsilon_cover,
                    &spec.shape.ladder,
                    spec.shape.replicas,
                    &policy,
                )?;
                sink.csv(&format!("shape_{name}.csv"), &shape_rows(&s))?;
                sink.json(&format!("shape_{name}.json"), &s)?;
                lines.push(format!("{name} {law}: mu_hat(e1) = {:.6}", axis_time_constant(&s)));
            }
            kept = spec.shape.replicas;
        }
        ExperimentKind::DensityStudy | ExperimentKind::ShadeStudy | ExperimentKind::FluctuationStudy => {
            let parts = ProbeParts {
                density: spec.kind == ExperimentKind::DensityStudy,
                shade: spec.kind == ExperimentKind::ShadeStudy,
                fluctuation: spec.kind == ExperimentKind::FluctuationStudy,
            };
            let shape = probe_shape(spec)?;
            sink.json("shape.json", &shape)?;
            let (rows, recs) = run_probe(spec, &shape, parts)?;
            kept = recs.len();
            discarded = rows.len() - kept;
            sink.csv("replicas.csv", &rows)?;
            if kept == 0 {
                sink.finish(spec, assumptions)?;
                return Err(Error::InsufficientSurvivors { kept, discarded });
            }
            lines.push(format!("kept {kept}, discarded {discarded}"));
            if parts.density {
                let mut drows = Vec::new();
                let mut frows = Vec::new();
                for r in &recs {
                    let c = r.density.as_ref().expect("density requested");
                    for k in 0..c.radii.len() {
                        drows.push(DensityRow {
                            replica: r.replica,
                            seed: r.seed,
                            t: c.radii[k],
                            ball_size: c.ball_sizes[k],
                            strong_count: c.strong_counts[k],
                            density: c.density[k],
                            clipped: c.clipped[k],
                        });
                    }
                    frows.push(FitRow {
                        replica: r.replica,
                        seed: r.seed,
                        slope: r.fit.as_ref().map(|f| f.slope),
                        stderr: r.fit.as_ref().map(|f| f.stderr),
                        used: r.fit.as_ref().map(|f| f.used),
                        error: r.fit_error.clone(),
                    });
                }
                sink.csv("density.csv", &drows)?;
                sink.csv("density_fits.csv", &frows)?;
                let slopes: Vec<f64> = recs.iter().filter_map(|r| r.fit.as_ref().map(|f| f.slope)).collect();
                lines.push(median_line("median density slope", median(&slopes)));
            } else {
                let name = if parts.shade { "shade.csv" } else { "fluctuation.csv" };
                let rows: Vec<RadiusRow> = recs
                    .iter()
                    .flat_map(|r| {
                        r.radii.iter().map(move |m| RadiusRow {
                            replica: r.replica,
                            seed: r.seed,
                            t: m.t,
                            tau: m.tau,
                            r_t: m.r_t,
                            r_t_scaled: m.r_t_scaled,
                            shade_directions: m.shade_directions,
                            inner_defect: m.inner_defect,
                            outer_excess: m.outer_excess,
                            gap_over_tau: m.gap_over_tau,
                            status: &m.status,
                        })
                    })
                    .collect();
                sink.csv(name, &rows)?;
                for (k, t) in spec.probe.snapshot_radii.iter().enumerate() {
                    let v = if parts.shade {
                        probe_medians(&recs, k, |m| m.r_t_scaled)
                    } else {
                        probe_medians(&recs, k, |m| m.gap_over_tau)
                    };
                    let label = if parts.shade {
                        format!("t = {t}: median R_t / t^{}", spec.probe.shade_exponent)
                    } else {
                        format!("t = {t}: median gap / tau")
                    };
                    lines.push(median_line(&label, v));
                }
            }
        }
    }
    let manifest = sink.finish(spec, assumptions)?;
    lines.push(format!("content hash {}", manifest.content_hash));
    Ok(RunSummary {
        kind: spec.kind,
        kept,
        discarded,
        lines,
        validation_failed,
        manifest,
    })
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutcome {
    pub summary: RunSummary,
    pub identical: bool,
}

/// Re-runs the experiment recorded in a manifest and compares hashes.
pub fn replay(manifest_path: &Path, out_dir: &Path, workers: Option<usize>) -> Result<ReplayOutcome> {
    let old = read_manifest(manifest_path)?;
    let mut spec = old.spec.clone();
    spec.workers = workers;
    let summary = run_experiment(&spec, out_dir)?;
    let identical = summary.manifest.content_hash == old.content_hash && summary.manifest.artifacts == old.artifacts;
    Ok(ReplayOutcome { summary, identical })
}
