//! Observables on competition snapshots: shadows and shade radius, strong
//! density curves, sphere-trace diameters, shape fluctuation gaps and
//! power-law fits.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::competition::CompetitionTrace;
use crate::error::{Error, Result};
use crate::lattice::{sphere_cover, CylinderKind, CylinderSpec, Grid, LatticeBox, Norm, Site, StdNorm};

/// Occupation of every box site at one time: 0 free, 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub bx: LatticeBox,
    pub t: f64,
    grid: Grid,
    occ: Vec<u8>,
}

impl Snapshot {
    pub fn from_trace(trace: &CompetitionTrace, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("snapshot time {t}")));
        }
        Ok(Snapshot {
            bx: trace.config().bx,
            t,
            grid: trace.grid().clone(),
            occ: trace.occupancy_at(t),
        })
    }

    /// Final configuration of a trace.
    pub fn final_of(trace: &CompetitionTrace) -> Self {
        Snapshot {
            bx: trace.config().bx,
            t: f64::INFINITY,
            grid: trace.grid().clone(),
            occ: trace.occupancy_at(f64::INFINITY),
        }
    }

    pub fn from_sets(bx: &LatticeBox, eta1: &[Site], eta2: &[Site], t: f64) -> Result<Self> {
        let grid = bx.grid();
        let mut occ = vec![0u8; grid.len()];
        for (sp, set) in [(1u8, eta1), (2u8, eta2)] {
            for s in set {
                let i = grid.index(s).ok_or_else(|| Error::OutsideBox(s.0.clone()))?;
                if occ[i] != 0 {
                    return Err(Error::InvalidArgument(format!("{s:?} occupied twice")));
                }
                occ[i] = sp;
            }
        }
        Ok(Snapshot { bx: *bx, t, grid, occ })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occ
    }

    pub fn count(&self, species: u8) -> usize {
        self.occ.iter().filter(|&&o| o == species).count()
    }

    /// Some occupied site lies on the frame.
    pub fn frame_touching(&self) -> bool {
        let mut c = vec![0; self.grid.dim()];
        (0..self.grid.len()).any(|i| {
            self.occ[i] != 0 && {
                self.grid.coords_into(i, &mut c);
                self.grid.on_frame_coords(&c)
            }
        })
    }

    /// `∂η ∩ η²`: strong sites with an unoccupied neighbour.
    pub fn strong_boundary(&self) -> Vec<bool> {
        let mut out = vec![false; self.grid.len()];
        let mut c = vec![0; self.grid.dim()];
        for (i, o) in out.iter_mut().enumerate() {
            if self.occ[i] != 2 {
                continue;
            }
            self.grid.coords_into(i, &mut c);
            let mut free = false;
            self.grid.for_each_neighbor(i, &c, |j, _, _| free |= self.occ[j] == 0);
            *o = free;
        }
        out
    }
}

/// Grid indices of box sites inside `cyl`. In `d = 2` rows are clipped to
/// the analytic interval before the exact membership test.
pub fn cylinder_sites(grid: &Grid, cyl: &CylinderSpec) -> Vec<usize> {
    let mut out = Vec::new();
    let d = grid.dim();
    if d == 2 {
        let (u0, u1) = (cyl.direction[0], cyl.direction[1]);
        let (b0, b1) = (cyl.base[0], cyl.base[1]);
        let r = cyl.radius + 1.0;
        for j in grid.lo()[1]..=grid.hi()[1] {
            let dy = j as f64 - b1;
            let mut lo = grid.lo()[0] as f64;
            let mut hi = grid.hi()[0] as f64;
            // radial: |-(i-b0) u1 + dy u0| ≤ r
            if u1.abs() > 1e-12 {
                let c = b0 + dy * u0 / u1;
                let w = r / u1.abs();
                lo = lo.max(c - w);
                hi = hi.min(c + w);
            } else if (dy * u0).abs() > r {
                continue;
            }
            // axial: (i-b0) u0 + dy u1 ≥ -1
            if !matches!(cyl.kind, CylinderKind::BiInfinite) && u0.abs() > 1e-12 {
                let c = b0 - dy * u1 / u0;
                if u0 > 0.0 {
                    lo = lo.max(c - 1.0);
                } else {
                    hi = hi.min(c + 1.0);
                }
            }
            if let CylinderKind::Finite { height } = cyl.kind {
                if u0.abs() > 1e-12 {
                    let c = b0 + (height - dy * u1) / u0;
                    if u0 > 0.0 {
                        hi = hi.min(c + 1.0);
                    } else {
                        lo = lo.max(c - 1.0);
                    }
                }
            }
            if lo > hi {
                continue;
            }
            let i0 = (lo.floor() as i32).max(grid.lo()[0]);
            let i1 = (hi.ceil() as i32).min(grid.hi()[0]);
            for i in i0..=i1 {
                if cyl.contains_point(&[i as f64, j as f64]) {
                    out.push(grid.index_of(&[i, j]).expect("in grid"));
                }
            }
        }
        out.sort_unstable();
    } else {
        let mut c = vec![0; d];
        let mut y = vec![0.0; d];
        for idx in 0..grid.len() {
            grid.coords_into(idx, &mut c);
            for k in 0..d {
                y[k] = c[k] as f64;
            }
            if cyl.contains_point(&y) {
                out.push(idx);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowQuery {
    pub direction: Vec<f64>,
    pub t: f64,
    pub radius: f64,
}

/// Reusable state for many shadow queries on one snapshot.
pub struct ShadowContext<'a> {
    snap: &'a Snapshot,
    blocking: Vec<bool>,
}

impl<'a> ShadowContext<'a> {
    pub fn new(snap: &'a Snapshot) -> Self {
        ShadowContext {
            snap,
            blocking: snap.strong_boundary(),
        }
    }

    /// Blocking set overridden, e.g. to test monotonicity in it.
    pub fn with_blocking(snap: &'a Snapshot, blocking: Vec<bool>) -> Self {
        ShadowContext { snap, blocking }
    }

    /// Whether `∂η ∩ η²` separates `η¹` from the frame inside
    /// `Cyl_+(x̂, R) ∩ Box`.
    pub fn shadow(&self, direction: &[f64], radius: f64) -> Result<bool> {
        let snap = self.snap;
        let grid = &snap.grid;
        if direction.len() != grid.dim() {
            return Err(Error::Dimension {
                expected: grid.dim(),
                got: direction.len(),
            });
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument("shadow radius must be > 0".into()));
        }
        let cyl = CylinderSpec::half_infinite(direction.to_vec(), radius)?;
        let sites = cylinder_sites(grid, &cyl);
        let mut inside = vec![false; grid.len()];
        let mut has_weak = false;
        for &i in &sites {
            inside[i] = true;
            has_weak |= snap.occ[i] == 1;
        }
        let mut q = VecDeque::new();
        let mut seen = vec![false; grid.len()];
        let mut c = vec![0; grid.dim()];
        let mut frame_cells = 0;
        for &i in &sites {
            grid.coords_into(i, &mut c);
            if !grid.on_frame_coords(&c) {
                continue;
            }
            frame_cells += 1;
            if snap.occ[i] != 0 {
                return Err(Error::Unanswerable(format!(
                    "occupied frame site {:?} inside the cylinder",
                    grid.site(i)
                )));
            }
            seen[i] = true;
            q.push_back(i);
        }
        if frame_cells == 0 {
            return Err(Error::Unanswerable("cylinder misses the box frame".into()));
        }
        if !has_weak {
            return Ok(true);
        }
        while let Some(i) = q.pop_front() {
            if snap.occ[i] == 1 {
                return Ok(false);
            }
            if snap.occ[i] == 2 {
                // interior strong sites are only reachable through ∂η ∩ η²
                continue;
            }
            grid.coords_into(i, &mut c);
            grid.for_each_neighbor(i, &c, |j, _, _| {
                if inside[j] && !seen[j] && !self.blocking[j] {
                    seen[j] = true;
                    q.push_back(j);
                }
            });
        }
        Ok(true)
    }
}

pub fn shadow(snap: &Snapshot, q: &ShadowQuery) -> Result<bool> {
    ShadowContext::new(snap).shadow(&q.direction, q.radius)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadeReport {
    pub t: f64,
    pub r_t: f64,
    pub directions_tested: usize,
    pub witness_direction: Option<Vec<f64>>,
    /// Finest cover resolution used.
    pub cover_epsilon: f64,
    pub queries: usize,
}

fn check_r_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.is_empty() || r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("r_grid must be positive and increasing".into()));
    }
    Ok(())
}

fn shade_scan(
    snap: &Snapshot,
    r_grid: &[f64],
    eps_for: impl Fn(f64) -> f64,
) -> Result<ShadeReport> {
    check_r_grid(r_grid)?;
    let d = snap.grid.dim();
    let ctx = ShadowContext::new(snap);
    let mut report = ShadeReport {
        t: snap.t,
        r_t: 0.0,
        directions_tested: 0,
        witness_direction: None,
        cover_epsilon: f64::INFINITY,
        queries: 0,
    };
    for &r in r_grid.iter().rev() {
        let eps = eps_for(r);
        report.cover_epsilon = report.cover_epsilon.min(eps);
        let cover = sphere_cover(eps, &StdNorm::L2, d)?;
        report.directions_tested = report.directions_tested.max(cover.len());
        for dir in &cover.centers {
            report.queries += 1;
            if ctx.shadow(dir, r)? {
                report.r_t = r;
                report.witness_direction = Some(dir.clone());
                return Ok(report);
            }
        }
    }
    Ok(report)
}

/// `R_t`: the largest `r` in `r_grid` with `Shadow(x̂, t, r)` for some
/// direction of `sphere_cover(cover_epsilon)`; 0 if none.
pub fn shade_radius(snap: &Snapshot, cover_epsilon: f64, r_grid: &[f64]) -> Result<ShadeReport> {
    shade_scan(snap, r_grid, |_| cover_epsilon)
}

/// Default cover resolution `(R / (2 t_outer))²`.
pub fn default_shade_epsilon(radius: f64, t_outer: f64) -> f64 {
    (radius / (2.0 * t_outer)).powi(2)
}

/// Shade radius with a per-radius cover of angular resolution
/// `clamp(r / (2 t_outer), eps_min, 1)`, enough for a shadow of width `r`
/// at distance `t_outer` to contain a tested axis.
pub fn shade_radius_adaptive(snap: &Snapshot, t_outer: f64, r_grid: &[f64], eps_min: f64) -> Result<ShadeReport> {
    if !(t_outer > 0.0) || !(eps_min > 0.0) {
        return Err(Error::InvalidArgument("t_outer and eps_min must be > 0".into()));
    }
    shade_scan(snap, r_grid, |r| (r / (2.0 * t_outer)).clamp(eps_min, 1.0))
}

/// Largest Euclidean norm of an occupied site.
pub fn outer_radius(snap: &Snapshot) -> f64 {
    let mut c = vec![0; snap.grid.dim()];
    let mut best: f64 = 0.0;
    for i in 0..snap.grid.len() {
        if snap.occ[i] != 0 {
            snap.grid.coords_into(i, &mut c);
            best = best.max(c.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt());
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub radii: Vec<f64>,
    pub density: Vec<f64>,
    pub ball_sizes: Vec<usize>,
    pub strong_counts: Vec<usize>,
    /// Ball not inside the box.
    pub clipped: Vec<bool>,
    pub norm: String,
    /// The configuration was not final.
    pub incomplete: bool,
}

/// `ρ_k = |η² ∩ B(t_k)| / |B(t_k)|` for `B(t) = {y : ‖y‖ ≤ t}`.
pub fn density_curve(snap: &Snapshot, norm: &dyn Norm, t_grid: &[f64]) -> Result<DensityCurve> {
    if t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("t_grid must be non-negative and increasing".into()));
    }
    let grid = &snap.grid;
    let d = grid.dim();
    let mut all = Vec::with_capacity(grid.len());
    let mut strong = Vec::new();
    let mut c = vec![0; d];
    let mut y = vec![0.0; d];
    for i in 0..grid.len() {
        grid.coords_into(i, &mut c);
        for k in 0..d {
            y[k] = c[k] as f64;
        }
        let n = norm.eval(&y);
        all.push(n);
        if snap.occ[i] == 2 {
            strong.push(n);
        }
    }
    all.sort_by(f64::total_cmp);
    strong.sort_by(f64::total_cmp);
    let (a, _) = norm.linf_bounds(d);
    let inscribed = a * snap.bx.radius as f64;
    let mut curve = DensityCurve {
        radii: t_grid.to_vec(),
        density: vec![],
        ball_sizes: vec![],
        strong_counts: vec![],
        clipped: vec![],
        norm: norm.name(),
        incomplete: snap.t.is_finite(),
    };
    for &t in t_grid {
        let b = all.partition_point(|&v| v <= t);
        let s = strong.partition_point(|&v| v <= t);
        curve.ball_sizes.push(b);
        curve.strong_counts.push(s);
        curve.density.push(if b == 0 { 0.0 } else { s as f64 / b as f64 });
        curve.clipped.push(t > inscribed);
    }
    Ok(curve)
}

/// Density curve of a trace's final configuration.
pub fn density_curve_final(trace: &CompetitionTrace, norm: &dyn Norm, t_grid: &[f64]) -> Result<DensityCurve> {
    let mut curve = density_curve(&Snapshot::final_of(trace), norm, t_grid)?;
    curve.incomplete = !trace.outcome().counts_final;
    Ok(curve)
}

/// Euclidean diameter of the union of strong unit cells meeting the shell
/// `{x : |‖x‖ − t| ≤ w}`, `w` half the largest cell diagonal in the norm.
pub fn sphere_trace_diameter(snap: &Snapshot, norm: &dyn Norm, t: f64) -> Result<f64> {
    if snap.grid.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: snap.grid.dim(),
        });
    }
    let w = 0.5 * norm.eval(&[1.0, 1.0]).max(norm.eval(&[1.0, -1.0]));
    let mut cells: Vec<[i32; 2]> = Vec::new();
    let mut c = [0i32; 2];
    for i in 0..snap.grid.len() {
        if snap.occ[i] != 2 {
            continue;
        }
        snap.grid.coords_into(i, &mut c);
        if (norm.eval(&[c[0] as f64, c[1] as f64]) - t).abs() <= w {
            cells.push(c);
        }
    }
    if cells.is_empty() {
        return Ok(0.0);
    }
    let mut best: f64 = 0.0;
    for (k, a) in cells.iter().enumerate() {
        for b in &cells[k..] {
            let dx = (a[0] - b[0]).abs() as f64 + 1.0;
            let dy = (a[1] - b[1]).abs() as f64 + 1.0;
            best = best.max((dx * dx + dy * dy).sqrt());
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationGap {
    pub t: f64,
    /// `max (t − ‖x‖)⁺` over unclaimed `x`.
    pub inner_defect: f64,
    /// `max (‖x‖ − t)⁺` over claimed `x`.
    pub outer_excess: f64,
    pub norm: String,
}

impl FluctuationGap {
    pub fn worst(&self) -> f64 {
        self.inner_defect.max(self.outer_excess)
    }
}

/// Gaps between `η(t)` and the ball `{‖x‖ ≤ t}` of `norm`.
pub fn fluctuation_gap(snap: &Snapshot, norm: &dyn Norm) -> Result<FluctuationGap> {
    let t = snap.t;
    if !t.is_finite() {
        return Err(Error::InvalidArgument("fluctuation gap needs a finite time".into()));
    }
    if snap.frame_touching() {
        return Err(Error::Clipped("occupied set touches the frame".into()));
    }
    let d = snap.grid.dim();
    let (a, _) = norm.linf_bounds(d);
    if t > a * snap.bx.radius as f64 {
        return Err(Error::Clipped("ball of radius t leaves the box".into()));
    }
    let mut c = vec![0; d];
    let mut y = vec![0.0; d];
    let mut inner: f64 = 0.0;
    let mut outer: f64 = 0.0;
    for i in 0..snap.grid.len() {
        snap.grid.coords_into(i, &mut c);
        for k in 0..d {
            y[k] = c[k] as f64;
        }
        let n = norm.eval(&y);
        if snap.occ[i] == 0 {
            inner = inner.max(t - n);
        } else {
            outer = outer.max(n - t);
        }
    }
    Ok(FluctuationGap {
        t,
        inner_defect: inner,
        outer_excess: outer,
        norm: norm.name(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub used: usize,
    pub dropped_nonpositive: usize,
}

/// Least-squares slope of `log v` against `log t`. Non-positive values are
/// dropped and counted.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, v)| *t > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let dropped = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
        used: usable.len(),
        dropped_nonpositive: dropped,
    })
}

/// Fit over the unclipped points of a density curve.
pub fn fit_density(curve: &DensityCurve) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = curve
        .radii
        .iter()
        .zip(&curve.density)
        .zip(&curve.clipped)
        .filter(|(_, &c)| !c)
        .map(|((&t, &v), _)| (t, v))
        .collect();
    fit_exponent(&pts)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
