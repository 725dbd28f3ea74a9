//! Single-type first-passage percolation: ball growth, point-to-point travel
//! times, restricted cylinder crossings and empirical time constants.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lattice::{l2, sphere_cover, CylinderKind, CylinderSpec, Grid, LatticeBox, Norm, Site, StdNorm};
use crate::passage::{derive_seed, EdgeSeedField, EdgeTimes, PassageLaw, SeededTimes};

pub(crate) const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct QEntry {
    time: f64,
    acc: f64,
    site: u32,
    parent: u32,
}

impl PartialEq for QEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QEntry {}

impl PartialOrd for QEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QEntry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.site.cmp(&self.site))
            .then_with(|| other.parent.cmp(&self.parent))
    }
}

pub(crate) struct DijkstraOut {
    pub acc: Vec<f64>,
    pub parent: Vec<u32>,
    pub order: Vec<u32>,
}

/// Lazy-deletion Dijkstra on `grid` from `source`. Sites where `allowed`
/// is false are never entered. Stops once the popped time exceeds `t_max`
/// or every index in `targets` is finalised.
pub(crate) fn dijkstra<T: EdgeTimes + ?Sized>(
    grid: &Grid,
    source: usize,
    times: &T,
    allowed: Option<&dyn Fn(usize) -> bool>,
    t_max: Option<f64>,
    targets: &[usize],
) -> DijkstraOut {
    let n = grid.len();
    let div = times.divisor();
    let mut acc = vec![f64::INFINITY; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![NO_PARENT; n];
    let mut done = vec![false; n];
    let mut order = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut remaining = targets.len();
    let mut is_target = vec![false; if targets.is_empty() { 0 } else { n }];
    for &t in targets {
        is_target[t] = true;
    }
    let d = grid.dim();
    let mut c = vec![0i32; d];
    let mut lower = vec![0i32; d];
    best[source] = 0.0;
    heap.push(QEntry {
        time: 0.0,
        acc: 0.0,
        site: source as u32,
        parent: NO_PARENT,
    });
    while let Some(e) = heap.pop() {
        let y = e.site as usize;
        if done[y] {
            continue;
        }
        if let Some(tm) = t_max {
            if e.time > tm {
                break;
            }
        }
        done[y] = true;
        acc[y] = e.acc;
        parent[y] = e.parent;
        order.push(e.site);
        if !is_target.is_empty() && is_target[y] {
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        grid.coords_into(y, &mut c);
        grid.for_each_neighbor(y, &c, |z, axis, up| {
            if done[z] {
                return;
            }
            if let Some(f) = allowed {
                if !f(z) {
                    return;
                }
            }
            lower.copy_from_slice(&c);
            if !up {
                lower[axis] -= 1;
            }
            let a = e.acc + times.weight(&lower, axis);
            if a <= best[z] {
                best[z] = a;
                heap.push(QEntry {
                    time: a / div,
                    acc: a,
                    site: z as u32,
                    parent: y as u32,
                });
            }
        });
    }
    DijkstraOut { acc, parent, order }
}

/// Where a field's edge times came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldProvenance {
    pub seed: EdgeSeedField,
    pub law: PassageLaw,
    pub stream: u32,
}

/// Travel times from one source inside a box.
#[derive(Clone, Debug)]
pub struct FppField {
    source: Site,
    bx: LatticeBox,
    grid: Grid,
    acc: Vec<f64>,
    divisor: f64,
    parent: Vec<u32>,
    order: Vec<u32>,
    t_max: Option<f64>,
    boundary_clipped: bool,
    provenance: Option<FieldProvenance>,
}

impl FppField {
    pub fn source(&self) -> &Site {
        &self.source
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn provenance(&self) -> Option<&FieldProvenance> {
        self.provenance.as_ref()
    }

    pub fn t_max(&self) -> Option<f64> {
        self.t_max
    }

    /// Some finalised site lies on the box frame.
    pub fn boundary_clipped(&self) -> bool {
        self.boundary_clipped
    }

    /// Time of the site at grid index `idx` (`+∞` when unreached).
    #[inline]
    pub fn time_at(&self, idx: usize) -> f64 {
        self.acc[idx] / self.divisor
    }

    /// Accumulated weight at `idx`, the unit in which the shortest-path
    /// recurrence holds exactly.
    pub fn accumulated_at(&self, idx: usize) -> f64 {
        self.acc[idx]
    }

    pub fn divisor(&self) -> f64 {
        self.divisor
    }

    pub fn time_of(&self, x: &Site) -> Option<f64> {
        let idx = self.grid.index(x)?;
        let t = self.time_at(idx);
        t.is_finite().then_some(t)
    }

    pub fn parent_of(&self, x: &Site) -> Option<Site> {
        let idx = self.grid.index(x)?;
        let p = self.parent[idx];
        (p != NO_PARENT).then(|| self.grid.site(p as usize))
    }

    pub fn parent_index(&self, idx: usize) -> Option<usize> {
        let p = self.parent[idx];
        (p != NO_PARENT).then_some(p as usize)
    }

    /// Finalised sites in the order they were reached.
    pub fn finalized(&self) -> impl Iterator<Item = Site> + '_ {
        self.order.iter().map(|&i| self.grid.site(i as usize))
    }

    pub fn finalized_indices(&self) -> &[u32] {
        &self.order
    }

    pub fn reached_count(&self) -> usize {
        self.order.len()
    }

    /// `B^x(t)`: sites with travel time ≤ t.
    pub fn ball(&self, t: f64) -> Vec<Site> {
        let mut v: Vec<Site> = self
            .order
            .iter()
            .filter(|&&i| self.time_at(i as usize) <= t)
            .map(|&i| self.grid.site(i as usize))
            .collect();
        v.sort();
        v
    }
}

/// `T(source, y)`; `+∞` when `y` is unreached or outside the box.
pub fn travel_time(f: &FppField, y: &Site) -> f64 {
    f.time_of(y).unwrap_or(f64::INFINITY)
}

/// Grows the first-passage ball from `source` with edge times read from
/// stream 0 of `field`.
pub fn grow_ball(
    source: &Site,
    law: &PassageLaw,
    field: &EdgeSeedField,
    bx: &LatticeBox,
    t_max: Option<f64>,
) -> Result<FppField> {
    grow_ball_on_stream(source, law, field, 0, bx, t_max)
}

pub fn grow_ball_on_stream(
    source: &Site,
    law: &PassageLaw,
    field: &EdgeSeedField,
    stream: u32,
    bx: &LatticeBox,
    t_max: Option<f64>,
) -> Result<FppField> {
    law.validate()?;
    let times = SeededTimes::new(*field, *law, stream);
    let mut f = grow_ball_with(source, &times, bx, t_max)?;
    f.provenance = Some(FieldProvenance {
        seed: *field,
        law: *law,
        stream,
    });
    Ok(f)
}

/// Ball growth with an arbitrary edge-time source.
pub fn grow_ball_with<T: EdgeTimes + ?Sized>(
    source: &Site,
    times: &T,
    bx: &LatticeBox,
    t_max: Option<f64>,
) -> Result<FppField> {
    if source.dim() != bx.dim {
        return Err(Error::Dimension {
            expected: bx.dim,
            got: source.dim(),
        });
    }
    if !bx.contains(source) {
        return Err(Error::OutsideBox(source.0.clone()));
    }
    let grid = bx.grid();
    let s = grid.index(source).expect("inside");
    let out = dijkstra(&grid, s, times, None, t_max, &[]);
    let mut c = vec![0; bx.dim];
    let boundary_clipped = out.order.iter().any(|&i| {
        grid.coords_into(i as usize, &mut c);
        grid.on_frame_coords(&c)
    });
    Ok(FppField {
        source: source.clone(),
        bx: *bx,
        grid,
        acc: out.acc,
        divisor: times.divisor(),
        parent: out.parent,
        order: out.order,
        t_max,
        boundary_clipped,
        provenance: None,
    })
}

/// Integer points of a finite cylinder and their grid.
fn cylinder_region(c: &CylinderSpec) -> Result<(Grid, Vec<bool>)> {
    let CylinderKind::Finite { height } = c.kind else {
        return Err(Error::InvalidArgument("crossing needs a finite cylinder".into()));
    };
    let d = c.dim();
    let mut lo = vec![0; d];
    let mut hi = vec![0; d];
    for k in 0..d {
        let a = c.base[k];
        let b = c.base[k] + height * c.direction[k];
        lo[k] = (a.min(b) - c.radius).floor() as i32 - 1;
        hi[k] = (a.max(b) + c.radius).ceil() as i32 + 1;
    }
    let grid = Grid::new(lo, hi)?;
    let mut mask = vec![false; grid.len()];
    let mut coords = vec![0; d];
    let mut any = false;
    for (idx, m) in mask.iter_mut().enumerate() {
        grid.coords_into(idx, &mut coords);
        let y: Vec<f64> = coords.iter().map(|&v| v as f64).collect();
        if c.contains_point(&y) {
            *m = true;
            any = true;
        }
    }
    if !any {
        return Err(Error::EmptyCylinder);
    }
    Ok((grid, mask))
}

fn nearest_in(grid: &Grid, mask: &[bool], p: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    let mut c = vec![0; grid.dim()];
    for (idx, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        grid.coords_into(idx, &mut c);
        let d2: f64 = c.iter().zip(p).map(|(&a, b)| (a as f64 - b).powi(2)).sum();
        // strict: first in lexicographic order wins ties
        if d2 < best.0 {
            best = (d2, idx);
        }
    }
    best.1
}

/// Result of a restricted crossing.
#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub start: Site,
    pub end: Site,
    pub time: f64,
}

/// Minimal time to go from the integer point of `Cyl_z(x̂, r, h)` nearest to
/// `z` to the one nearest to `z + h·x̂`, using only edges inside the
/// cylinder. `+∞` if they are disconnected there.
pub fn cylinder_crossing_time(
    z: &[f64],
    direction: &[f64],
    h: f64,
    r: f64,
    law: &PassageLaw,
    field: &EdgeSeedField,
) -> Result<Crossing> {
    cylinder_crossing_time_with(z, direction, h, r, &SeededTimes::new(*field, *law, 0))
}

pub fn cylinder_crossing_time_with<T: EdgeTimes + ?Sized>(
    z: &[f64],
    direction: &[f64],
    h: f64,
    r: f64,
    times: &T,
) -> Result<Crossing> {
    let cyl = CylinderSpec::new(z.to_vec(), direction.to_vec(), r, CylinderKind::Finite { height: h })?;
    let (grid, mask) = cylinder_region(&cyl)?;
    let top: Vec<f64> = z.iter().zip(direction).map(|(a, b)| a + h * b).collect();
    let s0 = nearest_in(&grid, &mask, z);
    let sf = nearest_in(&grid, &mask, &top);
    let allowed = |i: usize| mask[i];
    let out = dijkstra(&grid, s0, times, Some(&allowed), None, &[sf]);
    Ok(Crossing {
        start: grid.site(s0),
        end: grid.site(sf),
        time: out.acc[sf] / times.divisor(),
    })
}

/// How replicas obtain their environments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPolicy {
    /// Replica `i` uses `derive_seed(base_seed, i)`.
    pub base_seed: u64,
    pub stream: u32,
    /// Extra box margin beyond the farthest target; default `max(8, n/4)`.
    #[serde(default)]
    pub margin: Option<i32>,
}

impl FieldPolicy {
    pub fn new(base_seed: u64) -> Self {
        FieldPolicy {
            base_seed,
            stream: 0,
            margin: None,
        }
    }

    pub fn replica_field(&self, i: usize) -> EdgeSeedField {
        EdgeSeedField::new(derive_seed(self.base_seed, i as u64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConstantEstimate {
    pub direction: Vec<f64>,
    pub mu_hat: f64,
    pub ci_halfwidth: f64,
    pub std_error: f64,
    /// `T(0, round(n x̂)) / n` at the largest rung, per kept replica.
    pub per_replica: Vec<f64>,
    /// Replica mean of `T/n` at every rung.
    pub ladder_means: Vec<f64>,
    pub discarded: usize,
}

pub fn lattice_target(direction: &[f64], n: f64) -> Site {
    Site(direction.iter().map(|v| (v * n).round() as i32).collect())
}

/// Passage times from the origin to `round(n·x̂)` for every rung `n`, in one
/// Dijkstra run.
pub fn ladder_times<T: EdgeTimes + ?Sized>(
    times: &T,
    direction: &[f64],
    ladder: &[f64],
    margin: Option<i32>,
) -> Result<Vec<f64>> {
    let d = direction.len();
    let targets: Vec<Site> = ladder.iter().map(|&n| lattice_target(direction, n)).collect();
    let reach = targets
        .iter()
        .flat_map(|s| s.0.iter().map(|c| c.abs()))
        .max()
        .unwrap_or(0);
    let n_max = ladder.iter().cloned().fold(0.0, f64::max);
    let margin = margin.unwrap_or_else(|| ((n_max / 4.0).ceil() as i32).max(8));
    let bx = LatticeBox::new(d, reach + margin)?;
    let grid = bx.grid();
    let idx: Vec<usize> = targets.iter().map(|s| grid.index(s).expect("in box")).collect();
    let origin = grid.index(&Site::origin(d)).expect("in box");
    let out = dijkstra(&grid, origin, times, None, None, &idx);
    Ok(idx.iter().map(|&i| out.acc[i] / times.divisor()).collect())
}

fn t_halfwidth(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let q = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("df > 0")
        .inverse_cdf(0.975);
    (mean, q * se, se)
}

fn check_ladder(ladder: &[f64], replicas: usize) -> Result<()> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] <= 0.0 {
        return Err(Error::InvalidArgument("ladder must be positive and increasing".into()));
    }
    if replicas < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicas".into()));
    }
    Ok(())
}

/// Time-constant estimate `μ̂(x̂)` from `replicas` independent environments.
pub fn estimate_time_constant(
    law: &PassageLaw,
    direction: &[f64],
    ladder: &[f64],
    replicas: usize,
    policy: &FieldPolicy,
) -> Result<TimeConstantEstimate> {
    check_ladder(ladder, replicas)?;
    law.validate()?;
    if (l2(direction) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("direction must be a unit vector".into()));
    }
    let runs: Vec<Result<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let times = SeededTimes::new(policy.replica_field(i), *law, policy.stream);
            ladder_times(&times, direction, ladder, policy.margin)
        })
        .collect();
    summarize(direction, ladder, runs)
}

fn summarize(direction: &[f64], ladder: &[f64], runs: Vec<Result<Vec<f64>>>) -> Result<TimeConstantEstimate> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut discarded = 0;
    for r in runs {
        let t = r?;
        if t.iter().all(|v| v.is_finite()) {
            kept.push(t);
        } else {
            discarded += 1;
        }
    }
    if kept.len() < 2 {
        return Err(Error::NoReplicas);
    }
    let ladder_means = ladder
        .iter()
        .enumerate()
        .map(|(j, &n)| kept.iter().map(|t| t[j] / n).sum::<f64>() / kept.len() as f64)
        .collect();
    let last = ladder.len() - 1;
    let per_replica: Vec<f64> = kept.iter().map(|t| t[last] / ladder[last]).collect();
    let (mu_hat, hw, se) = t_halfwidth(&per_replica);
    Ok(TimeConstantEstimate {
        direction: direction.to_vec(),
        mu_hat,
        ci_halfwidth: hw,
        std_error: se,
        per_replica,
        ladder_means,
        discarded,
    })
}

/// Empirical asymptotic shape: per-direction time constants over a sphere
/// cover. As a norm, `‖x‖ = ‖x‖₂ · μ̂(nearest covered direction)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub law: PassageLaw,
    pub epsilon_cover: f64,
    pub directions: Vec<Vec<f64>>,
    pub mu_hat: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub std_error: Vec<f64>,
    pub ladder: Vec<f64>,
    pub replicas: usize,
    pub base_seed: u64,
    pub stream: u32,
    #[serde(default)]
    pub per_replica: Vec<Vec<f64>>,
}

impl ShapeEstimate {
    pub fn dim(&self) -> usize {
        self.directions.first().map_or(0, |d| d.len())
    }

    pub fn nearest_direction(&self, x: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, d) in self.directions.iter().enumerate() {
            let s: f64 = d.iter().zip(x).map(|(a, b)| a * b).sum();
            if s > best.0 {
                best = (s, i);
            }
        }
        best.1
    }

    /// `x ∈ B̂(t)`.
    pub fn ball_contains(&self, x: &[f64], t: f64) -> bool {
        self.eval(x) <= t
    }

    pub fn min_mu(&self) -> f64 {
        self.mu_hat.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_mu(&self) -> f64 {
        self.mu_hat.iter().cloned().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Norm for ShapeEstimate {
    fn eval(&self, x: &[f64]) -> f64 {
        let r = l2(x);
        if r == 0.0 {
            return 0.0;
        }
        r * self.mu_hat[self.nearest_direction(x)]
    }

    fn linf_bounds(&self, d: usize) -> (f64, f64) {
        (self.min_mu(), self.max_mu() * (d as f64).sqrt())
    }

    fn name(&self) -> String {
        format!("shape[{}]", self.law)
    }
}

/// Shape estimate over the directions of `sphere_cover(epsilon_cover)`.
pub fn estimate_shape(
    law: &PassageLaw,
    d: usize,
    epsilon_cover: f64,
    ladder: &[f64],
    replicas: usize,
    policy: &FieldPolicy,
) -> Result<ShapeEstimate> {
    check_ladder(ladder, replicas)?;
    law.validate()?;
    let cover = sphere_cover(epsilon_cover, &StdNorm::L2, d)?;
    let jobs: Vec<(usize, usize)> = (0..cover.len())
        .flat_map(|k| (0..replicas).map(move |i| (k, i)))
        .collect();
    let results: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(k, i)| {
            let times = SeededTimes::new(policy.replica_field(i), *law, policy.stream);
            ladder_times(&times, &cover.centers[k], ladder, policy.margin)
        })
        .collect();
    let mut it = results.into_iter();
    let mut est = ShapeEstimate {
        law: *law,
        epsilon_cover,
        directions: cover.centers.clone(),
        mu_hat: vec![],
        ci_halfwidth: vec![],
        std_error: vec![],
        ladder: ladder.to_vec(),
        replicas,
        base_seed: policy.base_seed,
        stream: policy.stream,
        per_replica: vec![],
    };
    for dir in &cover.centers {
        let runs: Vec<Result<Vec<f64>>> = it.by_ref().take(replicas).collect();
        let tc = summarize(dir, ladder, runs)?;
        est.mu_hat.push(tc.mu_hat);
        est.ci_halfwidth.push(tc.ci_halfwidth);
        est.std_error.push(tc.std_error);
        est.per_replica.push(tc.per_replica);
    }
    Ok(est)
}
