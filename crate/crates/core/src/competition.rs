//! Two-species competition: event-driven construction of the claim
//! process, snapshots, escape outcomes and coupled multi-parameter runs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpp::FppField;
use crate::lattice::{Grid, LatticeBox, Site};
use crate::passage::{validate_assumptions, CouplingMode, EdgeSeedField, EdgeTimes, PassageLaw, SeededTimes};

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum StopRule {
    /// Run until the queue is empty.
    BoxExhausted,
    /// Process every event with time `≤ t`.
    TMax(f64),
    /// Stop at the first claim of a frame site by either species.
    FrameReached,
    /// Stop once both species have touched the frame or one is enclosed.
    OutcomeDetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitionConfig {
    pub bx: LatticeBox,
    pub s1: Site,
    pub s2: Site,
    /// Slow species.
    pub law1: PassageLaw,
    /// Fast species.
    pub law2: PassageLaw,
    pub mode: CouplingMode,
    pub field: EdgeSeedField,
    pub stop: StopRule,
    #[serde(default)]
    pub halt_on_extinction: ExtinctionHalt,
}

/// Stop once a species has no pending relaxations. Its final set is then
/// known, and the other species would fill the rest of the box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtinctionHalt {
    #[default]
    Never,
    Either,
    Species1,
    Species2,
}

impl ExtinctionHalt {
    fn watches(&self, species: u8) -> bool {
        match self {
            ExtinctionHalt::Never => false,
            ExtinctionHalt::Either => true,
            ExtinctionHalt::Species1 => species == 1,
            ExtinctionHalt::Species2 => species == 2,
        }
    }
}

impl CompetitionConfig {
    pub fn new(bx: LatticeBox, s1: Site, s2: Site, law1: PassageLaw, law2: PassageLaw, master_seed: u64) -> Self {
        CompetitionConfig {
            bx,
            s1,
            s2,
            law1,
            law2,
            mode: CouplingMode::SharedUniform,
            field: EdgeSeedField::new(master_seed),
            stop: StopRule::BoxExhausted,
            halt_on_extinction: ExtinctionHalt::Never,
        }
    }

    pub fn dim(&self) -> usize {
        self.bx.dim
    }

    pub fn validate(&self) -> Result<()> {
        for s in [&self.s1, &self.s2] {
            if s.dim() != self.bx.dim {
                return Err(Error::Dimension {
                    expected: self.bx.dim,
                    got: s.dim(),
                });
            }
            if !self.bx.contains(s) {
                return Err(Error::OutsideBox(s.0.clone()));
            }
        }
        if self.s1 == self.s2 {
            return Err(Error::InvalidArgument("sources must be distinct".into()));
        }
        self.law1.validate()?;
        self.law2.validate()?;
        if let StopRule::TMax(t) = self.stop {
            if !(t >= 0.0) {
                return Err(Error::InvalidArgument(format!("t_max = {t}")));
            }
        }
        Ok(())
    }

    pub fn law(&self, species: u8) -> &PassageLaw {
        if species == 1 {
            &self.law1
        } else {
            &self.law2
        }
    }

    pub fn times(&self, species: u8) -> SeededTimes {
        SeededTimes::new(self.field, *self.law(species), self.mode.stream(species))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Exhausted,
    TMax,
    FrameReached,
    OutcomeDetermined,
    Extinct(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthOutcome {
    pub g1_proxy: bool,
    pub g2_proxy: bool,
    pub coex_proxy: bool,
    /// `(|η¹(∞)|, |η²(∞)|)` within the box.
    pub final_counts: (usize, usize),
    /// False when the run stopped before the final counts were known.
    pub counts_final: bool,
    /// Some claimed site lies on the frame.
    pub boundary_clipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub site: Site,
    pub species: u8,
    pub parent: Option<Site>,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    acc: f64,
    species: u8,
    target: u32,
    parent: u32,
}

impl Pending {
    fn key(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| other.species.cmp(&self.species))
            .then_with(|| self.target.cmp(&other.target))
            .then_with(|| self.parent.cmp(&other.parent))
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key(self)
    }
}

/// Complete record of one competition run.
#[derive(Clone, Debug)]
pub struct CompetitionTrace {
    config: CompetitionConfig,
    grid: Grid,
    species: Vec<u8>,
    acc: Vec<f64>,
    parent: Vec<u32>,
    order: Vec<u32>,
    divisor: [f64; 2],
    tie_count: u64,
    reason: StopReason,
    stop_time: f64,
}

impl CompetitionTrace {
    pub fn config(&self) -> &CompetitionConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tie_count(&self) -> u64 {
        self.tie_count
    }

    pub fn stop_reason(&self) -> StopReason {
        self.reason
    }

    /// Time of the last processed event.
    pub fn stop_time(&self) -> f64 {
        self.stop_time
    }

    /// Whether every relaxation with value `v` was processed.
    pub fn covers(&self, v: f64) -> bool {
        match self.reason {
            StopReason::Exhausted => true,
            StopReason::TMax => match self.config.stop {
                StopRule::TMax(t) => v <= t,
                _ => unreachable!(),
            },
            _ => v < self.stop_time,
        }
    }

    #[inline]
    pub fn species_at(&self, idx: usize) -> u8 {
        self.species[idx]
    }

    #[inline]
    pub fn claim_at(&self, idx: usize) -> f64 {
        match self.species[idx] {
            0 => f64::INFINITY,
            s => self.acc[idx] / self.divisor[s as usize - 1],
        }
    }

    /// Accumulated weight of the claiming species at `idx`.
    pub fn accumulated_at(&self, idx: usize) -> f64 {
        self.acc[idx]
    }

    pub fn parent_index(&self, idx: usize) -> Option<usize> {
        let p = self.parent[idx];
        (p != NO_PARENT).then_some(p as usize)
    }

    pub fn species_of(&self, x: &Site) -> u8 {
        self.grid.index(x).map_or(0, |i| self.species[i])
    }

    pub fn claim_time(&self, x: &Site) -> f64 {
        self.grid.index(x).map_or(f64::INFINITY, |i| self.claim_at(i))
    }

    /// Claimed grid indices in claim order.
    pub fn claim_order(&self) -> &[u32] {
        &self.order
    }

    pub fn claimed_count(&self) -> usize {
        self.order.len()
    }

    /// Distinct event times in increasing order.
    pub fn event_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.order.iter().map(|&i| self.claim_at(i as usize)).collect();
        v.dedup();
        v
    }

    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        self.order.iter().map(move |&i| {
            let i = i as usize;
            Event {
                time: self.claim_at(i),
                site: self.grid.site(i),
                species: self.species[i],
                parent: self.parent_index(i).map(|p| self.grid.site(p)),
            }
        })
    }

    /// Per-index occupation at time `t`: 0 free, 1 or 2.
    pub fn occupancy_at(&self, t: f64) -> Vec<u8> {
        let mut occ = vec![0u8; self.grid.len()];
        for &i in &self.order {
            let i = i as usize;
            if self.claim_at(i) > t {
                break;
            }
            occ[i] = self.species[i];
        }
        occ
    }

    pub fn counts_at(&self, t: f64) -> (usize, usize) {
        let mut c = (0, 0);
        for &i in &self.order {
            let i = i as usize;
            if self.claim_at(i) > t {
                break;
            }
            if self.species[i] == 1 {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        c
    }

    pub fn outcome(&self) -> GrowthOutcome {
        let mut touched = [false; 2];
        let mut counts = [0usize; 2];
        let mut c = vec![0; self.grid.dim()];
        for &i in &self.order {
            let i = i as usize;
            let s = self.species[i] as usize - 1;
            counts[s] += 1;
            self.grid.coords_into(i, &mut c);
            if self.grid.on_frame_coords(&c) {
                touched[s] = true;
            }
        }
        let boundary_clipped = touched[0] || touched[1];
        let mut counts_final = self.reason == StopReason::Exhausted;
        if let StopReason::Extinct(e) = self.reason {
            // the survivor would claim every remaining site
            let other = 2 - e as usize;
            let claimed = counts[0] + counts[1];
            if claimed < self.grid.len() {
                let frame_free = (0..self.grid.len()).any(|i| {
                    self.species[i] == 0 && {
                        self.grid.coords_into(i, &mut c);
                        self.grid.on_frame_coords(&c)
                    }
                });
                touched[other] |= frame_free;
                counts[other] += self.grid.len() - claimed;
            }
            counts_final = true;
        }
        GrowthOutcome {
            g1_proxy: touched[0],
            g2_proxy: touched[1],
            coex_proxy: touched[0] && touched[1],
            final_counts: (counts[0], counts[1]),
            counts_final,
            boundary_clipped,
        }
    }

    /// Shifts one claim time by `delta` without touching anything else.
    /// Only meant for checking that certificate verification notices.
    pub fn perturb_claim(&mut self, x: &Site, delta: f64) -> Result<()> {
        let i = self.grid.index(x).ok_or_else(|| Error::OutsideBox(x.0.clone()))?;
        let s = self.species[i];
        if s == 0 {
            return Err(Error::InvalidArgument(format!("{x:?} is unclaimed")));
        }
        self.acc[i] += delta * self.divisor[s as usize - 1];
        Ok(())
    }

    /// JSON-lines export: one header line, then one line per event.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            format: &'static str,
            version: &'static str,
            config: &'a CompetitionConfig,
            tie_count: u64,
            stop_reason: StopReason,
        }
        serde_json::to_writer(
            &mut w,
            &Header {
                format: "compgrowth-trace",
                version: env!("CARGO_PKG_VERSION"),
                config: &self.config,
                tie_count: self.tie_count,
                stop_reason: self.reason,
            },
        )?;
        writeln!(w)?;
        for e in self.events() {
            serde_json::to_writer(&mut w, &e)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs the competition with edge times drawn from `cfg.field`.
pub fn run_competition(cfg: &CompetitionConfig) -> Result<(CompetitionTrace, GrowthOutcome)> {
    cfg.validate()?;
    let report = validate_assumptions(&cfg.law1, &cfg.law2, cfg.dim());
    if report.any_fail() {
        log::warn!("assumption check failed for {} vs {}: {:?}", cfg.law1, cfg.law2, report);
    }
    run_competition_with(cfg, &cfg.times(1), &cfg.times(2))
}

/// Runs the competition with explicit per-species edge times; `cfg.field`
/// and the laws are then only recorded.
pub fn run_competition_with<A: EdgeTimes + ?Sized, B: EdgeTimes + ?Sized>(
    cfg: &CompetitionConfig,
    times1: &A,
    times2: &B,
) -> Result<(CompetitionTrace, GrowthOutcome)> {
    cfg.validate()?;
    let grid = cfg.bx.grid();
    let n = grid.len();
    let d = grid.dim();
    let divisor = [times1.divisor(), times2.divisor()];
    let mut species = vec![0u8; n];
    let mut acc = vec![f64::INFINITY; n];
    let mut parent = vec![NO_PARENT; n];
    let mut best = [vec![f64::INFINITY; n], vec![f64::INFINITY; n]];
    let mut order = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut pending = [0usize; 2];
    let mut touched = [false; 2];
    let mut tie_count = 0u64;
    let mut reason = StopReason::Exhausted;
    let mut stop_time = 0.0;
    let mut c = vec![0i32; d];
    let mut lower = vec![0i32; d];

    // Sources are claimed up front (species 2 first, as at any tie) so that
    // nothing reaches them through zero-weight edges; their queue entries
    // only relax.
    for (sp, s) in [(2u8, &cfg.s2), (1u8, &cfg.s1)] {
        let i = grid.index(s).expect("validated");
        species[i] = sp;
        acc[i] = 0.0;
        order.push(i as u32);
        best[sp as usize - 1][i] = 0.0;
        pending[sp as usize - 1] += 1;
        heap.push(Pending {
            time: 0.0,
            acc: 0.0,
            species: sp,
            target: i as u32,
            parent: NO_PARENT,
        });
    }

    while let Some(e) = heap.pop() {
        if let StopRule::TMax(t) = cfg.stop {
            if e.time > t {
                reason = StopReason::TMax;
                break;
            }
        }
        let sp = e.species as usize - 1;
        pending[sp] -= 1;
        let y = e.target as usize;
        let is_source = e.parent == NO_PARENT;
        if species[y] != 0 && !is_source {
            if species[y] != e.species && acc[y] / divisor[species[y] as usize - 1] == e.time {
                tie_count += 1;
            }
            continue;
        }
        if !is_source {
            species[y] = e.species;
            acc[y] = e.acc;
            parent[y] = e.parent;
            order.push(e.target);
        }
        stop_time = e.time;

        grid.coords_into(y, &mut c);
        let on_frame = grid.on_frame_coords(&c);
        grid.for_each_neighbor(y, &c, |z, axis, up| {
            if species[z] != 0 {
                return;
            }
            lower.copy_from_slice(&c);
            if !up {
                lower[axis] -= 1;
            }
            let w = if sp == 0 {
                times1.weight(&lower, axis)
            } else {
                times2.weight(&lower, axis)
            };
            let a = e.acc + w;
            if a <= best[sp][z] {
                best[sp][z] = a;
                pending[sp] += 1;
                heap.push(Pending {
                    time: a / divisor[sp],
                    acc: a,
                    species: e.species,
                    target: z as u32,
                    parent: y as u32,
                });
            }
        });

        if on_frame {
            touched[sp] = true;
            if cfg.stop == StopRule::FrameReached {
                reason = StopReason::FrameReached;
                break;
            }
        }
        if cfg.stop == StopRule::OutcomeDetermined && touched[0] && touched[1] {
            reason = StopReason::OutcomeDetermined;
            break;
        }
        let halt = if cfg.stop == StopRule::OutcomeDetermined {
            ExtinctionHalt::Either
        } else {
            cfg.halt_on_extinction
        };
        if order.len() >= 2 && !heap.is_empty() {
            if let Some(sp) = [1u8, 2].into_iter().find(|&s| halt.watches(s) && pending[s as usize - 1] == 0) {
                reason = StopReason::Extinct(sp);
                break;
            }
        }
    }

    let trace = CompetitionTrace {
        config: cfg.clone(),
        grid,
        species,
        acc,
        parent,
        order,
        divisor,
        tie_count,
        reason,
        stop_time,
    };
    let outcome = trace.outcome();
    Ok((trace, outcome))
}

/// `(η¹(t), η²(t))`, each sorted.
pub fn snapshot(trace: &CompetitionTrace, t: f64) -> Result<(Vec<Site>, Vec<Site>)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("snapshot time {t}")));
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &i in trace.claim_order() {
        let i = i as usize;
        if trace.claim_at(i) > t {
            break;
        }
        let s = trace.grid().site(i);
        if trace.species_at(i) == 1 {
            a.push(s);
        } else {
            b.push(s);
        }
    }
    a.sort();
    b.sort();
    Ok((a, b))
}

/// Runs `(p,r)`, `(q,r)` and `(p,q)` on one shared field, where the laws
/// satisfy `p ≽ q ≽ r` (a later parameter is faster).
pub fn coupled_triple_run(
    p: &PassageLaw,
    q: &PassageLaw,
    r: &PassageLaw,
    base: &CompetitionConfig,
) -> Result<[CompetitionTrace; 3]> {
    if !p.dominates(q) || !q.dominates(r) {
        return Err(Error::NotOrdered(format!("{p} ≽ {q} ≽ {r} fails")));
    }
    let run = |a: &PassageLaw, b: &PassageLaw| -> Result<CompetitionTrace> {
        let mut cfg = base.clone();
        cfg.law1 = *a;
        cfg.law2 = *b;
        cfg.mode = CouplingMode::SharedUniform;
        Ok(run_competition(&cfg)?.0)
    };
    Ok([run(p, r)?, run(q, r)?, run(p, q)?])
}

/// A failed inclusion `η^{species}_small(t) ⊆ η^{species}_large(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InclusionViolation {
    pub species: u8,
    pub site: Site,
    pub time: f64,
}

/// Checks `η^{species}` of `small` is contained in that of `large` at every
/// time both traces cover.
pub fn species_inclusion(
    small: &CompetitionTrace,
    large: &CompetitionTrace,
    species: u8,
) -> Result<Option<InclusionViolation>> {
    if small.grid() != large.grid() {
        return Err(Error::Mismatch("traces live on different boxes".into()));
    }
    for &i in small.claim_order() {
        let i = i as usize;
        if small.species_at(i) != species {
            continue;
        }
        let t = small.claim_at(i);
        if !large.covers(t) {
            continue;
        }
        if large.species_at(i) != species || large.claim_at(i) > t {
            return Ok(Some(InclusionViolation {
                species,
                site: small.grid().site(i),
                time: t,
            }));
        }
    }
    Ok(None)
}

/// The four monotonicity inclusions of a triple `[(p,r), (q,r), (p,q)]`.
pub fn triple_inclusions(traces: &[CompetitionTrace; 3]) -> Result<Vec<InclusionViolation>> {
    let [pr, qr, pq] = traces;
    let checks = [
        species_inclusion(pq, pr, 2)?,
        species_inclusion(pr, pq, 1)?,
        species_inclusion(pr, qr, 1)?,
        species_inclusion(qr, pr, 2)?,
    ];
    Ok(checks.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingViolationKind {
    /// `x ∈ η¹(t)` but `x ∉ B₁(t)`.
    Species1OutsideBall,
    /// `x ∈ η²(t)` but `x ∉ B₂(t)`.
    Species2OutsideBall,
    /// `x ∈ B₁(t)` but `x ∉ η(t)`.
    BallNotOccupied,
    /// Claim time is not parent time plus the connecting edge.
    BrokenRecurrence,
    /// A neighbour relaxation would have claimed a site earlier.
    NotOptimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingViolation {
    pub kind: CouplingViolationKind,
    pub site: Site,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub sites_checked: usize,
    pub violation: Option<CouplingViolation>,
}

impl CouplingReport {
    pub fn pass(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks a trace's recurrence and optimality certificates.
pub fn verify_certificates(trace: &CompetitionTrace) -> Option<CouplingViolation> {
    let cfg = trace.config();
    let t = [cfg.times(1), cfg.times(2)];
    verify_certificates_with(trace, &t[0], &t[1])
}

pub fn verify_certificates_with<A: EdgeTimes + ?Sized, B: EdgeTimes + ?Sized>(
    trace: &CompetitionTrace,
    times1: &A,
    times2: &B,
) -> Option<CouplingViolation> {
    let grid = trace.grid();
    let d = grid.dim();
    let mut c = vec![0; d];
    let mut lower = vec![0; d];
    let weight = |sp: u8, lower: &[i32], axis: usize| {
        if sp == 1 {
            times1.weight(lower, axis)
        } else {
            times2.weight(lower, axis)
        }
    };
    let div = |sp: u8| if sp == 1 { times1.divisor() } else { times2.divisor() };
    let cfg = trace.config();
    let sources = [grid.index(&cfg.s1), grid.index(&cfg.s2)];
    let mut violation = None;
    for &y in trace.claim_order() {
        let y = y as usize;
        let sp = trace.species_at(y);
        grid.coords_into(y, &mut c);
        let fail = |kind| CouplingViolation {
            kind,
            site: grid.site(y),
            time: trace.claim_at(y),
        };
        match trace.parent_index(y) {
            None => {
                if sources[sp as usize - 1] != Some(y) || trace.accumulated_at(y) != 0.0 {
                    return Some(fail(CouplingViolationKind::BrokenRecurrence));
                }
            }
            Some(p) => {
                let mut pc = vec![0; d];
                grid.coords_into(p, &mut pc);
                let axis = (0..d).find(|&k| pc[k] != c[k]).expect("distinct");
                let lw: &[i32] = if pc[axis] < c[axis] { &pc } else { &c };
                let expect = trace.accumulated_at(p) + weight(sp, lw, axis);
                if trace.species_at(p) != sp || expect != trace.accumulated_at(y) {
                    return Some(fail(CouplingViolationKind::BrokenRecurrence));
                }
            }
        }
        grid.for_each_neighbor(y, &c, |z, axis, up| {
            if violation.is_some() {
                return;
            }
            lower.copy_from_slice(&c);
            if !up {
                lower[axis] -= 1;
            }
            let v = (trace.accumulated_at(y) + weight(sp, &lower, axis)) / div(sp);
            if trace.covers(v) && trace.claim_at(z) > v {
                violation = Some(CouplingViolation {
                    kind: CouplingViolationKind::NotOptimal,
                    site: grid.site(z),
                    time: v,
                });
            }
        });
        if violation.is_some() {
            return violation;
        }
    }
    None
}

/// Verifies `η¹(t) ⊆ B₁(t)`, `η²(t) ⊆ B₂(t)` and `B₁(t) ⊆ η(t)` at every
/// time the trace covers, plus the trace's own certificates.
pub fn coupling_check(trace: &CompetitionTrace, fpp1: &FppField, fpp2: &FppField) -> Result<CouplingReport> {
    let cfg = trace.config();
    for (f, sp, src) in [(fpp1, 1u8, &cfg.s1), (fpp2, 2u8, &cfg.s2)] {
        let prov = f
            .provenance()
            .ok_or_else(|| Error::Mismatch("field without seed provenance".into()))?;
        if prov.seed != cfg.field
            || !prov.law.same_law(cfg.law(sp))
            || prov.stream != cfg.mode.stream(sp)
            || f.lattice_box() != &cfg.bx
            || f.source() != src
        {
            return Err(Error::Mismatch(format!("species {sp} field does not match the trace")));
        }
        if f.t_max().is_some() {
            return Err(Error::Mismatch("fields must be grown to exhaustion".into()));
        }
    }
    if let Some(v) = verify_certificates(trace) {
        return Ok(CouplingReport {
            sites_checked: 0,
            violation: Some(v),
        });
    }
    let grid = trace.grid();
    let mut checked = 0;
    for idx in 0..grid.len() {
        let sp = trace.species_at(idx);
        let claim = trace.claim_at(idx);
        let t1 = fpp1.time_at(idx);
        let fail = |kind, time| {
            Ok(CouplingReport {
                sites_checked: checked,
                violation: Some(CouplingViolation {
                    kind,
                    site: grid.site(idx),
                    time,
                }),
            })
        };
        if sp == 1 && t1 > claim {
            return fail(CouplingViolationKind::Species1OutsideBall, claim);
        }
        if sp == 2 && fpp2.time_at(idx) > claim {
            return fail(CouplingViolationKind::Species2OutsideBall, claim);
        }
        if trace.covers(t1) && claim > t1 {
            return fail(CouplingViolationKind::BallNotOccupied, t1);
        }
        checked += 1;
    }
    Ok(CouplingReport {
        sites_checked: checked,
        violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passage::Mirror;

    fn d1_config(stop: StopRule) -> CompetitionConfig {
        let mut cfg = CompetitionConfig::new(
            LatticeBox::new(1, 2).unwrap(),
            Site::from([-1]),
            Site::from([1]),
            PassageLaw::deterministic(1.0),
            PassageLaw::deterministic(0.6),
            0,
        );
        cfg.stop = stop;
        cfg
    }

    #[test]
    fn one_dimensional_deterministic_example() {
        for mode in [CouplingMode::SharedUniform, CouplingMode::Independent] {
            let mut cfg = d1_config(StopRule::BoxExhausted);
            cfg.mode = mode;
            let (tr, out) = run_competition(&cfg).unwrap();
            let (a, b) = snapshot(&tr, f64::INFINITY).unwrap();
            assert_eq!(a, vec![Site::from([-2]), Site::from([-1])]);
            assert_eq!(b, vec![Site::from([0]), Site::from([1]), Site::from([2])]);
            assert_eq!(tr.claim_time(&Site::from([0])), 0.6);
            assert_eq!(tr.species_of(&Site::from([0])), 2);
            assert_eq!(out.final_counts, (2, 3));
            assert!(out.coex_proxy);
            assert_eq!(tr.tie_count(), 0);
        }
    }

    #[test]
    fn zero_horizon_keeps_only_sources() {
        let (tr, _) = run_competition(&d1_config(StopRule::TMax(0.0))).unwrap();
        assert_eq!(
            snapshot(&tr, 0.0).unwrap(),
            (vec![Site::from([-1])], vec![Site::from([1])])
        );
        assert_eq!(tr.claimed_count(), 2);
    }

    #[test]
    fn snapshots_are_piecewise_constant() {
        let (tr, _) = run_competition(&d1_config(StopRule::BoxExhausted)).unwrap();
        assert_eq!(snapshot(&tr, 0.3).unwrap(), snapshot(&tr, 0.0).unwrap());
        assert_eq!(snapshot(&tr, 0.6).unwrap().1.len(), 3);
        assert_eq!(snapshot(&tr, 0.59).unwrap().1.len(), 1);
        assert!(snapshot(&tr, -1.0).is_err());
    }

    #[test]
    fn deterministic_tie_goes_to_species_two() {
        let mut cfg = d1_config(StopRule::BoxExhausted);
        cfg.law2 = PassageLaw::deterministic(1.0);
        let (tr, _) = run_competition(&cfg).unwrap();
        assert_eq!(tr.species_of(&Site::from([0])), 2);
        assert_eq!(tr.tie_count(), 1);
    }

    #[test]
    fn zero_weight_edges_never_take_a_source() {
        let mut cfg = d1_config(StopRule::BoxExhausted);
        cfg.s1 = Site::from([0]);
        let zero = crate::passage::TableTimes::new(0.0);
        let (tr, o) = run_competition_with(&cfg, &zero, &zero).unwrap();
        assert_eq!(tr.species_of(&Site::from([0])), 1);
        assert_eq!(tr.species_of(&Site::from([1])), 2);
        assert_eq!(o.final_counts, (3, 2));
        let mut cfg = d1_config(StopRule::FrameReached);
        cfg.s2 = Site::from([2]);
        let (tr, _) = run_competition_with(&cfg, &zero, &zero).unwrap();
        assert_eq!(tr.species_of(&cfg.s1), 1);
        assert_eq!(tr.claim_time(&cfg.s1), 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = d1_config(StopRule::BoxExhausted);
        cfg.s2 = cfg.s1.clone();
        assert!(run_competition(&cfg).is_err());
        let mut cfg = d1_config(StopRule::BoxExhausted);
        cfg.s2 = Site::from([5]);
        assert!(matches!(run_competition(&cfg), Err(Error::OutsideBox(_))));
    }

    /// Edges touching column `x = wall` become effectively impassable, so
    /// the rest of the box is symmetric about `x = 1/2`.
    struct Walled {
        inner: SeededTimes,
        wall: i32,
    }

    impl EdgeTimes for Walled {
        fn weight(&self, lower: &[i32], axis: usize) -> f64 {
            if lower[0] == self.wall {
                1e12
            } else {
                self.inner.weight(lower, axis)
            }
        }

        fn divisor(&self) -> f64 {
            self.inner.divisor()
        }
    }

    #[test]
    fn mirrored_field_gives_symmetric_occupation() {
        let law = PassageLaw::exponential(1.0);
        let mut cfg = CompetitionConfig::new(
            LatticeBox::new(2, 12).unwrap(),
            Site::from([0, 0]),
            Site::from([1, 0]),
            law,
            law,
            0,
        );
        for seed in 0..5 {
            cfg.field = EdgeSeedField::mirrored(seed, Mirror { axis: 0, center: 1 });
            let t = Walled {
                inner: cfg.times(1),
                wall: -12,
            };
            let (tr, _) = run_competition_with(&cfg, &t, &t).unwrap();
            assert_eq!(tr.tie_count(), 0);
            for x in -11..=12 {
                for y in -12..=12 {
                    let a = tr.species_of(&Site::from([x, y]));
                    let b = tr.species_of(&Site::from([1 - x, y]));
                    assert_eq!(a + b, 3, "seed {seed} at ({x},{y})");
                }
            }
        }
    }

    fn small_2d(seed: u64) -> CompetitionConfig {
        CompetitionConfig::new(
            LatticeBox::new(2, 15).unwrap(),
            Site::from([0, 0]),
            Site::from([1, 0]),
            PassageLaw::exponential(1.0),
            PassageLaw::exponential(1.4),
            seed,
        )
    }

    #[test]
    fn coupling_check_passes_and_detects_perturbation() {
        let cfg = small_2d(4);
        let (mut tr, _) = run_competition(&cfg).unwrap();
        let f1 = crate::fpp::grow_ball_on_stream(&cfg.s1, &cfg.law1, &cfg.field, 0, &cfg.bx, None).unwrap();
        let f2 = crate::fpp::grow_ball_on_stream(&cfg.s2, &cfg.law2, &cfg.field, 0, &cfg.bx, None).unwrap();
        assert!(coupling_check(&tr, &f1, &f2).unwrap().pass());
        let victim = tr
            .claim_order()
            .iter()
            .map(|&i| i as usize)
            .find(|&i| tr.species_at(i) == 1 && tr.parent_index(i).is_some())
            .unwrap();
        let site = tr.grid().site(victim);
        tr.perturb_claim(&site, 1e-6).unwrap();
        assert!(!coupling_check(&tr, &f1, &f2).unwrap().pass());
        let other = crate::fpp::grow_ball_on_stream(&cfg.s1, &cfg.law1, &EdgeSeedField::new(5), 0, &cfg.bx, None).unwrap();
        assert!(coupling_check(&tr, &other, &f2).is_err());
    }

    #[test]
    fn triple_run_inclusions_hold_and_degenerate_pair_is_identical() {
        let base = small_2d(11);
        let rates = [1.0, 1.2, 1.5].map(PassageLaw::exponential);
        let tr = coupled_triple_run(&rates[0], &rates[1], &rates[2], &base).unwrap();
        assert!(triple_inclusions(&tr).unwrap().is_empty());
        let same = coupled_triple_run(&rates[0], &rates[0], &rates[2], &base).unwrap();
        assert_eq!(same[0].claim_order(), same[1].claim_order());
        assert!(coupled_triple_run(&rates[2], &rates[1], &rates[0], &base).is_err());
    }

    #[test]
    fn extinction_halt_projects_final_counts() {
        for seed in 0..20 {
            let mut cfg = small_2d(seed);
            cfg.law2 = PassageLaw::exponential(3.0);
            let (_, full) = run_competition(&cfg).unwrap();
            cfg.halt_on_extinction = ExtinctionHalt::Either;
            let (_, fast) = run_competition(&cfg).unwrap();
            assert_eq!(full.g1_proxy, fast.g1_proxy);
            assert_eq!(full.g2_proxy, fast.g2_proxy);
            assert_eq!(full.final_counts, fast.final_counts);
            cfg.halt_on_extinction = ExtinctionHalt::Never;
            cfg.stop = StopRule::OutcomeDetermined;
            let (_, od) = run_competition(&cfg).unwrap();
            assert_eq!(full.coex_proxy, od.coex_proxy);
        }
    }

    #[test]
    fn jsonl_export_is_stable() {
        let (tr, _) = run_competition(&d1_config(StopRule::BoxExhausted)).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        tr.write_jsonl(&mut a).unwrap();
        run_competition(&d1_config(StopRule::BoxExhausted))
            .unwrap()
            .0
            .write_jsonl(&mut b)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 6);
    }
}
