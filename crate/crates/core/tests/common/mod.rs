//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use compgrowth::competition::{run_competition, CompetitionConfig};
use compgrowth::fpp::grow_ball;
use compgrowth::lattice::{Grid, LatticeBox, Site};
use compgrowth::passage::{EdgeSeedField, EdgeTimes, PassageLaw, SeededTimes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edge weights of a box materialised into an adjacency list.
pub struct Materialised {
    pub grid: Grid,
    pub adj: Vec<Vec<(usize, f64)>>,
    pub divisor: f64,
}

pub fn materialise(bx: &LatticeBox, times: &dyn EdgeTimes) -> Materialised {
    let grid = bx.grid();
    let n = grid.len();
    let d = grid.dim();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        let x = grid.site(i);
        for axis in 0..d {
            let y = x.offset(axis, 1);
            if let Some(j) = grid.index(&y) {
                let w = times.weight(x.coords(), axis);
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
    }
    Materialised {
        grid,
        adj,
        divisor: times.divisor(),
    }
}

/// Minimum over all self-avoiding paths of the left-to-right sum of weights.
pub fn path_enumeration(m: &Materialised, source: usize) -> Vec<f64> {
    fn walk(m: &Materialised, at: usize, acc: f64, seen: &mut Vec<bool>, best: &mut Vec<f64>) {
        if acc < best[at] {
            best[at] = acc;
        }
        for &(j, w) in &m.adj[at] {
            if !seen[j] {
                seen[j] = true;
                walk(m, j, acc + w, seen, best);
                seen[j] = false;
            }
        }
    }
    let n = m.grid.len();
    let mut best = vec![f64::INFINITY; n];
    let mut seen = vec![false; n];
    seen[source] = true;
    walk(m, source, 0.0, &mut seen, &mut best);
    best
}

/// Bellman–Ford relaxation to a fixed point.
pub fn bellman_ford(m: &Materialised, source: usize) -> Vec<f64> {
    let n = m.grid.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    loop {
        let mut changed = false;
        for i in 0..n {
            if dist[i].is_infinite() {
                continue;
            }
            for &(j, w) in &m.adj[i] {
                if dist[i] + w < dist[j] {
                    dist[j] = dist[i] + w;
                    changed = true;
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// Result of the step-by-step recursion: per site the claiming species
/// (0 if never) and its accumulated value.
pub struct RecursionResult {
    pub species: Vec<u8>,
    pub acc: Vec<f64>,
    pub steps: usize,
}

/// The infection-time recursion taken literally: each step scans every
/// edge from a claimed site to an unclaimed one, finds the smallest
/// candidate time and claims every site attaining it. Times are compared as
/// `acc / divisor`. When both species attain the minimum (only possible
/// without the no-ties assumption) species 2 claims first and the step is
/// recomputed, which is the engine's documented tie rule.
pub fn literal_recursion(m1: &Materialised, m2: &Materialised, s1: usize, s2: usize) -> RecursionResult {
    let n = m1.grid.len();
    let mut species = vec![0u8; n];
    let mut acc = vec![f64::INFINITY; n];
    species[s1] = 1;
    acc[s1] = 0.0;
    species[s2] = 2;
    acc[s2] = 0.0;
    let ms = [m1, m2];
    let mut steps = 0;
    loop {
        let mut t_next = [f64::INFINITY; 2];
        for y in 0..n {
            let sp = species[y];
            if sp == 0 {
                continue;
            }
            let m = ms[sp as usize - 1];
            for &(z, w) in &m.adj[y] {
                if species[z] == 0 {
                    let t = &mut t_next[sp as usize - 1];
                    *t = t.min((acc[y] + w) / m.divisor);
                }
            }
        }
        let t = t_next[0].min(t_next[1]);
        if t.is_infinite() {
            break;
        }
        let sp = if t_next[1] == t { 2u8 } else { 1u8 };
        steps += 1;
        let m = ms[sp as usize - 1];
        let mut claims: Vec<(usize, f64)> = Vec::new();
        for y in 0..n {
            if species[y] != sp {
                continue;
            }
            for &(z, w) in &m.adj[y] {
                let a = acc[y] + w;
                if species[z] == 0 && a / m.divisor == t && !claims.iter().any(|c| c.0 == z) {
                    claims.push((z, a));
                }
            }
        }
        for (z, a) in claims {
            species[z] = sp;
            acc[z] = a;
        }
    }
    RecursionResult { species, acc, steps }
}

/// Checks `grow_ball` against an oracle distance vector.
pub fn fpp_matches(bx: &LatticeBox, law: &PassageLaw, seed: u64, source: &Site, enumerate: bool) -> Result<(), String> {
    let field = EdgeSeedField::new(seed);
    let times = SeededTimes::new(field, *law, 0);
    let m = materialise(bx, &times);
    let s = m.grid.index(source).unwrap();
    let oracle = if enumerate {
        path_enumeration(&m, s)
    } else {
        bellman_ford(&m, s)
    };
    let f = grow_ball(source, law, &field, bx, None).map_err(|e| e.to_string())?;
    for i in 0..m.grid.len() {
        let got = f.accumulated_at(i);
        if got != oracle[i] {
            return Err(format!("{law} seed {seed} site {:?}: got {got}, oracle {}", m.grid.site(i), oracle[i]));
        }
        if f.time_at(i) != oracle[i] / m.divisor {
            return Err(format!("{law} seed {seed} site {:?}: time differs", m.grid.site(i)));
        }
    }
    Ok(())
}

/// Checks `run_competition` against the literal recursion.
pub fn competition_matches(cfg: &CompetitionConfig) -> Result<(), String> {
    let t1 = cfg.times(1);
    let t2 = cfg.times(2);
    let m1 = materialise(&cfg.bx, &t1);
    let m2 = materialise(&cfg.bx, &t2);
    let s1 = m1.grid.index(&cfg.s1).unwrap();
    let s2 = m1.grid.index(&cfg.s2).unwrap();
    let oracle = literal_recursion(&m1, &m2, s1, s2);
    let (trace, _) = run_competition(cfg).map_err(|e| e.to_string())?;
    for i in 0..m1.grid.len() {
        let sp = trace.species_at(i);
        if sp != oracle.species[i] {
            return Err(format!(
                "{} vs {} site {:?}: species {sp}, oracle {}",
                cfg.law1,
                cfg.law2,
                m1.grid.site(i),
                oracle.species[i]
            ));
        }
        if trace.accumulated_at(i) != oracle.acc[i] {
            return Err(format!(
                "{} vs {} site {:?}: acc {}, oracle {}",
                cfg.law1,
                cfg.law2,
                m1.grid.site(i),
                trace.accumulated_at(i),
                oracle.acc[i]
            ));
        }
    }
    Ok(())
}

/// Law pairs ordered slow-first.
pub fn oracle_law_pairs() -> Vec<(PassageLaw, PassageLaw)> {
    vec![
        (PassageLaw::exponential(1.0), PassageLaw::exponential(1.5)),
        (PassageLaw::exponential(1.0), PassageLaw::uniform(0.0, 1.0)),
        (PassageLaw::uniform(0.5, 2.0), PassageLaw::uniform(0.0, 1.0)),
        (PassageLaw::exponential(1.0), PassageLaw::exponential(1.0)),
        (
            PassageLaw::ZeroInflatedExponential {
                zero_mass: 0.3,
                rate: 1.0,
            },
            PassageLaw::ZeroInflatedExponential {
                zero_mass: 0.3,
                rate: 2.0,
            },
        ),
        (PassageLaw::deterministic(2.0), PassageLaw::deterministic(1.0)),
    ]
}

pub fn random_site(rng: &mut impl Rng, bx: &LatticeBox) -> Site {
    Site::new((0..bx.dim).map(|_| rng.random_range(-bx.radius..=bx.radius)).collect::<Vec<_>>())
}

pub fn random_sources(rng: &mut impl Rng, bx: &LatticeBox) -> (Site, Site) {
    let a = random_site(rng, bx);
    loop {
        let b = random_site(rng, bx);
        if b != a {
            return (a, b);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Boxes of the exhaustive oracle check: `(box, use path enumeration)`.
pub fn oracle_boxes() -> Vec<(LatticeBox, bool)> {
    vec![
        (LatticeBox::new(1, 2).unwrap(), true),
        (LatticeBox::new(2, 1).unwrap(), true),
        (LatticeBox::new(2, 2).unwrap(), false),
        (LatticeBox::new(3, 1).unwrap(), false),
    ]
}

/// Runs every oracle comparison over `seeds` seeds; returns the number of
/// comparisons and the first failure.
pub fn oracle_sweep(seeds: u64) -> (usize, Option<String>) {
    let mut checked = 0;
    let mut r = rng(0x0AC1E);
    for (bx, enumerate) in oracle_boxes() {
        for (l1, l2) in oracle_law_pairs() {
            for k in 0..seeds {
                let seed = r.random::<u64>();
                let (a, b) = random_sources(&mut r, &bx);
                for law in [l1, l2] {
                    if let Err(e) = fpp_matches(&bx, &law, seed, &a, enumerate) {
                        return (checked, Some(e));
                    }
                    checked += 1;
                }
                let mut cfg = CompetitionConfig::new(bx, a, b, l1, l2, seed);
                if k % 2 == 1 {
                    cfg.mode = compgrowth::passage::CouplingMode::Independent;
                }
                if let Err(e) = competition_matches(&cfg) {
                    return (checked, Some(e));
                }
                checked += 1;
            }
        }
    }
    (checked, None)
}
