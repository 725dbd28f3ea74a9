//! Planar duality on `Z²`: Peierls contours, outer contours, the external
//! boundary of a snapshot and `*`-connectivity.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::competition::CompetitionTrace;
use crate::error::{Error, Result};
use crate::lattice::{Edge, Grid, LatticeBox, Site};

/// The dual point `(x + 1/2, y + 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DualVertex {
    pub x: i32,
    pub y: i32,
}

impl DualVertex {
    pub fn new(x: i32, y: i32) -> Self {
        DualVertex { x, y }
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.x as f64 + 0.5, self.y as f64 + 0.5]
    }

    fn step(&self, axis: u8) -> DualVertex {
        if axis == 0 {
            DualVertex::new(self.x + 1, self.y)
        } else {
            DualVertex::new(self.x, self.y + 1)
        }
    }
}

/// Unit dual edge from `lower` to `lower + e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DualEdge {
    pub lower: DualVertex,
    pub axis: u8,
}

impl DualEdge {
    pub fn new(lower: DualVertex, axis: u8) -> Result<Self> {
        if axis > 1 {
            return Err(Error::InvalidArgument(format!("dual axis {axis}")));
        }
        Ok(DualEdge { lower, axis })
    }

    pub fn endpoints(&self) -> (DualVertex, DualVertex) {
        (self.lower, self.lower.step(self.axis))
    }

    /// `s(e)`: the primal pair forming a square with this edge.
    pub fn crossing(&self) -> Edge {
        let DualVertex { x, y } = self.lower;
        let (a, b) = if self.axis == 0 {
            ([x + 1, y], [x + 1, y + 1])
        } else {
            ([x, y + 1], [x + 1, y + 1])
        };
        Edge::new(Site::from(a), Site::from(b)).expect("adjacent")
    }

    /// `s` applied to a primal edge.
    pub fn from_primal(e: &Edge) -> Result<DualEdge> {
        if e.a().dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: e.a().dim(),
            });
        }
        let c = e.a().coords();
        Ok(if e.axis() == 0 {
            DualEdge {
                lower: DualVertex::new(c[0], c[1] - 1),
                axis: 1,
            }
        } else {
            DualEdge {
                lower: DualVertex::new(c[0] - 1, c[1]),
                axis: 0,
            }
        })
    }
}

fn dual_between(a: [i32; 2], b: [i32; 2]) -> DualEdge {
    let e = Edge::new(Site::from(a), Site::from(b)).expect("adjacent");
    DualEdge::from_primal(&e).expect("2d")
}

const DIRS4: [[i32; 2]; 4] = [[1, 0], [0, 1], [-1, 0], [0, -1]];

fn add(a: [i32; 2], d: [i32; 2]) -> [i32; 2] {
    [a[0] + d[0], a[1] + d[1]]
}

fn as_pair(s: &Site) -> Result<[i32; 2]> {
    match s.coords() {
        &[x, y] => Ok([x, y]),
        c => Err(Error::Dimension {
            expected: 2,
            got: c.len(),
        }),
    }
}

fn pairs(a: &[Site]) -> Result<Vec<[i32; 2]>> {
    a.iter().map(as_pair).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    /// Sorted dual edges.
    pub edges: Vec<DualEdge>,
    /// Connected with every vertex of degree 2.
    pub is_cycle: bool,
    /// Vertices in traversal order when `is_cycle`.
    #[serde(default)]
    pub cycle: Vec<DualVertex>,
}

impl ContourSet {
    fn from_edges(edges: BTreeSet<DualEdge>) -> Self {
        let edges: Vec<DualEdge> = edges.into_iter().collect();
        let mut adj: BTreeMap<DualVertex, Vec<DualVertex>> = BTreeMap::new();
        for e in &edges {
            let (a, b) = e.endpoints();
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        let mut cycle = Vec::new();
        let mut is_cycle = !edges.is_empty() && adj.values().all(|v| v.len() == 2);
        if is_cycle {
            let start = *adj.keys().next().expect("nonempty");
            let mut prev = start;
            let mut cur = adj[&start][0];
            cycle.push(start);
            while cur != start {
                cycle.push(cur);
                let n = &adj[&cur];
                let next = if n[0] == prev { n[1] } else { n[0] };
                prev = cur;
                cur = next;
            }
            is_cycle = cycle.len() == adj.len();
            if !is_cycle {
                cycle.clear();
            }
        }
        ContourSet { edges, is_cycle, cycle }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Ordered vertex list with half-integer coordinates.
    pub fn to_json(&self) -> Result<String> {
        let pts: Vec<[f64; 2]> = self.cycle.iter().map(DualVertex::coords).collect();
        Ok(serde_json::to_string(&pts)?)
    }
}

/// Dual edges across which the indicator of `a` changes.
pub fn peierls_contours(a: &[Site]) -> Result<ContourSet> {
    let pts = pairs(a)?;
    let set: HashSet<[i32; 2]> = pts.iter().copied().collect();
    let mut edges = BTreeSet::new();
    for &p in &set {
        for d in DIRS4 {
            let n = add(p, d);
            if !set.contains(&n) {
                edges.insert(dual_between(p, n));
            }
        }
    }
    Ok(ContourSet::from_edges(edges))
}

fn is_connected4(set: &HashSet<[i32; 2]>) -> bool {
    let Some(&start) = set.iter().min() else {
        return true;
    };
    let mut seen = HashSet::from([start]);
    let mut q = VecDeque::from([start]);
    while let Some(p) = q.pop_front() {
        for d in DIRS4 {
            let n = add(p, d);
            if set.contains(&n) && seen.insert(n) {
                q.push_back(n);
            }
        }
    }
    seen.len() == set.len()
}

/// `Γ(A)`: the contour separating a connected `A` from the unbounded
/// component of its complement.
pub fn outer_contour(a: &[Site]) -> Result<ContourSet> {
    let pts = pairs(a)?;
    if pts.is_empty() {
        return Err(Error::InvalidArgument("empty set has no contour".into()));
    }
    let set: HashSet<[i32; 2]> = pts.iter().copied().collect();
    if !is_connected4(&set) {
        return Err(Error::Disconnected);
    }
    let lo = [0, 1].map(|k| pts.iter().map(|p| p[k]).min().unwrap() - 1);
    let hi = [0, 1].map(|k| pts.iter().map(|p| p[k]).max().unwrap() + 1);
    let grid = Grid::new(lo.to_vec(), hi.to_vec())?;
    let mut occ = vec![0u8; grid.len()];
    for p in &pts {
        occ[grid.index_of(p).expect("in bbox")] = 1;
    }
    let ext = exterior_mask(&grid, &occ);
    let mut edges = BTreeSet::new();
    for &p in &set {
        for d in DIRS4 {
            let n = add(p, d);
            if ext[grid.index_of(&n).expect("in bbox")] {
                edges.insert(dual_between(p, n));
            }
        }
    }
    Ok(ContourSet::from_edges(edges))
}

/// Unoccupied sites 4-connected to the frame through unoccupied sites.
pub fn exterior_mask(grid: &Grid, occ: &[u8]) -> Vec<bool> {
    let mut ext = vec![false; grid.len()];
    let mut q = VecDeque::new();
    let mut c = vec![0; grid.dim()];
    for i in 0..grid.len() {
        grid.coords_into(i, &mut c);
        if occ[i] == 0 && grid.on_frame_coords(&c) {
            ext[i] = true;
            q.push_back(i);
        }
    }
    while let Some(i) = q.pop_front() {
        grid.coords_into(i, &mut c);
        grid.for_each_neighbor(i, &c, |j, _, _| {
            if occ[j] == 0 && !ext[j] {
                ext[j] = true;
                q.push_back(j);
            }
        });
    }
    ext
}

/// Occupied sites with a neighbour in the exterior mask.
pub fn external_boundary_mask(grid: &Grid, occ: &[u8], ext: &[bool]) -> Vec<bool> {
    let mut out = vec![false; grid.len()];
    let mut c = vec![0; grid.dim()];
    for i in 0..grid.len() {
        if occ[i] == 0 {
            continue;
        }
        grid.coords_into(i, &mut c);
        let mut hit = false;
        grid.for_each_neighbor(i, &c, |j, _, _| hit |= ext[j]);
        out[i] = hit;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDecomposition {
    /// Complement component touching the frame.
    pub c_ext: Vec<Site>,
    /// `∂_ext η`.
    pub d_ext: Vec<Site>,
    /// `η² ∩ ∂_ext η`.
    pub d_ext_strong: Vec<Site>,
    /// The occupied set fills the box.
    pub saturated: bool,
    /// Some occupied site lies on the frame.
    pub frame_touching: bool,
}

pub fn external_boundary(occupied: &[Site], strong: &[Site], bx: &LatticeBox) -> Result<BoundaryDecomposition> {
    if bx.dim != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: bx.dim,
        });
    }
    let grid = bx.grid();
    let mut occ = vec![0u8; grid.len()];
    for s in occupied {
        let i = grid.index(s).ok_or_else(|| Error::OutsideBox(s.0.clone()))?;
        occ[i] = 1;
    }
    for s in strong {
        let i = grid.index(s).ok_or_else(|| Error::OutsideBox(s.0.clone()))?;
        if occ[i] == 0 {
            return Err(Error::InvalidArgument(format!("strong site {s:?} is not occupied")));
        }
        occ[i] = 2;
    }
    Ok(decompose(&grid, &occ))
}

fn decompose(grid: &Grid, occ: &[u8]) -> BoundaryDecomposition {
    let ext = exterior_mask(grid, occ);
    let dext = external_boundary_mask(grid, occ, &ext);
    let mut c = vec![0; grid.dim()];
    let frame_touching = (0..grid.len()).any(|i| {
        occ[i] != 0 && {
            grid.coords_into(i, &mut c);
            grid.on_frame_coords(&c)
        }
    });
    let pick = |f: &dyn Fn(usize) -> bool| (0..grid.len()).filter(|&i| f(i)).map(|i| grid.site(i)).collect();
    BoundaryDecomposition {
        c_ext: pick(&|i| ext[i]),
        d_ext: pick(&|i| dext[i]),
        d_ext_strong: pick(&|i| dext[i] && occ[i] == 2),
        saturated: occ.iter().all(|&o| o != 0),
        frame_touching,
    }
}

/// Maximal 8-connected components, each sorted, ordered by least element.
pub fn star_components(s: &[Site]) -> Result<Vec<Vec<Site>>> {
    let mut pts = pairs(s)?;
    pts.sort();
    pts.dedup();
    let set: HashSet<[i32; 2]> = pts.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &p in &pts {
        if !seen.insert(p) {
            continue;
        }
        let mut comp = vec![p];
        let mut q = VecDeque::from([p]);
        while let Some(a) = q.pop_front() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let n = [a[0] + dx, a[1] + dy];
                    if set.contains(&n) && seen.insert(n) {
                        comp.push(n);
                        q.push_back(n);
                    }
                }
            }
        }
        comp.sort();
        out.push(comp.into_iter().map(Site::from).collect());
    }
    Ok(out)
}

/// Number of 8-connected components of the masked grid sites.
pub fn star_component_count(grid: &Grid, mask: &[bool]) -> usize {
    let mut seen = vec![false; grid.len()];
    let mut count = 0;
    let mut c = [0i32; 2];
    let mut q = VecDeque::new();
    for start in 0..grid.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        q.push_back(start);
        while let Some(i) = q.pop_front() {
            grid.coords_into(i, &mut c);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(j) = grid.index_of(&[c[0] + dx, c[1] + dy]) {
                        if mask[j] && !seen[j] {
                            seen[j] = true;
                            q.push_back(j);
                        }
                    }
                }
            }
        }
    }
    count
}

/// Outcome of the `*`-connectivity check on one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarCheck {
    /// Components of `η²(t) ∩ ∂_ext η(t)` under 8-adjacency.
    pub components: usize,
    /// Snapshot touches the frame, so the finite surrogate is not trusted.
    pub frame_touching: bool,
}

/// `*`-components of `η²(t) ∩ ∂_ext η(t)`.
pub fn strong_boundary_check(trace: &CompetitionTrace, t: f64) -> Result<StarCheck> {
    let grid = trace.grid();
    if grid.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: grid.dim(),
        });
    }
    let occ = trace.occupancy_at(t);
    let ext = exterior_mask(grid, &occ);
    let dext = external_boundary_mask(grid, &occ, &ext);
    let mut c = [0i32; 2];
    let frame_touching = (0..grid.len()).any(|i| {
        occ[i] != 0 && {
            grid.coords_into(i, &mut c);
            grid.on_frame_coords(&c)
        }
    });
    let strong: Vec<bool> = (0..grid.len()).map(|i| dext[i] && occ[i] == 2).collect();
    Ok(StarCheck {
        components: star_component_count(grid, &strong),
        frame_touching,
    })
}

/// For connected `η` with connected, nonempty `η¹` and `η²`: whether the
/// edges of `Γ(η)` whose crossing pair meets `η^{species}` form a connected
/// dual subgraph. `None` when the preconditions fail.
pub fn contour_arc_connected(eta1: &[Site], eta2: &[Site], species: u8) -> Result<Option<bool>> {
    let p1: HashSet<[i32; 2]> = pairs(eta1)?.into_iter().collect();
    let p2: HashSet<[i32; 2]> = pairs(eta2)?.into_iter().collect();
    if p1.is_empty() || p2.is_empty() || !is_connected4(&p1) || !is_connected4(&p2) {
        return Ok(None);
    }
    let all: Vec<Site> = eta1.iter().chain(eta2).cloned().collect();
    let gamma = match outer_contour(&all) {
        Ok(g) => g,
        Err(Error::Disconnected) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mine = if species == 1 { &p1 } else { &p2 };
    let sel: Vec<DualEdge> = gamma
        .edges
        .iter()
        .copied()
        .filter(|e| {
            let x = e.crossing();
            [x.a(), x.b()].iter().any(|s| mine.contains(&as_pair(s).expect("2d")))
        })
        .collect();
    if sel.is_empty() {
        return Ok(Some(false));
    }
    let verts: BTreeSet<DualVertex> = sel.iter().flat_map(|e| [e.endpoints().0, e.endpoints().1]).collect();
    let mut adj: BTreeMap<DualVertex, Vec<DualVertex>> = BTreeMap::new();
    for e in &sel {
        let (a, b) = e.endpoints();
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let start = *verts.iter().next().expect("nonempty");
    let mut seen = BTreeSet::from([start]);
    let mut q = VecDeque::from([start]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[&v] {
            if seen.insert(w) {
                q.push_back(w);
            }
        }
    }
    Ok(Some(seen.len() == verts.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(w: i32, h: i32) -> Vec<Site> {
        (0..w).flat_map(|x| (0..h).map(move |y| Site::from([x, y]))).collect()
    }

    #[test]
    fn crossing_is_an_involution() {
        for x in -2..3 {
            for y in -2..3 {
                for axis in 0..2 {
                    let e = DualEdge::new(DualVertex::new(x, y), axis).unwrap();
                    assert_eq!(DualEdge::from_primal(&e.crossing()).unwrap(), e);
                    let p = Edge::new(Site::from([x, y]), Site::from([x, y]).offset(axis as usize, 1)).unwrap();
                    assert_eq!(DualEdge::from_primal(&p).unwrap().crossing(), p);
                }
            }
        }
    }

    #[test]
    fn crossing_forms_a_square() {
        let e = DualEdge::new(DualVertex::new(0, 0), 0).unwrap();
        let (a, b) = e.endpoints();
        let x = e.crossing();
        let mid_d = [(a.coords()[0] + b.coords()[0]) / 2.0, (a.coords()[1] + b.coords()[1]) / 2.0];
        let xa = x.a().to_real();
        let xb = x.b().to_real();
        let mid_p = [(xa[0] + xb[0]) / 2.0, (xa[1] + xb[1]) / 2.0];
        assert_eq!(mid_d, mid_p);
    }

    #[test]
    fn singleton_contour() {
        let c = peierls_contours(&[Site::from([0, 0])]).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.is_cycle);
        assert_eq!(c.cycle.len(), 4);
        assert_eq!(outer_contour(&[Site::from([0, 0])]).unwrap(), c);
        assert!(c.to_json().unwrap().contains("-0.5"));
    }

    #[test]
    fn block_contours() {
        let c = peierls_contours(&block(2, 2)).unwrap();
        assert_eq!(c.len(), 8);
        assert!(c.is_cycle);
        let mut ring = block(3, 3);
        ring.retain(|s| s != &Site::from([1, 1]));
        let p = peierls_contours(&ring).unwrap();
        assert_eq!(p.len(), 16);
        assert!(!p.is_cycle);
        let g = outer_contour(&ring).unwrap();
        assert_eq!(g.len(), 12);
        assert!(g.is_cycle);
    }

    #[test]
    fn tromino_contour() {
        let l = [Site::from([0, 0]), Site::from([1, 0]), Site::from([0, 1])];
        let g = outer_contour(&l).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g.is_cycle);
        assert_eq!(g.cycle.len(), 8);
    }

    #[test]
    fn disconnected_outer_contour_is_rejected() {
        let r = outer_contour(&[Site::from([0, 0]), Site::from([1, 1])]);
        assert_eq!(r, Err(Error::Disconnected));
    }

    #[test]
    fn external_boundary_examples() {
        let bx = LatticeBox::new(2, 6).unwrap();
        let one = external_boundary(&[Site::from([0, 0])], &[], &bx).unwrap();
        assert_eq!(one.d_ext, vec![Site::from([0, 0])]);
        let b: Vec<Site> = (-1..=1).flat_map(|x| (-1..=1).map(move |y| Site::from([x, y]))).collect();
        let d = external_boundary(&b, &[], &bx).unwrap();
        assert_eq!(d.d_ext.len(), 8);
        assert!(!d.d_ext.contains(&Site::from([0, 0])));

        let mut annulus = Vec::new();
        for x in -3..=3i32 {
            for y in -3..=3i32 {
                let r = x.abs().max(y.abs());
                if (2..=3).contains(&r) {
                    annulus.push(Site::from([x, y]));
                }
            }
        }
        let d = external_boundary(&annulus, &annulus, &bx).unwrap();
        assert_eq!(d.d_ext.len(), 24);
        assert!(d.d_ext.iter().all(|s| s.0[0].abs().max(s.0[1].abs()) == 3));
        assert_eq!(d.d_ext_strong, d.d_ext);
        assert!(!d.c_ext.contains(&Site::from([0, 0])));
    }

    #[test]
    fn saturated_box() {
        let bx = LatticeBox::new(2, 1).unwrap();
        let all = block(3, 3).into_iter().map(|s| Site::from([s.0[0] - 1, s.0[1] - 1])).collect::<Vec<_>>();
        let d = external_boundary(&all, &[], &bx).unwrap();
        assert!(d.saturated);
        assert!(d.c_ext.is_empty() && d.d_ext.is_empty());
    }

    #[test]
    fn star_component_examples() {
        assert_eq!(star_components(&[Site::from([0, 0]), Site::from([1, 1])]).unwrap().len(), 1);
        assert_eq!(star_components(&[Site::from([0, 0]), Site::from([2, 0])]).unwrap().len(), 2);
        assert!(star_components(&[]).unwrap().is_empty());
    }

    #[test]
    fn arc_connectivity_on_split_block() {
        let eta1: Vec<Site> = block(2, 4);
        let eta2: Vec<Site> = block(2, 4).into_iter().map(|s| s.offset(0, 2)).collect();
        assert_eq!(contour_arc_connected(&eta1, &eta2, 1).unwrap(), Some(true));
        assert_eq!(contour_arc_connected(&eta1, &eta2, 2).unwrap(), Some(true));
        assert_eq!(contour_arc_connected(&eta1, &[], 1).unwrap(), None);
    }
}
