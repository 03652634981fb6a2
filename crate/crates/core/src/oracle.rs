//! Brute-force reference: area-proportional flood fill over the D8 grid,
//! raster-region boundary extraction, and polygon/region comparison.
//!
//! Nothing here reads MNS labels, so it cannot share a failure mode with the
//! marcher it checks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, D8Grid, GridHeader, LatticePoint};
use crate::march::{BoundaryPolygon, ReadCounter};

/// Neighbour reads charged per visited cell by the baseline cost model.
pub const BASELINE_READS_PER_CELL: u64 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    header: GridHeader,
    members: Vec<bool>,
    count: usize,
}

impl CellSet {
    pub fn new(header: GridHeader) -> Self {
        Self {
            header,
            members: vec![false; header.len()],
            count: 0,
        }
    }

    pub fn insert(&mut self, c: CellIndex) -> bool {
        let i = self.header.index(c);
        if self.members[i] {
            return false;
        }
        self.members[i] = true;
        self.count += 1;
        true
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        self.header.contains(c) && self.members[self.header.index(c)]
    }

    fn contains_at(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && self.contains(CellIndex::new(x as usize, y as usize))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn iter(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.header.cell(i))
    }
}

/// Undirected lattice edges, each stored with its smaller endpoint first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeSet(BTreeSet<(LatticePoint, LatticePoint)>);

impl EdgeSet {
    fn key(a: LatticePoint, b: LatticePoint) -> (LatticePoint, LatticePoint) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn insert(&mut self, a: LatticePoint, b: LatticePoint) -> bool {
        self.0.insert(Self::key(a, b))
    }

    pub fn contains(&self, a: LatticePoint, b: LatticePoint) -> bool {
        self.0.contains(&Self::key(a, b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(LatticePoint, LatticePoint)> {
        self.0.iter()
    }

    pub fn degrees(&self) -> BTreeMap<LatticePoint, usize> {
        let mut deg = BTreeMap::new();
        for &(a, b) in &self.0 {
            *deg.entry(a).or_insert(0) += 1;
            *deg.entry(b).or_insert(0) += 1;
        }
        deg
    }

    pub fn all_degrees_even(&self) -> bool {
        self.degrees().values().all(|d| d % 2 == 0)
    }
}

/// Every cell whose flow path reaches `v_star`, found breadth-first over
/// inflow neighbours. Charges [`BASELINE_READS_PER_CELL`] reads per cell.
pub fn flood_fill_watershed(g: &D8Grid, v_star: CellIndex) -> Result<(CellSet, ReadCounter)> {
    g.header().check(v_star)?;
    if g.is_nodata(v_star) {
        return Err(Error::NodataCell(v_star));
    }
    let mut set = CellSet::new(*g.header());
    let mut reads = ReadCounter::default();
    let mut queue = VecDeque::from([v_star]);
    set.insert(v_star);
    while let Some(c) = queue.pop_front() {
        reads.face_reads += BASELINE_READS_PER_CELL;
        for u in g.inflows(c) {
            if set.insert(u) {
                queue.push_back(u);
            }
        }
    }
    Ok((set, reads))
}

/// Lattice edges with exactly one adjacent face in `s`.
pub fn cellset_boundary(s: &CellSet) -> Result<EdgeSet> {
    if s.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let mut edges = EdgeSet::default();
    for c in s.iter() {
        let (x, y) = (c.x as isize, c.y as isize);
        let k = c.corners();
        if !s.contains_at(x, y - 1) {
            edges.insert(k.nw, k.ne);
        }
        if !s.contains_at(x + 1, y) {
            edges.insert(k.ne, k.se);
        }
        if !s.contains_at(x, y + 1) {
            edges.insert(k.sw, k.se);
        }
        if !s.contains_at(x - 1, y) {
            edges.insert(k.nw, k.sw);
        }
    }
    Ok(edges)
}

/// Undirected edge set of a closed walk; fails if any edge is walked twice.
pub fn polygon_to_edges(p: &BoundaryPolygon) -> Result<EdgeSet> {
    let mut edges = EdgeSet::default();
    for (a, b) in p.directed_edges() {
        if !edges.insert(a, b) {
            return Err(Error::NonSimpleWalk(a, b));
        }
    }
    Ok(edges)
}

/// The cell to the left of directed unit edge `a -> b` (y grows south).
fn left_cell(a: LatticePoint, b: LatticePoint) -> (isize, isize) {
    let (ax, ay) = (a.x as isize, a.y as isize);
    let (bx, by) = (b.x as isize, b.y as isize);
    match (bx - ax, by - ay) {
        (1, 0) => (ax, ay - 1),  // east: north side
        (-1, 0) => (bx, ay),     // west: south side
        (0, -1) => (ax - 1, by), // north: west side
        (0, 1) => (ax, ay),      // south: east side
        _ => (-1, -1),
    }
}

/// True when the polygon traces exactly the boundary of `s` with `s` on the
/// left of every edge.
pub fn equivalent(p: &BoundaryPolygon, s: &CellSet) -> bool {
    let (Ok(walk), Ok(region)) = (polygon_to_edges(p), cellset_boundary(s)) else {
        return false;
    };
    walk == region
        && p.directed_edges().all(|(a, b)| {
            let (x, y) = left_cell(a, b);
            s.contains_at(x, y)
        })
}

/// Number of 4-connected pockets of non-member cells that do not reach the
/// raster edge. A region with holes has boundary rings the marcher never
/// visits.
pub fn count_holes(s: &CellSet) -> usize {
    let h = *s.header();
    let mut seen = vec![false; h.len()];
    let mut holes = 0;
    for start in 0..h.len() {
        if seen[start] || s.members[start] {
            continue;
        }
        let mut touches_edge = false;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let c = h.cell(i);
            if c.x == 0 || c.y == 0 || c.x + 1 == h.ncols || c.y + 1 == h.nrows {
                touches_edge = true;
            }
            for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
                if let Some(n) = h.offset(c, dx, dy) {
                    let j = h.index(n);
                    if !seen[j] && !s.members[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if !touches_edge {
            holes += 1;
        }
    }
    holes
}
