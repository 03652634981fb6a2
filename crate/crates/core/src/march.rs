//! Boundary marching: trace the closed lattice walk around a watershed while
//! reading only labels of cells that touch its boundary.
//!
//! The march keeps the watershed on its left (counterclockwise on the map).
//! After every accepted step the heading turns one step clockwise, so the
//! first probe at each lattice point is a right turn; every rejected probe
//! turns the heading one step counterclockwise (straight, then left). A probe
//! from `p` to `q` is accepted when `q` passes the four-face boundary test
//! and the face left of the edge `p -> q` is inside while the face on its
//! right is outside. Both checks come from the same four label reads.
//!
//! Pinch points (the watershed touching itself at a single corner) resolve
//! to the right turn, which walks the region as 8-connected and keeps the
//! whole outline in one cycle. Enclosed holes are not traced.

use crate::error::{Error, Result};
use crate::grid::{
    code_offset, CellIndex, D8Grid, Direction, Faces, GridHeader, LatticePoint, D8_TABLE,
};
use crate::mns::{Interval, MnsGrid};

/// Upper bound on probes before a move must be accepted.
pub const MAX_PROBES_PER_MOVE: u32 = 3;

/// Start corner per `lg(code)`: E, SE, S, SW, W, NW, N, NE.
const START_CORNER: [Corner; 8] = [
    Corner::Ne,
    Corner::Se,
    Corner::Se,
    Corner::Sw,
    Corner::Sw,
    Corner::Nw,
    Corner::Nw,
    Corner::Ne,
];

/// First heading per `lg(code)`.
const START_HEADING: [Direction; 8] = [
    Direction::East,
    Direction::East,
    Direction::South,
    Direction::South,
    Direction::West,
    Direction::West,
    Direction::North,
    Direction::North,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Corner {
    Nw,
    Ne,
    Se,
    Sw,
}

/// A closed lattice walk; the first point is not repeated at the end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryPolygon {
    points: Vec<LatticePoint>,
}

impl BoundaryPolygon {
    pub fn new(points: Vec<LatticePoint>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Consecutive point pairs, including the closing pair.
    pub fn directed_edges(&self) -> impl Iterator<Item = (LatticePoint, LatticePoint)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// Shoelace area in cells; positive when counterclockwise on the map.
    pub fn signed_area(&self) -> i64 {
        let twice: i64 = self
            .directed_edges()
            .map(|(a, b)| b.x as i64 * a.y as i64 - a.x as i64 * b.y as i64)
            .sum();
        twice / 2
    }

    /// World coordinates of the ring, closed by repeating the first point.
    pub fn world_ring(&self, header: &GridHeader) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .chain(self.points.first())
            .map(|&p| header.world_coords(p))
            .collect()
    }
}

/// Work done by one delineation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadCounter {
    /// Label lookups of existing cells.
    pub face_reads: u64,
    /// Candidate lattice points examined.
    pub boundary_tests: u64,
    /// Moves that added an edge to the polygon.
    pub accepted_moves: u64,
    /// Most probes spent on any single accepted move.
    pub max_probes: u32,
}

/// State of the march between moves.
#[derive(Clone, Copy, Debug)]
pub struct MarchState {
    pub current: LatticePoint,
    pub heading: Direction,
    pub first_edge: Option<(LatticePoint, LatticePoint)>,
    pub probes_this_step: u32,
}

/// One unit step on the lattice.
pub fn lattice_move(p: LatticePoint, dir: Direction, header: &GridHeader) -> Result<LatticePoint> {
    step(p, dir, header).ok_or(Error::LatticeOutOfRange(p))
}

#[inline]
fn step(p: LatticePoint, dir: Direction, header: &GridHeader) -> Option<LatticePoint> {
    let (dx, dy) = dir.offset();
    let q = LatticePoint::new(p.x.checked_add_signed(dx)?, p.y.checked_add_signed(dy)?);
    header.contains_point(q).then_some(q)
}

/// Four-face boundary test: some face of `p` lies in the watershed of
/// `v_star` and some face does not. Missing and nodata faces are outside.
pub fn boundary_point(p: LatticePoint, v_star: CellIndex, m: &MnsGrid) -> bool {
    let Some(iv) = m.interval(v_star) else {
        return false;
    };
    let inside = face_membership(m.header().faces(p), iv, m, &mut 0);
    inside.iter().any(|&i| i) && inside.iter().any(|&i| !i)
}

#[inline]
fn face_membership(faces: Faces, iv: Interval, m: &MnsGrid, reads: &mut u64) -> [bool; 4] {
    faces.to_array().map(|f| match f {
        Some(c) => {
            *reads += 1;
            let d = m.d(c);
            d != 0 && iv.contains(d)
        }
        None => false,
    })
}

/// Starting lattice point and heading for a pour point whose flow leaves by
/// `code`. The corner touches the downstream neighbour, so it is on the
/// boundary.
pub fn start_march(v_star: CellIndex, code: u8) -> Result<(LatticePoint, Direction)> {
    if code_offset(code).is_none() {
        return Err(Error::InvalidGrid(format!("illegal D8 code {code}")));
    }
    let idx = code.trailing_zeros() as usize;
    let k = v_star.corners();
    let corner = match START_CORNER[idx] {
        Corner::Nw => k.nw,
        Corner::Ne => k.ne,
        Corner::Se => k.se,
        Corner::Sw => k.sw,
    };
    Ok((corner, START_HEADING[idx]))
}

/// Recovers the D8 code of a valid cell from labels alone: its downstream
/// neighbour is the adjacent ancestor with the largest discovery label. A
/// root gets the first code (in `lg` order) whose neighbour is off-grid or
/// nodata.
pub fn flow_code_from_labels(m: &MnsGrid, v: CellIndex) -> Result<u8> {
    let h = m.header();
    h.check(v)?;
    let dv = m.d(v);
    if dv == 0 {
        return Err(Error::NodataCell(v));
    }
    let mut parent: Option<(u64, u8)> = None;
    let mut outlet: Option<u8> = None;
    for (code, dx, dy) in D8_TABLE {
        match h.offset(v, dx, dy) {
            Some(u) if m.is_valid(u) => {
                let (du, fu) = (m.d(u), m.f(u));
                if du < dv && dv <= fu && parent.is_none_or(|(best, _)| du > best) {
                    parent = Some((du, code));
                }
            }
            _ => {
                outlet.get_or_insert(code);
            }
        }
    }
    parent
        .map(|(_, c)| c)
        .or(outlet)
        .ok_or_else(|| Error::Format(format!("cell ({}, {}) has no outlet", v.x, v.y)))
}

/// Traces the watershed boundary of `v_star`, using the D8 grid only for
/// the pour point's own flow code.
pub fn delineate(
    g: &D8Grid,
    m: &MnsGrid,
    v_star: CellIndex,
) -> Result<(BoundaryPolygon, ReadCounter)> {
    g.header().check(v_star)?;
    if g.is_nodata(v_star) {
        return Err(Error::NodataCell(v_star));
    }
    if (g.ncols(), g.nrows()) != (m.header().ncols, m.header().nrows) {
        return Err(Error::InvalidGrid(
            "flow grid and label grid dimensions differ".into(),
        ));
    }
    march(m, v_star, g.code(v_star) as u8)
}

/// Traces the watershed boundary of `v_star` from the label grid alone.
pub fn delineate_labels(m: &MnsGrid, v_star: CellIndex) -> Result<(BoundaryPolygon, ReadCounter)> {
    let code = flow_code_from_labels(m, v_star)?;
    march(m, v_star, code)
}

fn march(m: &MnsGrid, v_star: CellIndex, code: u8) -> Result<(BoundaryPolygon, ReadCounter)> {
    let header = m.header();
    header.check(v_star)?;
    let iv = m.interval(v_star).ok_or(Error::NodataCell(v_star))?;
    let (start, heading) = start_march(v_star, code)?;

    let mut reads = ReadCounter::default();
    let mut points = vec![start];
    let mut state = MarchState {
        current: start,
        heading,
        first_edge: None,
        probes_this_step: 0,
    };

    loop {
        if state.probes_this_step == MAX_PROBES_PER_MOVE {
            return Err(Error::MarchStalled {
                at: state.current,
                probes: state.probes_this_step,
            });
        }
        state.probes_this_step += 1;
        reads.boundary_tests += 1;

        let accepted = step(state.current, state.heading, header).filter(|&q| {
            let inside = face_membership(header.faces(q), iv, m, &mut reads.face_reads);
            // Faces of q are ordered nw, ne, se, sw; the edge's left and
            // right faces rotate with the heading.
            let h = state.heading.index() as usize;
            let (left, right) = (inside[(h + 3) % 4], inside[(h + 2) % 4]);
            let on_boundary = inside.iter().any(|&i| i) && inside.iter().any(|&i| !i);
            let folds_back = points.len() >= 2 && q == points[points.len() - 2];
            on_boundary && left && !right && !folds_back
        });

        match accepted {
            Some(q) => {
                reads.max_probes = reads.max_probes.max(state.probes_this_step);
                state.probes_this_step = 0;
                let edge = (state.current, q);
                match state.first_edge {
                    Some(first) if first == edge => break,
                    None => state.first_edge = Some(edge),
                    _ => {}
                }
                points.push(q);
                reads.accepted_moves += 1;
                state.current = q;
                state.heading = state.heading.clockwise();
            }
            None => state.heading = state.heading.counterclockwise(),
        }
    }

    // The walk re-entered the start point before recrossing the first edge.
    points.pop();
    Ok((BoundaryPolygon::new(points), reads))
}
