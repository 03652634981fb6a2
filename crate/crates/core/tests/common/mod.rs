#![allow(dead_code)]

use watershed_core::grid::CellIndex;
use watershed_core::oracle::{count_holes, flood_fill_watershed};
use watershed_core::{delineate, D8Grid, MnsGrid, ReadCounter};

pub const FACE_READ_SLOPE: u64 = 12;
pub const FACE_READ_SLACK: u64 = 12;

/// Result of marching and flooding from one pour point.
pub struct Outcome {
    pub pour: CellIndex,
    pub equivalent: bool,
    pub area_ok: bool,
    pub boundary_points: u64,
    pub reads: ReadCounter,
}

pub fn check(g: &D8Grid, m: &MnsGrid, v: CellIndex) -> Outcome {
    let (poly, reads) = delineate(g, m, v).expect("march");
    let (cells, _) = flood_fill_watershed(g, v).expect("flood fill");
    let labels = m.f(v) - m.d(v) + 1;
    Outcome {
        pour: v,
        equivalent: watershed_core::equivalent(&poly, &cells),
        area_ok: poly.signed_area() == labels as i64 && labels == cells.len() as u64,
        boundary_points: poly.len() as u64,
        reads,
    }
}

pub fn within_read_bound(o: &Outcome) -> bool {
    o.reads.face_reads <= FACE_READ_SLOPE * o.boundary_points + FACE_READ_SLACK
        && o.reads.max_probes <= watershed_core::march::MAX_PROBES_PER_MOVE
}

pub fn hole_free(g: &D8Grid, v: CellIndex) -> bool {
    let (cells, _) = flood_fill_watershed(g, v).unwrap();
    count_holes(&cells) == 0
}
