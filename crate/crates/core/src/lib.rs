//! Watershed delineation on D8 flow-direction grids.
//!
//! A one-off depth-first pass ([`compute_mns`]) labels every cell with a
//! nested interval. With those labels any watershed outline can be traced
//! ([`delineate`]) by reading only cells next to the outline, instead of
//! flooding the whole upstream area ([`flood_fill_watershed`]).

pub mod bench;
pub mod error;
pub mod grid;
pub mod march;
pub mod mns;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{
    parse_ascii_grid, serialize_ascii_grid, write_ascii_grid, CellIndex, D8Grid, Direction,
    GridHeader, LatticePoint,
};
pub use march::{delineate, delineate_labels, BoundaryPolygon, ReadCounter};
pub use mns::{compute_mns, read_mns, write_mns, MnsGrid, TraversalStats};
pub use oracle::{equivalent, flood_fill_watershed, CellSet};
