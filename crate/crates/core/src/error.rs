use thiserror::Error;

use crate::grid::{CellIndex, LatticePoint};

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}, column {column}: illegal D8 code {code}")]
    IllegalCode {
        line: usize,
        column: usize,
        code: i64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("flow cycle through {} cells starting at ({}, {})", .0.len(), .0[0].x, .0[0].y)]
    Cycle(Vec<CellIndex>),

    #[error("cell ({}, {}) holds nodata", .0.x, .0.y)]
    NodataCell(CellIndex),

    #[error("cell ({x}, {y}) is outside the grid")]
    CellOutOfRange { x: i64, y: i64 },

    #[error("lattice move from ({}, {}) leaves the lattice", .0.x, .0.y)]
    LatticeOutOfRange(LatticePoint),

    #[error("empty flow grid")]
    EmptyFlowGrid,

    #[error("MNS format: {0}")]
    Format(String),

    #[error("non-simple walk: edge ({}, {})-({}, {}) repeats", .0.x, .0.y, .1.x, .1.y)]
    NonSimpleWalk(LatticePoint, LatticePoint),

    #[error("empty cell set")]
    EmptyCellSet,

    #[error("unfilled pit at ({x}, {y})")]
    Pit { x: usize, y: usize },

    #[error("march stalled at ({}, {}) after {probes} probes", .at.x, .at.y)]
    MarchStalled { at: LatticePoint, probes: u32 },

    #[error("power-law fit: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
