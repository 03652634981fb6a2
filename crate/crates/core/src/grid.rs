//! D8 flow-direction rasters, their flow-graph reading, and the dual lattice
//! of cell corners.
//!
//! Axis convention: `x` grows east, `y` grows south, row 0 is the northern
//! edge of the raster (the ESRI ASCII row order). Lattice point `(x, y)` is
//! the north-west corner of cell `(x, y)`; the lattice is one point larger
//! than the raster in each dimension.
//!
//! D8 codes follow the ESRI convention:
//!
//! ```text
//!  32  64 128
//!  16   x   1
//!   8   4   2
//! ```

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};

/// `(code, dx, dy)` for every legal D8 code, indexed by `lg(code)`.
pub const D8_TABLE: [(u8, isize, isize); 8] = [
    (1, 1, 0),    // E
    (2, 1, 1),    // SE
    (4, 0, 1),    // S
    (8, -1, 1),   // SW
    (16, -1, 0),  // W
    (32, -1, -1), // NW
    (64, 0, -1),  // N
    (128, 1, -1), // NE
];

/// Neighbour offsets in the fixed enumeration order N, NE, E, SE, S, SW, W, NW.
/// Used for inflow enumeration and for every tie-break in the crate.
pub const NEIGHBOR_ORDER: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

pub fn is_d8_code(code: i64) -> bool {
    matches!(code, 1 | 2 | 4 | 8 | 16 | 32 | 64 | 128)
}

/// Offset `(dx, dy)` a legal D8 code points at.
pub fn code_offset(code: u8) -> Option<(isize, isize)> {
    D8_TABLE
        .iter()
        .find(|(c, _, _)| *c == code)
        .map(|&(_, dx, dy)| (dx, dy))
}

/// The D8 code pointing at `(dx, dy)`, if that is a unit neighbour offset.
pub fn offset_code(dx: isize, dy: isize) -> Option<u8> {
    D8_TABLE
        .iter()
        .find(|&&(_, ox, oy)| ox == dx && oy == dy)
        .map(|&(c, _, _)| c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub x: usize,
    pub y: usize,
}

impl CellIndex {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// The four lattice corners of this cell.
    pub fn corners(self) -> Corners {
        let (x, y) = (self.x, self.y);
        Corners {
            nw: LatticePoint::new(x, y),
            ne: LatticePoint::new(x + 1, y),
            se: LatticePoint::new(x + 1, y + 1),
            sw: LatticePoint::new(x, y + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    pub x: usize,
    pub y: usize,
}

impl LatticePoint {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Corners {
    pub nw: LatticePoint,
    pub ne: LatticePoint,
    pub se: LatticePoint,
    pub sw: LatticePoint,
}

impl Corners {
    pub fn to_array(self) -> [LatticePoint; 4] {
        [self.nw, self.ne, self.se, self.sw]
    }
}

/// The up-to-four raster cells meeting at a lattice point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Faces {
    pub nw: Option<CellIndex>,
    pub ne: Option<CellIndex>,
    pub se: Option<CellIndex>,
    pub sw: Option<CellIndex>,
}

impl Faces {
    pub fn to_array(self) -> [Option<CellIndex>; 4] {
        [self.nw, self.ne, self.se, self.sw]
    }
}

/// Cardinal march direction; arithmetic is modulo 4 and `+1` turns clockwise
/// on the map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Direction {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn from_index(i: u8) -> Self {
        Self::ALL[(i % 4) as usize]
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn clockwise(self) -> Self {
        Self::from_index(self.index() + 1)
    }

    pub fn counterclockwise(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn opposite(self) -> Self {
        Self::from_index(self.index() + 2)
    }

    /// Lattice offset under the y-south convention.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    Root,
    Internal,
    Nodata,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Downstream {
    Cell(CellIndex),
    OffGrid,
    IntoNodata,
}

/// Raster dimensions and georeferencing, shared by flow grids and label grids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
}

impl GridHeader {
    pub fn new(ncols: usize, nrows: usize) -> Self {
        Self {
            ncols,
            nrows,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {}x{}",
                self.ncols, self.nrows
            )));
        }
        if !(self.cellsize.is_finite() && self.cellsize > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cellsize must be positive, got {}",
                self.cellsize
            )));
        }
        if !self.xllcorner.is_finite() || !self.yllcorner.is_finite() {
            return Err(Error::InvalidGrid("non-finite corner coordinate".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: CellIndex) -> usize {
        c.y * self.ncols + c.x
    }

    #[inline]
    pub fn cell(&self, i: usize) -> CellIndex {
        CellIndex::new(i % self.ncols, i / self.ncols)
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.x < self.ncols && c.y < self.nrows
    }

    pub fn check(&self, c: CellIndex) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::CellOutOfRange {
                x: c.x as i64,
                y: c.y as i64,
            })
        }
    }

    pub fn contains_point(&self, p: LatticePoint) -> bool {
        p.x <= self.ncols && p.y <= self.nrows
    }

    #[inline]
    pub fn offset(&self, c: CellIndex, dx: isize, dy: isize) -> Option<CellIndex> {
        let x = c.x.checked_add_signed(dx)?;
        let y = c.y.checked_add_signed(dy)?;
        (x < self.ncols && y < self.nrows).then_some(CellIndex::new(x, y))
    }

    /// Cells meeting at lattice point `p`; absent outside the raster.
    #[inline]
    pub fn faces(&self, p: LatticePoint) -> Faces {
        let cell = |x: Option<usize>, y: Option<usize>| match (x, y) {
            (Some(x), Some(y)) if x < self.ncols && y < self.nrows => Some(CellIndex::new(x, y)),
            _ => None,
        };
        let (west, north) = (p.x.checked_sub(1), p.y.checked_sub(1));
        Faces {
            nw: cell(west, north),
            ne: cell(Some(p.x), north),
            se: cell(Some(p.x), Some(p.y)),
            sw: cell(west, Some(p.y)),
        }
    }

    pub fn world_coords(&self, p: LatticePoint) -> (f64, f64) {
        (
            self.xllcorner + p.x as f64 * self.cellsize,
            self.yllcorner + (self.nrows - p.y) as f64 * self.cellsize,
        )
    }

    /// The cell containing world position `(wx, wy)`. Points on the east or
    /// south edge of a cell belong to the next cell over.
    pub fn cell_at_world(&self, wx: f64, wy: f64) -> Option<CellIndex> {
        let fx = ((wx - self.xllcorner) / self.cellsize).floor();
        let top = self.yllcorner + self.nrows as f64 * self.cellsize;
        let fy = ((top - wy) / self.cellsize).floor();
        if !(fx.is_finite() && fy.is_finite()) || fx < 0.0 || fy < 0.0 {
            return None;
        }
        let c = CellIndex::new(fx as usize, fy as usize);
        self.contains(c).then_some(c)
    }
}

/// A D8 flow-direction raster. Immutable once built; every code is either a
/// legal D8 code or the nodata sentinel.
#[derive(Clone, Debug, PartialEq)]
pub struct D8Grid {
    header: GridHeader,
    nodata: i32,
    codes: Vec<i32>,
}

impl D8Grid {
    pub fn new(header: GridHeader, nodata: i32, codes: Vec<i32>) -> Result<Self> {
        header.validate()?;
        if is_d8_code(nodata as i64) {
            return Err(Error::InvalidGrid(format!(
                "nodata value {nodata} collides with a D8 code"
            )));
        }
        if codes.len() != header.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} codes, got {}",
                header.len(),
                codes.len()
            )));
        }
        if let Some(i) = codes
            .iter()
            .position(|&c| c != nodata && !is_d8_code(c as i64))
        {
            let c = header.cell(i);
            return Err(Error::IllegalCode {
                line: c.y + 1,
                column: c.x + 1,
                code: codes[i] as i64,
            });
        }
        Ok(Self {
            header,
            nodata,
            codes,
        })
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn ncols(&self) -> usize {
        self.header.ncols
    }

    pub fn nrows(&self) -> usize {
        self.header.nrows
    }

    pub fn nodata(&self) -> i32 {
        self.nodata
    }

    pub fn codes(&self) -> &[i32] {
        &self.codes
    }

    #[inline]
    pub fn code(&self, c: CellIndex) -> i32 {
        self.codes[self.header.index(c)]
    }

    #[inline]
    pub fn is_nodata(&self, c: CellIndex) -> bool {
        self.code(c) == self.nodata
    }

    pub fn valid_count(&self) -> usize {
        self.codes.iter().filter(|&&c| c != self.nodata).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.header.len()).map(|i| self.header.cell(i))
    }

    pub fn valid_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.cells().filter(|&c| !self.is_nodata(c))
    }

    pub fn downstream(&self, c: CellIndex) -> Result<Downstream> {
        self.header.check(c)?;
        let code = self.code(c);
        if code == self.nodata {
            return Err(Error::NodataCell(c));
        }
        Ok(self.downstream_of_code(c, code as u8))
    }

    #[inline]
    fn downstream_of_code(&self, c: CellIndex, code: u8) -> Downstream {
        let (dx, dy) = code_offset(code).expect("codes validated at construction");
        match self.header.offset(c, dx, dy) {
            None => Downstream::OffGrid,
            Some(n) if self.is_nodata(n) => Downstream::IntoNodata,
            Some(n) => Downstream::Cell(n),
        }
    }

    /// Downstream cell of a valid cell, or `None` for roots and nodata.
    #[inline]
    pub fn downstream_cell(&self, c: CellIndex) -> Option<CellIndex> {
        let code = self.code(c);
        if code == self.nodata {
            return None;
        }
        match self.downstream_of_code(c, code as u8) {
            Downstream::Cell(n) => Some(n),
            _ => None,
        }
    }

    pub fn classify(&self, c: CellIndex) -> CellClass {
        if self.is_nodata(c) {
            CellClass::Nodata
        } else if self.downstream_cell(c).is_some() {
            CellClass::Internal
        } else {
            CellClass::Root
        }
    }

    /// Neighbours draining into `c`, in N, NE, E, SE, S, SW, W, NW order.
    pub fn inflow_neighbors(&self, c: CellIndex) -> Vec<CellIndex> {
        self.inflows(c).collect()
    }

    #[inline]
    pub(crate) fn inflows(&self, c: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        NEIGHBOR_ORDER.iter().filter_map(move |&(dx, dy)| {
            let n = self.header.offset(c, dx, dy)?;
            let code = self.code(n);
            // n drains into c iff its code points back along (-dx, -dy).
            (code != self.nodata && code_offset(code as u8) == Some((-dx, -dy))).then_some(n)
        })
    }

    /// Checks that every valid cell's flow path ends at a root. Each cell is
    /// walked at most once.
    pub fn validate_acyclic(&self) -> Result<()> {
        const UNSEEN: u8 = 0;
        const ON_PATH: u8 = 1;
        const DONE: u8 = 2;

        let mut state = vec![UNSEEN; self.header.len()];
        let mut path = Vec::new();
        for start in 0..self.header.len() {
            if state[start] != UNSEEN || self.codes[start] == self.nodata {
                continue;
            }
            path.clear();
            let mut cur = self.header.cell(start);
            loop {
                let i = self.header.index(cur);
                match state[i] {
                    DONE => break,
                    ON_PATH => {
                        let at = path.iter().position(|&p| p == cur).unwrap();
                        return Err(Error::Cycle(path.split_off(at)));
                    }
                    _ => {}
                }
                state[i] = ON_PATH;
                path.push(cur);
                match self.downstream_cell(cur) {
                    Some(next) => cur = next,
                    None => break,
                }
            }
            for c in &path {
                state[self.header.index(*c)] = DONE;
            }
        }
        Ok(())
    }

    pub fn world_coords(&self, p: LatticePoint) -> (f64, f64) {
        self.header.world_coords(p)
    }
}

fn column_of(line: &str, token: &str) -> usize {
    token.as_ptr() as usize - line.as_ptr() as usize + 1
}

/// Parses an ESRI ASCII grid holding D8 codes.
pub fn parse_ascii_grid(text: &str) -> Result<D8Grid> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut cellsize = None;
    let mut nodata = None;

    for _ in 0..6 {
        let (ln, line) = lines.next().ok_or_else(|| Error::Parse {
            line: text.lines().count() + 1,
            column: 1,
            message: "truncated header".into(),
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: ln,
                column: 1,
                message: format!("expected `key value`, found {} tokens", tokens.len()),
            });
        }
        let (key, value) = (tokens[0], tokens[1]);
        let vcol = column_of(line, value);
        let bad = |what: &str| Error::Parse {
            line: ln,
            column: vcol,
            message: format!("bad {what} value `{value}`"),
        };
        let lower = key.to_ascii_lowercase();
        let slot_taken = match lower.as_str() {
            "ncols" => ncols
                .replace(value.parse::<usize>().map_err(|_| bad("ncols"))?)
                .is_some(),
            "nrows" => nrows
                .replace(value.parse::<usize>().map_err(|_| bad("nrows"))?)
                .is_some(),
            "xllcorner" => xll
                .replace(value.parse::<f64>().map_err(|_| bad("xllcorner"))?)
                .is_some(),
            "yllcorner" => yll
                .replace(value.parse::<f64>().map_err(|_| bad("yllcorner"))?)
                .is_some(),
            "cellsize" => cellsize
                .replace(value.parse::<f64>().map_err(|_| bad("cellsize"))?)
                .is_some(),
            "nodata_value" => nodata
                .replace(value.parse::<i32>().map_err(|_| bad("nodata"))?)
                .is_some(),
            _ => {
                return Err(Error::Parse {
                    line: ln,
                    column: column_of(line, key),
                    message: format!("unknown header key `{key}`"),
                })
            }
        };
        if slot_taken {
            return Err(Error::Parse {
                line: ln,
                column: column_of(line, key),
                message: format!("duplicate header key `{key}`"),
            });
        }
    }

    let missing = |k: &str| Error::Parse {
        line: 7,
        column: 1,
        message: format!("missing header key `{k}`"),
    };
    let header = GridHeader {
        ncols: ncols.ok_or_else(|| missing("ncols"))?,
        nrows: nrows.ok_or_else(|| missing("nrows"))?,
        xllcorner: xll.ok_or_else(|| missing("xllcorner"))?,
        yllcorner: yll.ok_or_else(|| missing("yllcorner"))?,
        cellsize: cellsize.ok_or_else(|| missing("cellsize"))?,
    };
    let nodata = nodata.ok_or_else(|| missing("NODATA_value"))?;
    header.validate()?;
    if is_d8_code(nodata as i64) {
        return Err(Error::InvalidGrid(format!(
            "nodata value {nodata} collides with a D8 code"
        )));
    }

    let mut codes = Vec::with_capacity(header.len());
    let mut last_line = 6;
    for row in 0..header.nrows {
        let (ln, line) = lines.next().ok_or_else(|| Error::Parse {
            line: last_line + 1,
            column: 1,
            message: format!("expected {} data rows, found {row}", header.nrows),
        })?;
        last_line = ln;
        let mut count = 0;
        for token in line.split_whitespace() {
            let column = column_of(line, token);
            if count == header.ncols {
                return Err(Error::Parse {
                    line: ln,
                    column,
                    message: format!("expected {} values, found more", header.ncols),
                });
            }
            let v: i64 = token.parse().map_err(|_| Error::Parse {
                line: ln,
                column,
                message: format!("`{token}` is not an integer"),
            })?;
            if v != nodata as i64 && !is_d8_code(v) {
                return Err(Error::IllegalCode {
                    line: ln,
                    column,
                    code: v,
                });
            }
            codes.push(v as i32);
            count += 1;
        }
        if count != header.ncols {
            return Err(Error::Parse {
                line: ln,
                column: line.len() + 1,
                message: format!("expected {} values, found {count}", header.ncols),
            });
        }
    }
    if let Some((ln, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        let column = line.len() - line.trim_start().len() + 1;
        return Err(Error::Parse {
            line: ln,
            column,
            message: "unexpected data after the last row".into(),
        });
    }

    D8Grid::new(header, nodata, codes)
}

pub fn write_ascii_grid<W: Write>(g: &D8Grid, mut out: W) -> std::io::Result<()> {
    out.write_all(serialize_ascii_grid(g).as_bytes())
}

pub fn serialize_ascii_grid(g: &D8Grid) -> String {
    let h = g.header();
    let mut s = String::with_capacity(h.len() * 4 + 128);
    let _ = writeln!(s, "ncols {}", h.ncols);
    let _ = writeln!(s, "nrows {}", h.nrows);
    let _ = writeln!(s, "xllcorner {}", h.xllcorner);
    let _ = writeln!(s, "yllcorner {}", h.yllcorner);
    let _ = writeln!(s, "cellsize {}", h.cellsize);
    let _ = writeln!(s, "nodata_value {}", g.nodata());
    for row in g.codes().chunks(h.ncols) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}
