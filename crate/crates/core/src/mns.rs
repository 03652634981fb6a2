//! Modified nested set labeling of a D8 flow forest.
//!
//! Every valid cell gets a discovery label `d` (unique, `1..=n_valid`) and a
//! finish label `f` (the largest `d` inside its upstream subtree). A cell `u`
//! drains through `v` exactly when `d(v) <= d(u) <= f(v)`, so watershed
//! membership is a single interval test and `f - d + 1` is the watershed area
//! in cells. Label 0 marks nodata in both tables.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, D8Grid, GridHeader};

pub const MNS_MAGIC: &[u8; 4] = b"MNS1";
/// Bytes before the first cell record.
pub const MNS_HEADER_LEN: usize = 4 + 4 + 4 + 8 * 3;
/// Bytes per cell record (`d` then `f`, both u64).
pub const MNS_RECORD_LEN: usize = 16;

/// Closed interval `[d(v), f(v)]` of one subtree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub discovery: u64,
    pub finish: u64,
}

impl Interval {
    #[inline]
    pub fn contains(&self, d: u64) -> bool {
        self.discovery <= d && d <= self.finish
    }

    pub fn area(&self) -> u64 {
        self.finish - self.discovery + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MnsGrid {
    header: GridHeader,
    discovery: Vec<u64>,
    finish: Vec<u64>,
    n_valid: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub pushes: u64,
    pub pops: u64,
    pub cells_labeled: u64,
}

impl MnsGrid {
    /// Builds a label grid from raw tables, checking the sentinel pairing,
    /// label ranges and uniqueness of `d`.
    pub fn from_parts(header: GridHeader, discovery: Vec<u64>, finish: Vec<u64>) -> Result<Self> {
        header
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        if discovery.len() != header.len() || finish.len() != header.len() {
            return Err(Error::Format(format!(
                "expected {} labels per table",
                header.len()
            )));
        }
        let n_valid = discovery.iter().filter(|&&d| d != 0).count() as u64;
        let mut seen = vec![false; n_valid as usize + 1];
        for (i, (&d, &f)) in discovery.iter().zip(&finish).enumerate() {
            let c = header.cell(i);
            if (d == 0) != (f == 0) {
                return Err(Error::Format(format!(
                    "cell ({}, {}) mixes a nodata sentinel with a label",
                    c.x, c.y
                )));
            }
            if d == 0 {
                continue;
            }
            if d > n_valid || f > n_valid {
                return Err(Error::Format(format!(
                    "cell ({}, {}) label exceeds {n_valid} valid cells",
                    c.x, c.y
                )));
            }
            if d > f {
                return Err(Error::Format(format!(
                    "cell ({}, {}) has discovery {d} after finish {f}",
                    c.x, c.y
                )));
            }
            if std::mem::replace(&mut seen[d as usize], true) {
                return Err(Error::Format(format!("discovery label {d} repeats")));
            }
        }
        Ok(Self {
            header,
            discovery,
            finish,
            n_valid,
        })
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn n_valid(&self) -> u64 {
        self.n_valid
    }

    pub fn discovery(&self) -> &[u64] {
        &self.discovery
    }

    pub fn finish(&self) -> &[u64] {
        &self.finish
    }

    /// Discovery label, 0 for nodata.
    #[inline]
    pub fn d(&self, c: CellIndex) -> u64 {
        self.discovery[self.header.index(c)]
    }

    /// Finish label, 0 for nodata.
    #[inline]
    pub fn f(&self, c: CellIndex) -> u64 {
        self.finish[self.header.index(c)]
    }

    #[inline]
    pub fn is_valid(&self, c: CellIndex) -> bool {
        self.d(c) != 0
    }

    /// Interval of a valid cell's watershed, `None` for nodata.
    pub fn interval(&self, c: CellIndex) -> Option<Interval> {
        let i = self.header.index(c);
        (self.discovery[i] != 0).then(|| Interval {
            discovery: self.discovery[i],
            finish: self.finish[i],
        })
    }

    /// Whether `u` lies in the watershed of `v_star`. Absent (off-grid) and
    /// nodata cells are never inside.
    pub fn subtree_contains(&self, v_star: CellIndex, u: Option<CellIndex>) -> bool {
        let Some(iv) = self.interval(v_star) else {
            return false;
        };
        match u {
            Some(u) => {
                let d = self.d(u);
                d != 0 && iv.contains(d)
            }
            None => false,
        }
    }

    pub fn area(&self, v: CellIndex) -> Option<u64> {
        self.interval(v).map(|iv| iv.area())
    }

    /// Serialized size in bytes; linear in the cell count.
    pub fn encoded_len(&self) -> usize {
        MNS_HEADER_LEN + self.header.len() * MNS_RECORD_LEN
    }
}

/// Labels every valid cell by an iterative depth-first walk of the inflow
/// forest. Roots are taken in row-major order under one virtual super-root
/// and children in N, NE, E, SE, S, SW, W, NW order, so the labeling is a
/// pure function of the grid.
pub fn compute_mns(g: &D8Grid) -> Result<(MnsGrid, TraversalStats)> {
    let header = *g.header();
    let n_valid = g.valid_count() as u64;
    if n_valid == 0 {
        return Err(Error::EmptyFlowGrid);
    }

    let mut discovery = vec![0u64; header.len()];
    let mut finish = vec![0u64; header.len()];
    let mut stats = TraversalStats::default();
    let mut counter = 0u64;
    // (cell, children already descended into)
    let mut stack: Vec<(CellIndex, u8)> = Vec::new();

    for root in g.valid_cells().filter(|&c| g.downstream_cell(c).is_none()) {
        counter += 1;
        discovery[header.index(root)] = counter;
        stack.push((root, 0));
        stats.pushes += 1;

        while let Some(top) = stack.last_mut() {
            let (cell, slot) = *top;
            match g.inflows(cell).nth(slot as usize) {
                Some(child) => {
                    top.1 += 1;
                    counter += 1;
                    discovery[header.index(child)] = counter;
                    stack.push((child, 0));
                    stats.pushes += 1;
                }
                None => {
                    finish[header.index(cell)] = counter;
                    stack.pop();
                    stats.pops += 1;
                    stats.cells_labeled += 1;
                }
            }
        }
    }

    if counter != n_valid {
        // Cells never reached from a root sit on or drain into a cycle.
        g.validate_acyclic()?;
        unreachable!("unlabeled cells in an acyclic grid");
    }

    Ok((
        MnsGrid {
            header,
            discovery,
            finish,
            n_valid,
        },
        stats,
    ))
}

pub fn write_mns<W: Write>(m: &MnsGrid, mut sink: W) -> Result<()> {
    let h = m.header();
    let ncols = u32::try_from(h.ncols).map_err(|_| Error::Format("ncols exceeds u32".into()))?;
    let nrows = u32::try_from(h.nrows).map_err(|_| Error::Format("nrows exceeds u32".into()))?;
    let mut head = Vec::with_capacity(MNS_HEADER_LEN);
    head.extend_from_slice(MNS_MAGIC);
    head.extend_from_slice(&ncols.to_le_bytes());
    head.extend_from_slice(&nrows.to_le_bytes());
    head.extend_from_slice(&h.xllcorner.to_le_bytes());
    head.extend_from_slice(&h.yllcorner.to_le_bytes());
    head.extend_from_slice(&h.cellsize.to_le_bytes());
    sink.write_all(&head)?;

    let mut buf = Vec::with_capacity(MNS_RECORD_LEN * 4096);
    for (d, f) in m.discovery.iter().zip(&m.finish) {
        buf.extend_from_slice(&d.to_le_bytes());
        buf.extend_from_slice(&f.to_le_bytes());
        if buf.len() >= MNS_RECORD_LEN * 4096 {
            sink.write_all(&buf)?;
            buf.clear();
        }
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(())
}

fn read_full<R: Read>(source: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    source.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated stream in {what}")),
        _ => Error::Io(e),
    })
}

pub fn read_mns<R: Read>(mut source: R) -> Result<MnsGrid> {
    let mut head = [0u8; MNS_HEADER_LEN];
    read_full(&mut source, &mut head, "header")?;
    if &head[0..4] != MNS_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&head[0..4])
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().unwrap());
    let header = GridHeader {
        ncols: u32_at(4) as usize,
        nrows: u32_at(8) as usize,
        xllcorner: f64_at(12),
        yllcorner: f64_at(20),
        cellsize: f64_at(28),
    };
    header
        .validate()
        .map_err(|e| Error::Format(e.to_string()))?;

    let n = header.len();
    let mut discovery = Vec::with_capacity(n);
    let mut finish = Vec::with_capacity(n);
    let mut chunk = vec![0u8; MNS_RECORD_LEN * 4096];
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(4096);
        let bytes = &mut chunk[..take * MNS_RECORD_LEN];
        read_full(&mut source, bytes, "cell records")?;
        for rec in bytes.chunks_exact(MNS_RECORD_LEN) {
            discovery.push(u64::from_le_bytes(rec[0..8].try_into().unwrap()));
            finish.push(u64::from_le_bytes(rec[8..16].try_into().unwrap()));
        }
        remaining -= take;
    }
    MnsGrid::from_parts(header, discovery, finish)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridHeader;

    const ND: i32 = -9999;

    fn grid(ncols: usize, nrows: usize, codes: &[i32]) -> D8Grid {
        D8Grid::new(GridHeader::new(ncols, nrows), ND, codes.to_vec()).unwrap()
    }

    fn chain() -> D8Grid {
        grid(3, 1, &[1, 1, 1])
    }

    #[test]
    fn single_root() {
        let (m, stats) = compute_mns(&grid(1, 1, &[64])).unwrap();
        assert_eq!(
            (m.d(CellIndex::new(0, 0)), m.f(CellIndex::new(0, 0))),
            (1, 1)
        );
        assert_eq!(
            stats,
            TraversalStats {
                pushes: 1,
                pops: 1,
                cells_labeled: 1
            }
        );
    }

    #[test]
    fn chain_shares_finish_label() {
        let (m, _) = compute_mns(&chain()).unwrap();
        let d: Vec<u64> = (0..3).map(|x| m.d(CellIndex::new(x, 0))).collect();
        let f: Vec<u64> = (0..3).map(|x| m.f(CellIndex::new(x, 0))).collect();
        assert_eq!(d, vec![3, 2, 1]);
        assert_eq!(f, vec![3, 3, 3]);
    }

    #[test]
    fn subtree_membership_on_chain() {
        let (m, _) = compute_mns(&chain()).unwrap();
        let middle = CellIndex::new(1, 0);
        assert!(m.subtree_contains(middle, Some(middle)));
        assert!(m.subtree_contains(middle, Some(CellIndex::new(0, 0))));
        assert!(!m.subtree_contains(middle, Some(CellIndex::new(2, 0))));
        assert!(!m.subtree_contains(middle, None));
    }

    #[test]
    fn nodata_is_never_inside() {
        let (m, _) = compute_mns(&grid(3, 1, &[ND, 1, 1])).unwrap();
        assert_eq!(m.d(CellIndex::new(0, 0)), 0);
        assert_eq!(m.f(CellIndex::new(0, 0)), 0);
        assert!(!m.subtree_contains(CellIndex::new(2, 0), Some(CellIndex::new(0, 0))));
        assert_eq!(m.n_valid(), 2);
    }

    #[test]
    fn empty_and_cyclic_grids_fail() {
        assert!(matches!(
            compute_mns(&grid(2, 1, &[ND, ND])),
            Err(Error::EmptyFlowGrid)
        ));
        assert!(matches!(
            compute_mns(&grid(3, 1, &[1, 16, 1])),
            Err(Error::Cycle(_))
        ));
    }

    #[test]
    fn chain_round_trip() {
        let (m, _) = compute_mns(&chain()).unwrap();
        let mut bytes = Vec::new();
        write_mns(&m, &mut bytes).unwrap();
        assert_eq!(bytes.len(), m.encoded_len());
        assert_eq!(&bytes[..4], b"MNS1");
        let back = read_mns(bytes.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_streams() {
        let (m, _) = compute_mns(&chain()).unwrap();
        let mut bytes = Vec::new();
        write_mns(&m, &mut bytes).unwrap();

        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"MNSX");
        assert!(matches!(read_mns(bad.as_slice()), Err(Error::Format(_))));

        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(read_mns(short), Err(Error::Format(_))));

        let mut big = bytes.clone();
        let last_d = MNS_HEADER_LEN + 2 * MNS_RECORD_LEN;
        big[last_d..last_d + 8].copy_from_slice(&9u64.to_le_bytes());
        assert!(matches!(read_mns(big.as_slice()), Err(Error::Format(_))));

        let mut dup = bytes;
        dup[MNS_HEADER_LEN..MNS_HEADER_LEN + 8].copy_from_slice(&1u64.to_le_bytes());
        assert!(matches!(read_mns(dup.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn byte_layout_is_little_endian() {
        let h = GridHeader {
            ncols: 1,
            nrows: 1,
            xllcorner: 1.5,
            yllcorner: -2.0,
            cellsize: 30.0,
        };
        let m = MnsGrid::from_parts(h, vec![1], vec![1]).unwrap();
        let mut bytes = Vec::new();
        write_mns(&m, &mut bytes).unwrap();
        let mut want = b"MNS1".to_vec();
        want.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0]);
        want.extend_from_slice(&1.5f64.to_le_bytes());
        want.extend_from_slice(&(-2.0f64).to_le_bytes());
        want.extend_from_slice(&30.0f64.to_le_bytes());
        want.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(bytes, want);
    }
}
