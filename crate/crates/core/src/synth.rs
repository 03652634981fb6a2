//! Seeded generators of valid D8 grids.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, so a seed fixes
//! the output on every platform.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{offset_code, CellIndex, D8Grid, GridHeader, NEIGHBOR_ORDER};

/// Nodata sentinel written by every generator.
pub const SYNTH_NODATA: i32 = -9999;

fn on_border(h: &GridHeader, c: CellIndex) -> bool {
    c.x == 0 || c.y == 0 || c.x + 1 == h.ncols || c.y + 1 == h.nrows
}

/// First direction (N, NE, ..., NW) that leaves the raster.
fn first_exit_code(h: &GridHeader, c: CellIndex) -> Option<u8> {
    NEIGHBOR_ORDER
        .iter()
        .find(|&&(dx, dy)| h.offset(c, dx, dy).is_none())
        .and_then(|&(dx, dy)| offset_code(dx, dy))
}

fn dist2(a: CellIndex, b: CellIndex) -> usize {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    dx * dx + dy * dy
}

/// Every cell drains to the neighbour nearest (Euclidean) to `outlet`, ties
/// going to the first in N, NE, ..., NW order. An outlet on the raster edge
/// drains off-grid and collects the whole raster; an interior outlet becomes
/// a nodata sink and the cells around it become roots.
pub fn gen_cone(ncols: usize, nrows: usize, outlet: CellIndex) -> Result<D8Grid> {
    let h = GridHeader::new(ncols, nrows);
    h.validate()?;
    h.check(outlet)?;
    let codes = (0..h.len())
        .map(|i| {
            let c = h.cell(i);
            if c == outlet {
                return match first_exit_code(&h, c) {
                    Some(code) => code as i32,
                    None => SYNTH_NODATA,
                };
            }
            let (_, code) = NEIGHBOR_ORDER
                .iter()
                .filter_map(|&(dx, dy)| {
                    let n = h.offset(c, dx, dy)?;
                    Some((dist2(n, outlet), offset_code(dx, dy)?))
                })
                .min_by_key(|&(d, _)| d)
                .expect("non-outlet cell has a neighbour");
            code as i32
        })
        .collect();
    D8Grid::new(h, SYNTH_NODATA, codes)
}

/// Random spanning forest of the 8-connected grid, grown outward from
/// seeded roots on the raster edge.
///
/// `max(1, round(root_fraction * n))` roots (capped at the number of edge
/// cells) are drawn from the edge cells and drain off-grid. Cells then join
/// one at a time by a uniformly chosen frontier link to an already placed
/// neighbour. A diagonal link `u -> t` is taken only when both cells beside
/// it are already linked to `t`; this keeps every watershed free of
/// enclosed pockets, so its outline is a single ring.
pub fn gen_random_forest(
    ncols: usize,
    nrows: usize,
    seed: u64,
    root_fraction: f64,
) -> Result<D8Grid> {
    let h = GridHeader::new(ncols, nrows);
    h.validate()?;
    if !(root_fraction > 0.0 && root_fraction <= 1.0) {
        return Err(Error::InvalidGrid(format!(
            "root fraction must be in (0, 1], got {root_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let border: Vec<CellIndex> = (0..h.len())
        .map(|i| h.cell(i))
        .filter(|&c| on_border(&h, c))
        .collect();
    let wanted = ((root_fraction * h.len() as f64).round() as usize).clamp(1, border.len());
    let mut root_picks: Vec<usize> = index::sample(&mut rng, border.len(), wanted).into_vec();
    root_picks.sort_unstable();

    let mut codes = vec![0i32; h.len()];
    let mut parent: Vec<Option<usize>> = vec![None; h.len()];
    let mut placed = vec![false; h.len()];
    let mut frontier: Vec<(usize, usize)> = Vec::new();

    let push_links = |c: usize, placed: &[bool], frontier: &mut Vec<(usize, usize)>| {
        let cell = h.cell(c);
        for &(dx, dy) in &NEIGHBOR_ORDER {
            if let Some(n) = h.offset(cell, dx, dy) {
                let j = h.index(n);
                if !placed[j] {
                    frontier.push((j, c));
                }
            }
        }
    };

    for k in root_picks {
        let c = border[k];
        let i = h.index(c);
        codes[i] = first_exit_code(&h, c).expect("edge cell has an exit") as i32;
        placed[i] = true;
    }
    for i in 0..h.len() {
        if placed[i] {
            push_links(i, &placed, &mut frontier);
        }
    }

    let linked =
        |a: usize, b: usize, parent: &[Option<usize>]| parent[a] == Some(b) || parent[b] == Some(a);

    while !frontier.is_empty() {
        let pick = rng.gen_range(0..frontier.len());
        let (child, to) = frontier.swap_remove(pick);
        if placed[child] {
            continue;
        }
        let (u, t) = (h.cell(child), h.cell(to));
        let dx = t.x as isize - u.x as isize;
        let dy = t.y as isize - u.y as isize;
        if dx != 0 && dy != 0 {
            let a = h.index(CellIndex::new(t.x, u.y));
            let b = h.index(CellIndex::new(u.x, t.y));
            let ok = placed[a] && placed[b] && linked(a, to, &parent) && linked(b, to, &parent);
            if !ok {
                continue;
            }
        }
        codes[child] = offset_code(dx, dy).expect("unit offset") as i32;
        parent[child] = Some(to);
        placed[child] = true;
        push_links(child, &placed, &mut frontier);
    }

    D8Grid::new(h, SYNTH_NODATA, codes)
}

/// Steepest-descent D8 directions from a height table.
///
/// Each unmasked cell drains to the unmasked neighbour with the largest
/// positive drop per unit distance (1 for cardinal, √2 for diagonal), ties
/// to the first in N, NE, ..., NW order. A cell with no lower neighbour
/// drains off-grid if it is on the raster edge (away from its steepest
/// uphill neighbour when that leads off-grid, otherwise the first exit in
/// neighbour order), else into an adjacent masked cell; anything else is an
/// unfilled pit.
pub fn gen_from_dem(
    ncols: usize,
    nrows: usize,
    heights: &[f64],
    nodata: &[bool],
) -> Result<D8Grid> {
    let h = GridHeader::new(ncols, nrows);
    h.validate()?;
    if heights.len() != h.len() || nodata.len() != h.len() {
        return Err(Error::InvalidGrid(format!(
            "expected {} heights and mask entries",
            h.len()
        )));
    }
    if let Some(i) = (0..h.len()).find(|&i| !nodata[i] && !heights[i].is_finite()) {
        let c = h.cell(i);
        return Err(Error::InvalidGrid(format!(
            "non-finite height at ({}, {})",
            c.x, c.y
        )));
    }

    let mut codes = vec![SYNTH_NODATA; h.len()];
    for i in 0..h.len() {
        if nodata[i] {
            continue;
        }
        let c = h.cell(i);
        let z = heights[i];
        let mut down: Option<(f64, u8)> = None;
        let mut up: Option<(f64, (isize, isize))> = None;
        let mut masked_neighbor = None;
        for &(dx, dy) in &NEIGHBOR_ORDER {
            let Some(n) = h.offset(c, dx, dy) else {
                continue;
            };
            let j = h.index(n);
            if nodata[j] {
                masked_neighbor.get_or_insert((dx, dy));
                continue;
            }
            let run = if dx != 0 && dy != 0 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            };
            let slope = (z - heights[j]) / run;
            if slope > 0.0 && down.is_none_or(|(s, _)| slope > s) {
                down = Some((slope, offset_code(dx, dy).unwrap()));
            }
            if slope < 0.0 && up.is_none_or(|(s, _)| -slope > s) {
                up = Some((-slope, (dx, dy)));
            }
        }

        let code = if let Some((_, code)) = down {
            code
        } else if on_border(&h, c) {
            up.and_then(|(_, (dx, dy))| {
                h.offset(c, -dx, -dy)
                    .is_none()
                    .then(|| offset_code(-dx, -dy))
                    .flatten()
            })
            .or_else(|| first_exit_code(&h, c))
            .unwrap()
        } else if let Some((dx, dy)) = masked_neighbor {
            offset_code(dx, dy).unwrap()
        } else {
            return Err(Error::Pit { x: c.x, y: c.y });
        };
        codes[i] = code as i32;
    }
    D8Grid::new(h, SYNTH_NODATA, codes)
}

/// Plane falling one unit per column toward the east edge, optionally with a
/// single cell dug below everything around it.
pub fn slope_dem(ncols: usize, nrows: usize, pit: Option<CellIndex>) -> Vec<f64> {
    let mut z: Vec<f64> = (0..ncols * nrows)
        .map(|i| (ncols - 1 - i % ncols) as f64)
        .collect();
    if let Some(p) = pit {
        if p.x < ncols && p.y < nrows {
            z[p.y * ncols + p.x] = -10.0;
        }
    }
    z
}

/// Heights equal to the Euclidean distance from `outlet`.
pub fn cone_dem(ncols: usize, nrows: usize, outlet: CellIndex) -> Vec<f64> {
    (0..ncols * nrows)
        .map(|i| {
            let c = CellIndex::new(i % ncols, i / ncols);
            (dist2(c, outlet) as f64).sqrt()
        })
        .collect()
}
