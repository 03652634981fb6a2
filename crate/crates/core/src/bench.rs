//! Pour-point sampling, per-watershed cost records, power-law fitting and
//! the self-check used by `wsmarch verify`.

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellIndex, D8Grid};
use crate::march::delineate;
use crate::mns::MnsGrid;
use crate::oracle::{equivalent, flood_fill_watershed};

/// Cost of delineating one watershed both ways.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BenchmarkRecord {
    pub pour_x: usize,
    pub pour_y: usize,
    pub area_cells: u64,
    pub boundary_points: u64,
    pub hsm_face_reads: u64,
    pub baseline_cell_reads: u64,
}

/// `y = c * x^b`, fitted by least squares on `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub c: f64,
    pub b: f64,
    /// Coefficient of determination in log space.
    pub r2: f64,
    pub n_points: usize,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.c * x.powf(self.b)
    }

    /// Inverse of [`PowerLawFit::eval`].
    pub fn invert(&self, y: f64) -> f64 {
        (y / self.c).powf(1.0 / self.b)
    }
}

/// Published fit of baseline reads (y) against march length (x) over
/// 14,718 catchments on a 30 m grid.
pub const REFERENCE_FIT: PowerLawFit = PowerLawFit {
    c: 0.1967,
    b: 1.7986,
    r2: 0.98,
    n_points: 14_718,
};

/// Uniform sample without replacement of `n` valid cells (all of them when
/// `n` exceeds the count), returned in row-major order.
pub fn sample_pour_points(g: &D8Grid, n: usize, seed: u64) -> Vec<CellIndex> {
    let valid: Vec<CellIndex> = g.valid_cells().collect();
    let k = n.min(valid.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, valid.len(), k).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| valid[i]).collect()
}

/// Marches and floods from `v`, returning the cost of each.
pub fn measure(g: &D8Grid, m: &MnsGrid, v: CellIndex) -> Result<BenchmarkRecord> {
    let (poly, hsm) = delineate(g, m, v)?;
    let (cells, base) = flood_fill_watershed(g, v)?;
    Ok(BenchmarkRecord {
        pour_x: v.x,
        pour_y: v.y,
        area_cells: cells.len() as u64,
        boundary_points: poly.len() as u64,
        hsm_face_reads: hsm.face_reads,
        baseline_cell_reads: base.face_reads,
    })
}

/// [`measure`] for every pour point, in parallel; output order follows
/// `points`.
pub fn run_benchmark(
    g: &D8Grid,
    m: &MnsGrid,
    points: &[CellIndex],
) -> Result<Vec<BenchmarkRecord>> {
    points.par_iter().map(|&v| measure(g, m, v)).collect()
}

pub fn write_records_csv<W: Write>(records: &[BenchmarkRecord], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Fits `y = c * x^b` to positive pairs.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Fit(format!("non-positive sample ({x}, {y})")));
    }
    if points.len() < 3 {
        return Err(Error::Fit("need at least three samples".into()));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values are equal".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(PowerLawFit {
        c: a.exp(),
        b,
        r2,
        n_points: points.len(),
    })
}

/// Fit of baseline reads against boundary points over `records`.
pub fn fit_records(records: &[BenchmarkRecord]) -> Result<PowerLawFit> {
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.boundary_points as f64, r.baseline_cell_reads as f64))
        .collect();
    fit_power_law(&pairs)
}

/// March count whose baseline read count under `fit` equals `area_cells`.
pub fn predict_marches(fit: &PowerLawFit, area_cells: f64) -> f64 {
    fit.invert(area_cells)
}

/// Number of square cells of side `cellsize_m` covering `area_m2`.
pub fn cells_for_area(area_m2: f64, cellsize_m: f64) -> f64 {
    area_m2 / (cellsize_m * cellsize_m)
}

/// How many fine cells fit in one coarse cell.
pub fn resolution_scale_factor(coarse_m: f64, fine_m: f64) -> f64 {
    (coarse_m / fine_m).powi(2)
}

/// Outcome of checking a set of pour points against the flood-fill oracle.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub checked: usize,
    pub passed: usize,
    pub first_failure: Option<(CellIndex, String)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.passed == self.checked
    }
}

/// Compares the marched outline and label area with the flood fill for one
/// pour point. `Ok(())` when they agree.
pub fn check_pour_point(g: &D8Grid, m: &MnsGrid, v: CellIndex) -> std::result::Result<(), String> {
    let (poly, _) = delineate(g, m, v).map_err(|e| format!("march failed: {e}"))?;
    let (cells, _) = flood_fill_watershed(g, v).map_err(|e| format!("flood fill failed: {e}"))?;
    let label_area = m.area(v).unwrap_or(0);
    if label_area != cells.len() as u64 {
        return Err(format!(
            "label area {label_area} but flood fill found {} cells",
            cells.len()
        ));
    }
    if !equivalent(&poly, &cells) {
        return Err("boundary does not match flood-filled region".into());
    }
    let area = poly.signed_area();
    if area != cells.len() as i64 {
        return Err(format!(
            "polygon encloses {area} cells, expected {}",
            cells.len()
        ));
    }
    Ok(())
}

pub fn verify(g: &D8Grid, m: &MnsGrid, points: &[CellIndex]) -> VerifyReport {
    let results: Vec<_> = points
        .par_iter()
        .map(|&v| check_pour_point(g, m, v))
        .collect();
    let mut report = VerifyReport {
        checked: points.len(),
        ..Default::default()
    };
    for (&v, r) in points.iter().zip(results) {
        match r {
            Ok(()) => report.passed += 1,
            Err(msg) => {
                report.first_failure.get_or_insert((v, msg));
            }
        }
    }
    report
}
