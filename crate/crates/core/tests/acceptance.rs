//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{check, within_read_bound, Outcome};
use watershed_core::bench::{
    cells_for_area, fit_power_law, fit_records, predict_marches, resolution_scale_factor,
    run_benchmark, sample_pour_points, write_records_csv, REFERENCE_FIT,
};
use watershed_core::grid::CellIndex;
use watershed_core::oracle::flood_fill_watershed;
use watershed_core::synth::{gen_cone, gen_random_forest};
use watershed_core::{compute_mns, delineate, read_mns, write_mns, D8Grid, MnsGrid};

const CRIT1_TIME_LIMIT: Duration = Duration::from_secs(60);
const CRIT4_TIME_LIMIT: Duration = Duration::from_secs(10);
const CRIT4_MIN_REDUCTION: f64 = 0.95;
const CRIT5_SAMPLES_PER_GRID: usize = 100;
const CRIT5_GRIDS: u64 = 5;
const CRIT5_MIN_R2: f64 = 0.9;
const CRIT5_RECOVERY_TOL: f64 = 1e-9;
const CRIT6_RANGE: (f64, f64) = (5.0e5, 1.5e6);
const FOREST_ROOT_FRACTION: f64 = 0.02;

fn report(results: &mut Vec<bool>, n: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} [{tag}] {name}: {detail}");
    results.push(pass);
}

fn labeled(g: D8Grid) -> (D8Grid, MnsGrid) {
    let (m, _) = compute_mns(&g).expect("labels");
    (g, m)
}

fn criterion_grids() -> Vec<(String, D8Grid, MnsGrid)> {
    let mut grids = vec![
        (
            "cone 16x16".to_string(),
            gen_cone(16, 16, CellIndex::new(8, 8)).unwrap(),
        ),
        (
            "cone 64x64".to_string(),
            gen_cone(64, 64, CellIndex::new(32, 63)).unwrap(),
        ),
    ];
    for seed in 1..=20 {
        grids.push((
            format!("forest 32x32 seed {seed}"),
            gen_random_forest(32, 32, seed, FOREST_ROOT_FRACTION).unwrap(),
        ));
    }
    grids
        .into_iter()
        .map(|(name, g)| {
            let (g, m) = labeled(g);
            (name, g, m)
        })
        .collect()
}

fn main() {
    let mut results = Vec::new();

    // 1 and 2 share the same delineations.
    let start = Instant::now();
    let grids = criterion_grids();
    let mut outcomes: Vec<(String, Outcome)> = Vec::new();
    for (name, g, m) in &grids {
        for v in g.valid_cells() {
            outcomes.push((name.clone(), check(g, m, v)));
        }
    }
    let elapsed = start.elapsed();
    let bad: Vec<_> = outcomes
        .iter()
        .filter(|(_, o)| !(o.equivalent && o.area_ok))
        .collect();
    let detail = match bad.first() {
        None => format!(
            "{} pour points, 100% pass, {:.2}s (limit {}s)",
            outcomes.len(),
            elapsed.as_secs_f64(),
            CRIT1_TIME_LIMIT.as_secs()
        ),
        Some((name, o)) => format!(
            "{} of {} failed, first at {name} ({}, {})",
            bad.len(),
            outcomes.len(),
            o.pour.x,
            o.pour.y
        ),
    };
    report(
        &mut results,
        1,
        "oracle equivalence",
        bad.is_empty() && elapsed < CRIT1_TIME_LIMIT,
        detail,
    );

    let violations = outcomes
        .iter()
        .filter(|(_, o)| !within_read_bound(o))
        .count();
    let worst_ratio = outcomes
        .iter()
        .map(|(_, o)| o.reads.face_reads as f64 / o.boundary_points as f64)
        .fold(0.0, f64::max);
    let worst_probes = outcomes
        .iter()
        .map(|(_, o)| o.reads.max_probes)
        .max()
        .unwrap_or(0);
    report(
        &mut results,
        2,
        "read bound",
        violations == 0,
        format!(
            "{violations} violations, max reads/point {worst_ratio:.2}, max probes per move {worst_probes}"
        ),
    );

    results.push(criterion_3(&grids));
    results.push(criterion_4());
    results.push(criterion_5());
    results.push(criterion_6());
    results.push(criterion_7());

    let failed = results.iter().filter(|&&p| !p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn mns_violations(g: &D8Grid) -> Vec<String> {
    let mut out = Vec::new();
    let (m, stats) = compute_mns(g).unwrap();
    let n = m.n_valid();
    let valid: Vec<CellIndex> = g.valid_cells().collect();

    let mut ds: Vec<u64> = valid.iter().map(|&c| m.d(c)).collect();
    ds.sort_unstable();
    if ds != (1..=n).collect::<Vec<_>>() {
        out.push("d is not a bijection onto 1..=n".into());
    }
    for &u in &valid {
        let (du, fu) = (m.d(u), m.f(u));
        for &v in &valid {
            let (dv, fv) = (m.d(v), m.f(v));
            let nested = (du <= dv && fv <= fu) || (dv <= du && fu <= fv);
            let disjoint = fu < dv || fv < du;
            if !(nested || disjoint) {
                out.push(format!("intervals of {u:?} and {v:?} cross"));
            }
        }
    }
    for &v in &valid {
        let (cells, _) = flood_fill_watershed(g, v).unwrap();
        let max_d = cells.iter().map(|c| m.d(c)).max().unwrap();
        if max_d != m.f(v) {
            out.push(format!("f{v:?} = {} but subtree max d = {max_d}", m.f(v)));
        }
    }
    if stats.pushes != n || stats.pops != n || stats.cells_labeled != n {
        out.push(format!("stack counts {stats:?} for {n} cells"));
    }
    let mut a = Vec::new();
    write_mns(&m, &mut a).unwrap();
    let back = read_mns(a.as_slice()).unwrap();
    let mut b = Vec::new();
    write_mns(&back, &mut b).unwrap();
    if back != m || a != b || a.len() != m.encoded_len() {
        out.push("MNS file round trip differs".into());
    }
    out
}

fn criterion_3(grids: &[(String, D8Grid, MnsGrid)]) -> bool {
    let mut violations = Vec::new();
    for (name, g, _) in grids {
        violations.extend(
            mns_violations(g)
                .into_iter()
                .map(|v| format!("{name}: {v}")),
        );
    }
    let detail = match violations.first() {
        None => format!("{} grids, 0 violations", grids.len()),
        Some(first) => format!("{} violations, first: {first}", violations.len()),
    };
    let pass = violations.is_empty();
    println!(
        "criterion 3 [{}] MNS invariants: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn criterion_4() -> bool {
    let start = Instant::now();
    let outlet = CellIndex::new(256, 511);
    let g = gen_cone(512, 512, outlet).unwrap();
    let (m, _) = compute_mns(&g).unwrap();
    let (poly, hsm) = delineate(&g, &m, outlet).unwrap();
    let (cells, base) = flood_fill_watershed(&g, outlet).unwrap();
    let elapsed = start.elapsed();
    let reduction = 1.0 - hsm.face_reads as f64 / base.face_reads as f64;
    let pass =
        cells.len() == 512 * 512 && reduction >= CRIT4_MIN_REDUCTION && elapsed < CRIT4_TIME_LIMIT;
    println!(
        "criterion 4 [{}] read reduction: area {} cells, boundary {} points, {} march reads vs {} baseline reads, reduction {:.4} (min {CRIT4_MIN_REDUCTION}), {:.2}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        cells.len(),
        poly.len(),
        hsm.face_reads,
        base.face_reads,
        reduction,
        elapsed.as_secs_f64(),
        CRIT4_TIME_LIMIT.as_secs()
    );
    pass
}

fn criterion_5() -> bool {
    let exact: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0]
        .iter()
        .map(|&x| (x, 2.0 * x.powf(1.5)))
        .collect();
    let f = fit_power_law(&exact).unwrap();
    let rel = ((f.c - 2.0) / 2.0).abs().max(((f.b - 1.5) / 1.5).abs());
    let recovered = rel <= CRIT5_RECOVERY_TOL && (f.r2 - 1.0).abs() <= CRIT5_RECOVERY_TOL;

    let mut records = Vec::new();
    for seed in 1..=CRIT5_GRIDS {
        let g = gen_random_forest(128, 128, seed, FOREST_ROOT_FRACTION).unwrap();
        let (m, _) = compute_mns(&g).unwrap();
        let pts = sample_pour_points(&g, CRIT5_SAMPLES_PER_GRID, seed);
        records.extend(run_benchmark(&g, &m, &pts).unwrap());
    }
    let sweep = fit_records(&records).unwrap();
    let pass = recovered && sweep.b > 1.0 && sweep.b < 2.0 && sweep.r2 > CRIT5_MIN_R2;
    println!(
        "criterion 5 [{}] power-law fit: noiseless relative error {rel:.2e}; sweep of {} records gives c={:.4} b={:.4} r2={:.4} (b in (1,2), r2 > {CRIT5_MIN_R2})",
        if pass { "PASS" } else { "FAIL" },
        records.len(),
        sweep.c,
        sweep.b,
        sweep.r2
    );
    pass
}

fn criterion_6() -> bool {
    let area_m2 = 6.1e6 * 1.0e6;
    let cells = cells_for_area(area_m2, 30.0);
    let marches = predict_marches(&REFERENCE_FIT, cells);
    let scale = resolution_scale_factor(30.0, 1.0);
    let pass = marches >= CRIT6_RANGE.0 && marches <= CRIT6_RANGE.1 && scale == 900.0;
    println!(
        "criterion 6 [{}] extrapolation: {cells:.3e} cells -> {marches:.3e} marches (range [{:.1e}, {:.1e}]), scale factor {scale}",
        if pass { "PASS" } else { "FAIL" },
        CRIT6_RANGE.0,
        CRIT6_RANGE.1
    );
    pass
}

fn run_once() -> (Vec<u8>, Vec<String>, Vec<u8>) {
    let g = gen_random_forest(48, 40, 99, FOREST_ROOT_FRACTION).unwrap();
    let (m, _) = compute_mns(&g).unwrap();
    let mut mns_bytes = Vec::new();
    write_mns(&m, &mut mns_bytes).unwrap();
    let pts = sample_pour_points(&g, 60, 5);
    let polys = pts
        .iter()
        .map(|&v| format!("{:?}", delineate(&g, &m, v).unwrap().0.points()))
        .collect();
    let mut csv = Vec::new();
    write_records_csv(&run_benchmark(&g, &m, &pts).unwrap(), &mut csv).unwrap();
    (mns_bytes, polys, csv)
}

fn criterion_7() -> bool {
    let a = run_once();
    let b = run_once();
    let pass = a == b;
    println!(
        "criterion 7 [{}] determinism: MNS {} bytes, {} polygons, CSV {} bytes identical across runs",
        if pass { "PASS" } else { "FAIL" },
        a.0.len(),
        a.1.len(),
        a.2.len()
    );
    pass
}
