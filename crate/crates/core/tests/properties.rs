mod common;

use proptest::prelude::*;
use watershed_core::grid::{offset_code, CellIndex, GridHeader, NEIGHBOR_ORDER};
use watershed_core::oracle::{count_holes, flood_fill_watershed};
use watershed_core::synth::{gen_from_dem, gen_random_forest};
use watershed_core::{
    compute_mns, parse_ascii_grid, read_mns, serialize_ascii_grid, write_mns, D8Grid,
};

const ND: i32 = -1;

/// Acyclic grid with arbitrary shapes: each cell drains to a random
/// neighbour of lower rank, or off-grid / becomes nodata when it has none.
fn ranked_grid(ncols: usize, nrows: usize, ranks: &[u32], picks: &[u8], holes: &[bool]) -> D8Grid {
    let h = GridHeader::new(ncols, nrows);
    let codes = (0..h.len())
        .map(|i| {
            if holes[i] {
                return ND;
            }
            let c = h.cell(i);
            let lower: Vec<(isize, isize)> = NEIGHBOR_ORDER
                .iter()
                .copied()
                .filter(|&(dx, dy)| match h.offset(c, dx, dy) {
                    None => true,
                    Some(n) => {
                        let j = h.index(n);
                        !holes[j] && (ranks[j], j) < (ranks[i], i)
                    }
                })
                .collect();
            if lower.is_empty() {
                return ND;
            }
            let (dx, dy) = lower[picks[i] as usize % lower.len()];
            offset_code(dx, dy).unwrap() as i32
        })
        .collect();
    D8Grid::new(h, ND, codes).unwrap()
}

fn ranked_strategy() -> impl Strategy<Value = D8Grid> {
    (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
        let n = w * h;
        (
            prop::collection::vec(0u32..6, n),
            prop::collection::vec(any::<u8>(), n),
            prop::collection::vec(prop::bool::weighted(0.1), n),
        )
            .prop_map(move |(r, p, o)| ranked_grid(w, h, &r, &p, &o))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forest_labels_are_laminar(w in 1usize..20, h in 1usize..20, seed: u64) {
        let g = gen_random_forest(w, h, seed, 0.05).unwrap();
        let (m, stats) = compute_mns(&g).unwrap();
        let n = m.n_valid();
        prop_assert_eq!(stats.pushes, n);
        prop_assert_eq!(stats.pops, n);
        let mut ds: Vec<u64> = g.valid_cells().map(|c| m.d(c)).collect();
        ds.sort_unstable();
        prop_assert_eq!(ds, (1..=n).collect::<Vec<_>>());
        for u in g.valid_cells() {
            for v in g.valid_cells() {
                let (a, b) = (m.interval(u).unwrap(), m.interval(v).unwrap());
                let nested = (a.discovery <= b.discovery && b.finish <= a.finish)
                    || (b.discovery <= a.discovery && a.finish <= b.finish);
                prop_assert!(nested || a.finish < b.discovery || b.finish < a.discovery);
            }
        }
    }

    #[test]
    fn forest_watersheds_have_no_holes(w in 1usize..24, h in 1usize..24, seed: u64) {
        let g = gen_random_forest(w, h, seed, 0.02).unwrap();
        for v in g.valid_cells() {
            let (cells, _) = flood_fill_watershed(&g, v).unwrap();
            prop_assert_eq!(count_holes(&cells), 0, "hole under {:?}", v);
        }
    }

    #[test]
    fn march_matches_flood_fill_on_forests(seed: u64, x in 0usize..32, y in 0usize..32) {
        let g = gen_random_forest(32, 32, seed, 0.02).unwrap();
        let (m, _) = compute_mns(&g).unwrap();
        let o = common::check(&g, &m, CellIndex::new(x, y));
        prop_assert!(o.equivalent && o.area_ok);
        prop_assert!(common::within_read_bound(&o));
    }

    #[test]
    fn march_matches_flood_fill_on_hole_free_shapes(g in ranked_strategy()) {
        let Ok((m, _)) = compute_mns(&g) else {
            // Everything was masked out.
            prop_assert_eq!(g.valid_count(), 0);
            return Ok(());
        };
        for v in g.valid_cells() {
            if !common::hole_free(&g, v) {
                continue;
            }
            let o = common::check(&g, &m, v);
            prop_assert!(o.equivalent, "outline mismatch at {:?} in {:?}", v, g.codes());
            prop_assert!(o.area_ok, "area mismatch at {:?}", v);
            prop_assert!(common::within_read_bound(&o));
        }
    }

    #[test]
    fn ascii_and_mns_round_trip(g in ranked_strategy()) {
        let back = parse_ascii_grid(&serialize_ascii_grid(&g)).unwrap();
        prop_assert_eq!(&back, &g);
        if let Ok((m, _)) = compute_mns(&g) {
            let mut bytes = Vec::new();
            write_mns(&m, &mut bytes).unwrap();
            prop_assert_eq!(read_mns(bytes.as_slice()).unwrap(), m);
        }
    }

    #[test]
    fn distinct_heights_give_acyclic_grids(w in 1usize..12, h in 1usize..12, seed: u64) {
        // Heights rise toward the middle so no interior cell is a pit.
        let z: Vec<f64> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let edge = x.min(y).min(w - 1 - x).min(h - 1 - y) as f64;
                edge + ((seed.wrapping_mul(i as u64 + 1) % 97) as f64) / 1000.0
            })
            .collect();
        let g = gen_from_dem(w, h, &z, &vec![false; w * h]).unwrap();
        g.validate_acyclic().unwrap();
        prop_assert!(compute_mns(&g).is_ok());
    }
}
