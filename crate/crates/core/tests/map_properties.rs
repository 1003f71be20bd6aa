mod common;

use otcp::entropic_map::{EntropicMap, MapOptions};
use otcp::sphere_grid::{build_spherical_grid, inverse_normal_cdf, DirectionMode};
use otcp::Matrix;

fn opts() -> MapOptions {
    MapOptions::default()
}

#[test]
fn permutation_invariance() {
    let src = common::banana(300, 1);
    let n = src.nrows();
    // deterministic scramble
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let shuffled = src.select_rows(&perm);
    let grid = build_spherical_grid(512, 2, None, DirectionMode::LowDiscrepancy, 0).unwrap();
    let a = EntropicMap::fit(&src, &grid, opts()).unwrap();
    let b = EntropicMap::fit(&shuffled, &grid, opts()).unwrap();
    for z in [[0.0, 0.0], [1.5, -0.7], [-3.0, 8.0], [40.0, 40.0]] {
        let (ta, tb) = (a.forward(&z).unwrap(), b.forward(&z).unwrap());
        for k in 0..2 {
            assert!((ta[k] - tb[k]).abs() <= 1e-10, "{z:?}: {ta:?} vs {tb:?}");
        }
    }
}

#[test]
fn one_dimensional_map_is_monotone() {
    let n = 1000;
    let pts: Vec<[f64; 1]> = (0..n).map(|i| [inverse_normal_cdf((i as f64 + 0.5) / n as f64).unwrap()]).collect();
    let src = Matrix::from_rows(&pts).unwrap();
    let grid = build_spherical_grid(200, 1, None, DirectionMode::LowDiscrepancy, 0).unwrap();
    let map = EntropicMap::fit(&src, &grid, MapOptions { epsilon: 0.05, ..opts() }).unwrap();
    let mut last = f64::NEG_INFINITY;
    for k in 0..=800 {
        let z = -4.0 + 8.0 * k as f64 / 800.0;
        let t = map.forward(&[z]).unwrap()[0];
        assert!(t >= last - 1e-12, "z={z}");
        last = t;
    }
}

#[test]
fn grid_round_trip_is_close() {
    let src = common::correlated_gaussian(1000, 0.3, 2);
    let grid = build_spherical_grid(4096, 2, None, DirectionMode::LowDiscrepancy, 0).unwrap();
    let map = EntropicMap::fit(&src, &grid, opts()).unwrap();
    let mut total = 0.0;
    for u in grid.points.rows_iter() {
        let back = map.forward(&map.inverse(u).unwrap()).unwrap();
        total += ((back[0] - u[0]).powi(2) + (back[1] - u[1]).powi(2)).sqrt();
    }
    let mean = total / grid.points.nrows() as f64;
    assert!(mean <= 0.2, "mean round-trip error {mean}");
}

#[test]
fn symmetric_cloud_center_has_small_rank() {
    // point-symmetric cloud: every row paired with its negation
    let half = common::correlated_gaussian(400, 0.0, 3);
    let mut rows: Vec<[f64; 2]> = Vec::new();
    for r in half.rows_iter() {
        rows.push([r[0], r[1]]);
        rows.push([-r[0], -r[1]]);
    }
    let src = Matrix::from_rows(&rows).unwrap();
    let grid = build_spherical_grid(1024, 2, None, DirectionMode::LowDiscrepancy, 0).unwrap();
    let map = EntropicMap::fit(&src, &grid, opts()).unwrap();
    assert!(map.ot_rank(&[0.0, 0.0]).unwrap() <= 0.1);
}

#[test]
fn ranks_of_fit_points_are_in_unit_interval() {
    let src = common::banana(500, 4);
    let grid = build_spherical_grid(1024, 2, None, DirectionMode::Iid, 9).unwrap();
    let map = EntropicMap::fit(&src, &grid, opts()).unwrap();
    for r in map.ot_ranks(&src).unwrap() {
        assert!((0.0..=1.0).contains(&r));
    }
}

#[test]
fn ranks_are_roughly_uniform_on_fresh_data() {
    // the pushforward radius of the spherical uniform is uniform on [0, 1]
    let fit = common::correlated_gaussian(2000, 0.5, 5);
    let fresh = common::correlated_gaussian(2000, 0.5, 6);
    let grid = build_spherical_grid(4096, 2, None, DirectionMode::LowDiscrepancy, 0).unwrap();
    let map = EntropicMap::fit(&fit, &grid, opts()).unwrap();
    let mut ranks = map.ot_ranks(&fresh).unwrap();
    ranks.sort_by(f64::total_cmp);
    let n = ranks.len() as f64;
    let ks = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| ((i + 1) as f64 / n - r).abs().max((r - i as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(ks <= 0.1, "KS statistic {ks}");
}

#[test]
fn saved_map_answers_identically() {
    let src = common::banana(200, 7);
    let grid = build_spherical_grid(256, 2, None, DirectionMode::LowDiscrepancy, 0).unwrap();
    let map = EntropicMap::fit(&src, &grid, opts()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.json");
    map.save_json(&path).unwrap();
    let back = EntropicMap::load_json(&path).unwrap();
    for z in [[0.1, 0.2], [-2.0, 5.0]] {
        assert_eq!(map.forward(&z).unwrap(), back.forward(&z).unwrap());
        assert_eq!(map.inverse(&z).unwrap(), back.inverse(&z).unwrap());
    }
}
