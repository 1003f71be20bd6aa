mod common;

use std::process::Command;

use otcp::bench::{
    export_contours, region_size_mc, run_benchmark, sweep, sweep_csv, BenchConfig, Bounds, DataSource,
    SWEEP_EPSILONS, SWEEP_TARGETS,
};
use otcp::conformal::{region_contour_2d, Region2D, ScoreKind};
use otcp::data_io::SynthKind;

fn quick(kind: SynthKind, methods: Vec<ScoreKind>, seeds: Vec<u64>) -> BenchConfig {
    let mut cfg = BenchConfig {
        data: DataSource::Synthetic { kind, n: 400, d: 2, p: 1 },
        methods,
        seeds,
        mc_samples: 4000,
        max_region_points: 20,
        ..Default::default()
    };
    cfg.score.otcp.targets = 256;
    cfg
}

#[test]
fn volume_estimator_is_unbiased_for_a_disc() {
    let r = 0.8;
    let pred = common::disc_predictor(r);
    let bounds = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let reps: Vec<f64> = (0..100).map(|s| region_size_mc(&pred, &[0.5], &bounds, 10_000, s).unwrap()).collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let exact = std::f64::consts::PI * r * r;
    assert!((mean / exact - 1.0).abs() <= 0.01, "{mean} vs {exact}");
}

#[test]
fn zero_threshold_has_zero_volume() {
    let pred = common::disc_predictor(0.0);
    let bounds = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    assert_eq!(region_size_mc(&pred, &[0.5], &bounds, 5000, 0).unwrap(), 0.0);
}

#[test]
fn single_cell_report_has_one_row() {
    let report = run_benchmark(&quick(SynthKind::gaussian_identity(), vec![ScoreKind::MergeL2], vec![4])).unwrap();
    assert_eq!(report.rows.len(), 1);
    let s = report.summary_for(ScoreKind::MergeL2).unwrap();
    assert_eq!(s.coverage_mean, report.rows[0].coverage);
}

#[test]
fn repeated_seed_gives_identical_rows() {
    let report = run_benchmark(&quick(SynthKind::banana(), vec![ScoreKind::Otcp, ScoreKind::McpMax], vec![3, 3])).unwrap();
    let strip = |r: &otcp::bench::RunRow| {
        let mut r = r.clone();
        r.fit_ms = 0.0;
        r.calibrate_ms = 0.0;
        r.predict_ms = 0.0;
        r
    };
    let otcp: Vec<_> = report.rows.iter().filter(|r| r.method == ScoreKind::Otcp).map(strip).collect();
    assert_eq!(otcp.len(), 2);
    assert_eq!(otcp[0], otcp[1]);
}

#[test]
fn whitening_shrinks_anisotropic_regions() {
    let kind = SynthKind::Gaussian { cov: vec![vec![4.0, 0.0], vec![0.0, 0.25]] };
    let cfg = BenchConfig {
        data: DataSource::Synthetic { kind, n: 2000, d: 2, p: 1 },
        methods: vec![ScoreKind::MergeL2, ScoreKind::MergeMahalanobis],
        seeds: (0..3).collect(),
        ..Default::default()
    };
    let report = run_benchmark(&cfg).unwrap();
    let l2 = report.summary_for(ScoreKind::MergeL2).unwrap().size_mean;
    let maha = report.summary_for(ScoreKind::MergeMahalanobis).unwrap().size_mean;
    assert!(maha < l2, "mahalanobis {maha} vs l2 {l2}");
}

#[test]
fn sweep_defaults_and_single_cell_consistency() {
    assert_eq!(SWEEP_EPSILONS, [0.001, 0.01, 0.1, 1.0]);
    assert_eq!(SWEEP_TARGETS, [4096, 8192, 16384, 32768]);
    let cfg = quick(SynthKind::banana(), vec![ScoreKind::Otcp], vec![1]);
    let swept = sweep(&cfg, &[0.1], &[256]).unwrap();
    let direct = run_benchmark(&cfg).unwrap();
    assert_eq!(swept.rows.len(), 1);
    let (a, b) = (&swept.rows[0], &direct.rows[0]);
    assert_eq!((a.coverage, a.mean_size, a.threshold), (b.coverage, b.mean_size, b.threshold));
    let csv = sweep_csv(&swept);
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn exported_contours_are_nested_and_round_trip() {
    let cfg = quick(SynthKind::banana(), vec![ScoreKind::Otcp], vec![0]);
    let cell = otcp::bench::fit_cell(&cfg, ScoreKind::Otcp, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let xs = vec![vec![0.25], vec![0.75]];
    let files = export_contours(&cell.predictor, &xs, &[0.1, 0.5], 64, dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    for (i, x) in xs.iter().enumerate() {
        let wide = Region2D::read_csv_vertices(dir.path().join(format!("contour_x{i}_alpha0.1.csv"))).unwrap();
        let narrow = Region2D::read_csv_vertices(dir.path().join(format!("contour_x{i}_alpha0.5.csv"))).unwrap();
        assert!(otcp::conformal::polygon_area(&narrow) <= otcp::conformal::polygon_area(&wide));
        let direct = region_contour_2d(&cell.predictor.with_alpha(0.1).unwrap(), x, 64).unwrap();
        assert_eq!(direct.contour.len(), wide.len());
        for (a, b) in direct.contour.iter().zip(&wide) {
            assert!((a[0] - b[0]).abs() <= 1e-9 && (a[1] - b[1]).abs() <= 1e-9);
        }
    }
}

#[test]
fn cli_end_to_end() {
    let exe = env!("CARGO_BIN_EXE_otcp");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let out = Command::new(exe)
        .args(["synth", "--kind", "banana", "--n", "300", "--seed", "2", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let config = dir.path().join("config.json");
    let json = serde_json::json!({
        "data": { "csv": { "path": data, "d_out": 2 } },
        "methods": ["merge_l2", "otcp"],
        "seeds": [0, 1],
        "mc_samples": 2000,
        "max_region_points": 5,
        "score": { "otcp": { "targets": 256 } },
    });
    std::fs::write(&config, json.to_string()).unwrap();
    let report_dir = dir.path().join("report");
    let out = Command::new(exe)
        .args(["bench", "run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&report_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.csv", "timings.csv", "summary.json"] {
        assert!(report_dir.join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 5);

    let model = dir.path().join("model.json");
    let out = Command::new(exe)
        .args(["fit", "--method", "otcp", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&model)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let contours = dir.path().join("contours");
    let out = Command::new(exe)
        .args(["contour", "--x", "0.5", "--alphas", "0.1,0.5", "--n-angles", "32", "--model"])
        .arg(&model)
        .arg("--out")
        .arg(&contours)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(contours.join("contour_x0_alpha0.1.csv").exists());

    let out = Command::new(exe).args(["synth", "--kind", "spiral", "--n", "10", "--out", "x.csv"]).output().unwrap();
    assert!(!out.status.success());
}
