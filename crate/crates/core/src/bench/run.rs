use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::BenchConfig;
use super::metrics::{marginal_coverage, region_size_mc, residual_extent, Bounds};
use crate::conformal::{calibrate, fit_score_function, region_contour_2d, CalibratedPredictor, ScoreKind};
use crate::data_io::{split_dataset, Dataset, SplitSpec};
use crate::error::{Error, Result};

/// Outcome of one (method, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: ScoreKind,
    pub seed: u64,
    pub epsilon: f64,
    pub targets: usize,
    pub coverage: f64,
    pub mean_size: f64,
    pub threshold: f64,
    pub n_cal: usize,
    pub n_test: usize,
    pub fit_ms: f64,
    pub calibrate_ms: f64,
    pub predict_ms: f64,
    pub error: Option<String>,
}

impl RunRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: ScoreKind,
    pub n_ok: usize,
    pub n_failed: usize,
    pub coverage_mean: f64,
    pub coverage_se: f64,
    pub size_mean: f64,
    pub size_se: f64,
    pub size_median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub alpha: f64,
    pub rows: Vec<RunRow>,
    pub summary: Vec<MethodSummary>,
}

/// Mean and standard error `std / sqrt(k)` (sample std, `k - 1` denominator).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

impl BenchReport {
    pub fn from_rows(alpha: f64, rows: Vec<RunRow>) -> Self {
        let mut methods: Vec<ScoreKind> = Vec::new();
        for r in &rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let summary = methods
            .into_iter()
            .map(|m| {
                let ok: Vec<&RunRow> = rows.iter().filter(|r| r.method == m && r.ok()).collect();
                let cov: Vec<f64> = ok.iter().map(|r| r.coverage).collect();
                let size: Vec<f64> = ok.iter().map(|r| r.mean_size).collect();
                let (coverage_mean, coverage_se) = mean_se(&cov);
                let (size_mean, size_se) = mean_se(&size);
                MethodSummary {
                    method: m,
                    n_ok: ok.len(),
                    n_failed: rows.iter().filter(|r| r.method == m && !r.ok()).count(),
                    coverage_mean,
                    coverage_se,
                    size_mean,
                    size_se,
                    size_median: median(&size),
                }
            })
            .collect();
        Self { alpha, rows, summary }
    }

    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| !r.ok())
    }

    pub fn summary_for(&self, method: ScoreKind) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Long-format CSV; timing columns only when `timing` is set.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut s = String::from("method,seed,epsilon,targets,coverage,size,threshold,n_cal,n_test,status");
        if timing {
            s.push_str(",fit_ms,calibrate_ms,predict_ms");
        }
        s.push('\n');
        for r in &self.rows {
            let status = match &r.error {
                None => "ok".to_owned(),
                Some(e) => format!("\"error: {}\"", e.replace('"', "'")),
            };
            let _ = write!(
                s,
                "{},{},{:?},{},{:?},{:?},{:?},{},{},{}",
                r.method, r.seed, r.epsilon, r.targets, r.coverage, r.mean_size, r.threshold, r.n_cal, r.n_test, status
            );
            if timing {
                let _ = write!(s, ",{:.3},{:.3},{:.3}", r.fit_ms, r.calibrate_ms, r.predict_ms);
            }
            s.push('\n');
        }
        s
    }

    /// Writes `report.csv` (deterministic), `timings.csv` and `summary.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let report = dir.join("report.csv");
        let timings = dir.join("timings.csv");
        let summary = dir.join("summary.json");
        std::fs::write(&report, self.to_csv(false))?;
        std::fs::write(&timings, self.to_csv(true))?;
        std::fs::write(&summary, serde_json::to_vec_pretty(self)?)?;
        Ok(vec![report, timings, summary])
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Fitted predictor plus the splits it came from.
pub struct FittedCell {
    pub predictor: CalibratedPredictor,
    pub calib: Dataset,
    pub test: Dataset,
    pub fit_ms: f64,
    pub calibrate_ms: f64,
}

/// Split, fit and calibrate one method for one seed.
pub fn fit_cell(cfg: &BenchConfig, method: ScoreKind, seed: u64) -> Result<FittedCell> {
    let ds = cfg.data.load(seed)?;
    let splits = split_dataset(&ds, &SplitSpec::new(cfg.fractions, seed)?)?;
    let aux = if cfg.fit_on_calib {
        &splits.calib
    } else {
        splits.ot_fit.as_ref().ok_or_else(|| {
            Error::Split("the transport-fit split is empty; give it a positive fraction or set fit_on_calib".into())
        })?
    };
    let t = Instant::now();
    let score_fn = fit_score_function(method, &splits.train, aux, cfg.alpha, &cfg.score)?;
    let fit_ms = ms(t);
    let t = Instant::now();
    let predictor = calibrate(score_fn, &splits.calib, cfg.alpha, cfg.fit_on_calib)?;
    let calibrate_ms = ms(t);
    Ok(FittedCell {
        predictor,
        calib: splits.calib,
        test: splits.test,
        fit_ms,
        calibrate_ms,
    })
}

/// Per-cell Monte-Carlo stream, independent of scheduling.
fn cell_seed(seed: u64, method: ScoreKind) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (method as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn run_cell(cfg: &BenchConfig, method: ScoreKind, seed: u64) -> RunRow {
    let mut row = RunRow {
        method,
        seed,
        epsilon: cfg.score.otcp.epsilon,
        targets: cfg.score.otcp.targets,
        coverage: f64::NAN,
        mean_size: f64::NAN,
        threshold: f64::NAN,
        n_cal: 0,
        n_test: 0,
        fit_ms: 0.0,
        calibrate_ms: 0.0,
        predict_ms: 0.0,
        error: None,
    };
    if method != ScoreKind::Otcp {
        row.epsilon = f64::NAN;
        row.targets = 0;
    }
    let result = (|| -> Result<()> {
        let cell = fit_cell(cfg, method, seed)?;
        row.fit_ms = cell.fit_ms;
        row.calibrate_ms = cell.calibrate_ms;
        row.threshold = cell.predictor.threshold;
        row.n_cal = cell.predictor.n_cal;
        row.n_test = cell.test.len();
        let t = Instant::now();
        row.coverage = marginal_coverage(&cell.predictor, &cell.test)?;
        row.mean_size = mean_region_size(cfg, &cell, cell_seed(seed, method))?;
        row.predict_ms = ms(t);
        Ok(())
    })();
    if let Err(e) = result {
        log::error!("{method} seed {seed}: {e}");
        row.error = Some(e.to_string());
    }
    row
}

/// Mean Monte-Carlo region size over the first `max_region_points` test points.
pub fn mean_region_size(cfg: &BenchConfig, cell: &FittedCell, mc_seed: u64) -> Result<f64> {
    let pred = &cell.predictor;
    let (rmin, rmax) = residual_extent(pred, &cell.calib)?;
    let n = cell.test.len().min(cfg.max_region_points.max(1));
    let size_at = |i: usize| -> Result<f64> {
        let x = cell.test.x(i);
        let bounds = Bounds::around(&pred.score_fn.center(x)?, &rmin, &rmax, cfg.bbox_inflation)?;
        region_size_mc(pred, x, &bounds, cfg.mc_samples, mc_seed)
    };
    if pred.score_fn.is_residual_based() {
        // region and sampling box are translates of fixed sets, and every
        // point reuses the same Monte-Carlo stream: the estimate is identical
        size_at(0)
    } else {
        let sizes: Vec<f64> = (0..n).map(size_at).collect::<Result<_>>()?;
        Ok(sizes.iter().sum::<f64>() / n as f64)
    }
}

/// Runs every (method, seed) cell; failures are recorded per row.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let cells: Vec<(ScoreKind, u64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.methods.iter().map(move |&m| (m, s)))
        .collect();
    let rows: Vec<RunRow> = cells.par_iter().map(|&(m, s)| run_cell(cfg, m, s)).collect();
    Ok(BenchReport::from_rows(cfg.alpha, rows))
}

/// One OT-CP benchmark per `(epsilon, targets)` pair, concatenated.
pub fn sweep(cfg: &BenchConfig, eps_list: &[f64], m_list: &[usize]) -> Result<BenchReport> {
    if eps_list.is_empty() || m_list.is_empty() {
        return Err(Error::Param("sweep lists must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        for &m in m_list {
            let mut c = cfg.clone();
            c.methods = vec![ScoreKind::Otcp];
            c.score.otcp.epsilon = eps;
            c.score.otcp.targets = m;
            log::info!("sweep cell eps={eps} m={m}");
            rows.extend(run_benchmark(&c)?.rows);
        }
    }
    Ok(BenchReport::from_rows(cfg.alpha, rows))
}

/// Default ablation axes.
pub const SWEEP_EPSILONS: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const SWEEP_TARGETS: [usize; 4] = [4096, 8192, 16384, 32768];

/// Long-format sweep table `epsilon,targets,seed,coverage,size,time_ms`.
pub fn sweep_csv(report: &BenchReport) -> String {
    let mut s = String::from("epsilon,targets,seed,coverage,size,time_ms\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:?},{},{},{:?},{:?},{:.3}",
            r.epsilon,
            r.targets,
            r.seed,
            r.coverage,
            r.mean_size,
            r.fit_ms + r.calibrate_ms + r.predict_ms
        );
    }
    s
}

/// Writes one polygon CSV per `(x, alpha)`; warns when a smaller alpha does
/// not give a larger region.
pub fn export_contours(
    pred: &CalibratedPredictor,
    xs: &[Vec<f64>],
    alphas: &[f64],
    n_angles: usize,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut order: Vec<f64> = alphas.to_vec();
    order.sort_by(f64::total_cmp);
    let mut files = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let mut last_area = f64::INFINITY;
        for &a in &order {
            let region = region_contour_2d(&pred.with_alpha(a)?, x, n_angles)?;
            let area = region.area();
            if area > last_area * (1.0 + 1e-9) {
                log::warn!("contour at x#{i}: alpha={a} region (area {area}) is larger than at a smaller alpha");
            }
            last_area = area;
            let path = out_dir.join(format!("contour_x{i}_alpha{a}.csv"));
            region.write_csv(&path)?;
            files.push(path);
        }
    }
    Ok(files)
}
