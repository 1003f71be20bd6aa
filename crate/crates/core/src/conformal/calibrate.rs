use std::path::Path;

use serde::{Deserialize, Serialize};

use super::score::ScoreFunction;
use crate::data_io::Dataset;
use crate::error::{Error, Result};

pub const PREDICTOR_FORMAT_VERSION: u32 = 1;

/// Rank `ceil((1 - alpha)(n + 1))` of the conformal quantile (1-based).
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    // (1 - alpha)(n + 1) is often an integer up to rounding noise
    ((1.0 - alpha) * (n as f64 + 1.0) - 1e-9).ceil().max(1.0) as usize
}

/// The `ceil((1 - alpha)(n + 1))`-th smallest score, or `+inf` when that rank exceeds `n`.
pub fn conformal_threshold(cal_scores: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if cal_scores.is_empty() {
        return Err(Error::Param("need at least one calibration score".into()));
    }
    let mut s = cal_scores.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(threshold_sorted(&s, alpha))
}

fn threshold_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let k = conformal_rank(sorted.len(), alpha);
    if k > sorted.len() {
        f64::INFINITY
    } else {
        sorted[k - 1]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Param(format!("alpha must be in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Empirical CDF of `cal_scores` at `test_score`: fraction of scores `<= test_score`.
pub fn pit_values(cal_scores: &[f64], test_score: f64) -> f64 {
    if cal_scores.is_empty() {
        return 0.0;
    }
    cal_scores.iter().filter(|&&s| s <= test_score).count() as f64 / cal_scores.len() as f64
}

/// A score function with its calibrated threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibratedPredictor {
    pub score_fn: ScoreFunction,
    pub threshold: f64,
    pub alpha: f64,
    pub n_cal: usize,
    /// Calibration scores in ascending order; lets the level change without rescoring.
    pub cal_scores: Vec<f64>,
    /// When set, membership is `F_n(S) in [a, b]` instead of `S <= threshold`.
    pub interval: Option<(f64, f64)>,
}

impl CalibratedPredictor {
    pub fn from_scores(score_fn: ScoreFunction, mut cal_scores: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if cal_scores.is_empty() {
            return Err(Error::Param("need at least one calibration score".into()));
        }
        if cal_scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Param("calibration scores contain NaN".into()));
        }
        cal_scores.sort_by(f64::total_cmp);
        Ok(Self {
            score_fn,
            threshold: threshold_sorted(&cal_scores, alpha),
            alpha,
            n_cal: cal_scores.len(),
            cal_scores,
            interval: None,
        })
    }

    /// Same calibration scores at another miscoverage level.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let mut out = self.clone();
        out.alpha = alpha;
        out.threshold = threshold_sorted(&self.cal_scores, alpha);
        Ok(out)
    }

    /// Switches to the PIT-interval membership rule `a <= F_n(S) <= b`.
    pub fn with_interval(mut self, a: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return Err(Error::Param(format!("interval endpoints must satisfy 0 <= a <= b <= 1, got ({a}, {b})")));
        }
        self.interval = Some((a, b));
        Ok(self)
    }

    /// Default PIT endpoints `(0, 1 - alpha)`.
    pub fn default_interval(&self) -> (f64, f64) {
        (0.0, 1.0 - self.alpha)
    }

    pub fn contains(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        let s = self.score_fn.eval(x, y)?;
        Ok(self.admits(s))
    }

    /// Membership decision for an already computed score.
    pub fn admits(&self, score: f64) -> bool {
        match self.interval {
            Some((a, b)) => {
                let u = pit_values(&self.cal_scores, score);
                a <= u && u <= b
            }
            None => score <= self.threshold,
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = PredictorArtifact {
            version: PREDICTOR_FORMAT_VERSION,
            predictor: self.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&doc)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let doc: PredictorArtifact = serde_json::from_slice(&std::fs::read(path)?)?;
        if doc.version != PREDICTOR_FORMAT_VERSION {
            return Err(Error::Param(format!(
                "unsupported predictor format version {} (expected {PREDICTOR_FORMAT_VERSION})",
                doc.version
            )));
        }
        Ok(doc.predictor)
    }
}

#[derive(Serialize, Deserialize)]
struct PredictorArtifact {
    version: u32,
    predictor: CalibratedPredictor,
}

/// Scores every calibration pair and stores the conformal threshold.
///
/// Refuses a calibration set the score function was fitted on unless
/// `allow_overlap` is set.
pub fn calibrate(score_fn: ScoreFunction, calib: &Dataset, alpha: f64, allow_overlap: bool) -> Result<CalibratedPredictor> {
    if !allow_overlap && score_fn.fitted_on.iter().any(|o| o == &calib.origin) {
        return Err(Error::Provenance(calib.origin.clone()));
    }
    let scores = score_fn.eval_dataset(calib)?;
    CalibratedPredictor::from_scores(score_fn, scores, alpha)
}
