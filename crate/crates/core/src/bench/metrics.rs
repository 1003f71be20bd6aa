use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conformal::CalibratedPredictor;
use crate::data_io::Dataset;
use crate::error::{Error, Result};

/// Fraction of test pairs inside their prediction region.
pub fn marginal_coverage(pred: &CalibratedPredictor, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Param("empty test set".into()));
    }
    let scores = pred.score_fn.eval_dataset(test)?;
    Ok(scores.iter().filter(|&&s| pred.admits(s)).count() as f64 / test.len() as f64)
}

/// Axis-aligned sampling box for region-size estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension("bounds need matching nonempty corners".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h - l > 0.0) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Param(format!("degenerate sampling box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// `center + inflation * [rmin, rmax]` per dimension.
    pub fn around(center: &[f64], rmin: &[f64], rmax: &[f64], inflation: f64) -> Result<Self> {
        let lo = center.iter().zip(rmin).map(|(c, r)| c + inflation * r).collect();
        let hi = center.iter().zip(rmax).map(|(c, r)| c + inflation * r).collect();
        Self::new(lo, hi)
    }
}

/// Per-dimension `(min, max)` of calibration residuals `y - center(x)`.
pub fn residual_extent(pred: &CalibratedPredictor, calib: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = calib.n_targets();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..calib.len() {
        let c = pred.score_fn.center(calib.x(i))?;
        for k in 0..d {
            let r = calib.y(i)[k] - c[k];
            lo[k] = lo[k].min(r);
            hi[k] = hi[k].max(r);
        }
    }
    Ok((lo, hi))
}

/// Monte-Carlo volume of the prediction region at `x` inside `bounds`:
/// `hits / n_mc * volume(bounds)` with uniform samples.
pub fn region_size_mc(pred: &CalibratedPredictor, x: &[f64], bounds: &Bounds, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::Param("n_mc must be positive".into()));
    }
    if bounds.lo.len() != pred.score_fn.n_targets() {
        return Err(Error::Dimension("bounds do not match the response dimension".into()));
    }
    if pred.interval.is_none() && pred.threshold.is_finite() && pred.threshold < 0.0 {
        return Ok(0.0);
    }
    let d = bounds.lo.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n_mc * d)
        .map(|k| {
            let j = k % d;
            bounds.lo[j] + (bounds.hi[j] - bounds.lo[j]) * rng.random::<f64>()
        })
        .collect();
    let local = pred.score_fn.at(x)?;
    let hits = samples
        .par_chunks_exact(d)
        .map(|y| local.eval(y).map(|s| usize::from(pred.admits(s))))
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / n_mc as f64 * bounds.volume())
}
