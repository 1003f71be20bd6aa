#![allow(dead_code)]

use otcp::conformal::{CalibratedPredictor, ScoreFunction, ScoreModel};
use otcp::data_io::{Dataset, QuantilePredictor, Regressor, RegressorKind};
use otcp::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Three training points in `[0, 1]` whose 2D targets are all zero, so a
/// k=3 mean regressor predicts the origin everywhere.
pub fn zero_train() -> Dataset {
    let x = Matrix::from_vec(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
    Dataset::new(x, Matrix::zeros(3, 2), "fixture/train").unwrap()
}

/// Calibration scores all equal to `t`; the threshold at alpha=0.1 is `t`.
fn flat_scores(t: f64) -> Vec<f64> {
    vec![t; 9]
}

/// L2 predictor centered at the origin with threshold `radius`.
pub fn disc_predictor(radius: f64) -> CalibratedPredictor {
    let reg = Regressor::fit(&zero_train(), RegressorKind::KnnMean { k: 3 }).unwrap();
    let sf = ScoreFunction::new(ScoreModel::MergeL2 { regressor: reg }, vec!["fixture/train".into()]);
    CalibratedPredictor::from_scores(sf, flat_scores(radius), 0.1).unwrap()
}

/// Mahalanobis predictor with an explicit whitener.
pub fn ellipse_predictor(whitener: Matrix, t: f64) -> CalibratedPredictor {
    let reg = Regressor::fit(&zero_train(), RegressorKind::KnnMean { k: 3 }).unwrap();
    let sf = ScoreFunction::new(
        ScoreModel::MergeMahalanobis { regressor: reg, whitener },
        vec!["fixture/train".into()],
    );
    CalibratedPredictor::from_scores(sf, flat_scores(t), 0.1).unwrap()
}

/// M-CP predictor whose quantile box is `[lo, hi]` everywhere, inflated by `r`.
pub fn box_predictor(lo: [f64; 2], hi: [f64; 2], r: f64) -> CalibratedPredictor {
    let x = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
    let y = Matrix::from_rows(&[lo, hi]).unwrap();
    let train = Dataset::new(x, y, "fixture/train").unwrap();
    let q = QuantilePredictor::fit(&train, 2, 0.0, 1.0).unwrap();
    let sf = ScoreFunction::new(ScoreModel::McpMax { quantiles: q }, vec!["fixture/train".into()]);
    CalibratedPredictor::from_scores(sf, flat_scores(r), 0.1).unwrap()
}

/// `n` draws from a centered 2D Gaussian with unit variances and correlation `rho`.
pub fn correlated_gaussian(n: usize, rho: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (1.0 - rho * rho).sqrt();
    let mut v = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        v.push(a);
        v.push(rho * a + s * b);
    }
    Matrix::from_vec(n, 2, v).unwrap()
}

/// `n` draws of `(e1, e1^2 - 1 + 0.25 e2)`.
pub fn banana(n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        v.push(a);
        v.push(a * a - 1.0 + 0.25 * b);
    }
    Matrix::from_vec(n, 2, v).unwrap()
}

/// Average ranks, ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Chi-square goodness-of-fit p-value against equal cell probabilities.
pub fn chi_square_uniform_p(counts: &[usize]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}
