use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

/// Indices of the `k` training rows closest to `x`, nearest first.
/// Distances are compared exactly and ties go to the lower index.
pub fn nearest_neighbors(features: &Matrix, x: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = features
        .rows_iter()
        .enumerate()
        .map(|(i, r)| (squared_distance(r, x), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorKind {
    KnnMean { k: usize },
    RidgeLinear { lambda: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Fitted {
    Knn { features: Matrix, targets: Matrix, k: usize },
    Ridge { coef: Matrix, intercept: Vec<f64> },
}

/// Point predictor `x -> y_hat(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Regressor {
    kind: RegressorKind,
    p: usize,
    d: usize,
    state: Fitted,
}

impl Regressor {
    pub fn fit(train: &Dataset, kind: RegressorKind) -> Result<Self> {
        let (p, d) = (train.n_features(), train.n_targets());
        let state = match kind {
            RegressorKind::KnnMean { k } => {
                if k == 0 || k > train.len() {
                    return Err(Error::Param(format!(
                        "k={k} must be in 1..={} (training size)",
                        train.len()
                    )));
                }
                Fitted::Knn {
                    features: train.features.clone(),
                    targets: train.targets.clone(),
                    k,
                }
            }
            RegressorKind::RidgeLinear { lambda } => {
                if !(lambda >= 0.0) {
                    return Err(Error::Param(format!("ridge lambda must be >= 0, got {lambda}")));
                }
                fit_ridge(train, lambda)?
            }
        };
        Ok(Self { kind, p, d, state })
    }

    pub fn kind(&self) -> RegressorKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn n_targets(&self) -> usize {
        self.d
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p {
            return Err(Error::Dimension(format!(
                "query has {} features, regressor expects {}",
                x.len(),
                self.p
            )));
        }
        Ok(match &self.state {
            Fitted::Knn { features, targets, k } => {
                let nn = nearest_neighbors(features, x, *k);
                let mut out = vec![0.0; self.d];
                for &i in &nn {
                    out.iter_mut().zip(targets.row(i)).for_each(|(o, t)| *o += t);
                }
                out.iter_mut().for_each(|o| *o /= nn.len() as f64);
                out
            }
            Fitted::Ridge { coef, intercept } => (0..self.d)
                .map(|j| intercept[j] + coef.row(j).iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
                .collect(),
        })
    }

    pub fn describe(&self) -> String {
        match self.kind {
            RegressorKind::KnnMean { k } => format!("knn_mean(k={k})"),
            RegressorKind::RidgeLinear { lambda } => format!("ridge_linear(lambda={lambda})"),
        }
    }
}

// Intercept is unpenalized: fit on centered features and targets.
fn fit_ridge(train: &Dataset, lambda: f64) -> Result<Fitted> {
    let (n, p, d) = (train.len(), train.n_features(), train.n_targets());
    let xm = train.features.column_means();
    let ym = train.targets.column_means();
    let x = DMatrix::from_fn(n, p, |i, j| train.features.get(i, j) - xm[j]);
    let y = DMatrix::from_fn(n, d, |i, j| train.targets.get(i, j) - ym[j]);
    let gram = x.transpose() * &x + DMatrix::identity(p, p) * lambda;
    let rhs = x.transpose() * &y;
    let beta = gram
        .lu()
        .solve(&rhs)
        .filter(|b| b.iter().all(|v| v.is_finite()))
        .ok_or(Error::Singular(0.0))?;
    let mut coef = Matrix::zeros(d, p);
    let mut intercept = vec![0.0; d];
    for j in 0..d {
        let b = DVector::from_fn(p, |i, _| beta[(i, j)]);
        intercept[j] = ym[j] - b.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
        coef.row_mut(j).copy_from_slice(b.as_slice());
    }
    Ok(Fitted::Ridge { coef, intercept })
}

/// Type-7 sample quantile of `sorted` (ascending) at level `q` in `[0,1]`.
pub fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Nearest-neighbor conditional quantile estimator for per-dimension bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantilePredictor {
    features: Matrix,
    targets: Matrix,
    k: usize,
    alpha_lo: f64,
    alpha_hi: f64,
}

impl QuantilePredictor {
    pub fn fit(train: &Dataset, k: usize, alpha_lo: f64, alpha_hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_lo) || !(0.0..=1.0).contains(&alpha_hi) || alpha_lo >= alpha_hi {
            return Err(Error::Param(format!(
                "quantile levels must satisfy 0 <= lo < hi <= 1, got ({alpha_lo}, {alpha_hi})"
            )));
        }
        if k == 0 || k > train.len() {
            return Err(Error::Param(format!("k={k} must be in 1..={}", train.len())));
        }
        Ok(Self {
            features: train.features.clone(),
            targets: train.targets.clone(),
            k,
            alpha_lo,
            alpha_hi,
        })
    }

    pub fn levels(&self) -> (f64, f64) {
        (self.alpha_lo, self.alpha_hi)
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Per-dimension `(lower, upper)` estimates at `x`.
    pub fn predict_bounds(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.features.ncols() {
            return Err(Error::Dimension(format!(
                "query has {} features, predictor expects {}",
                x.len(),
                self.features.ncols()
            )));
        }
        let nn = nearest_neighbors(&self.features, x, self.k);
        let d = self.targets.ncols();
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        let mut buf = Vec::with_capacity(nn.len());
        for j in 0..d {
            buf.clear();
            buf.extend(nn.iter().map(|&i| self.targets.get(i, j)));
            buf.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            lo.push(interpolated_quantile(&buf, self.alpha_lo));
            hi.push(interpolated_quantile(&buf, self.alpha_hi));
        }
        Ok((lo, hi))
    }
}
