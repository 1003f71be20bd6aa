use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data_io::{Dataset, QuantilePredictor, Regressor, ScoreMatrix};
use crate::entropic_map::EntropicMap;
use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    AbsUnivariate,
    MergeL2,
    MergeMahalanobis,
    McpMax,
    Otcp,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::AbsUnivariate => "abs_univariate",
            ScoreKind::MergeL2 => "merge_l2",
            ScoreKind::MergeMahalanobis => "merge_mahalanobis",
            ScoreKind::McpMax => "mcp_max",
            ScoreKind::Otcp => "otcp",
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "abs_univariate" | "abs" => ScoreKind::AbsUnivariate,
            "merge_l2" | "l2" => ScoreKind::MergeL2,
            "merge_mahalanobis" | "mahalanobis" => ScoreKind::MergeMahalanobis,
            "mcp_max" | "mcp" => ScoreKind::McpMax,
            "otcp" | "ot" => ScoreKind::Otcp,
            other => return Err(Error::Method(format!("unknown score kind {other:?}"))),
        })
    }
}

/// Fitted state behind each score kind.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreModel {
    AbsUnivariate { regressor: Regressor },
    MergeL2 { regressor: Regressor },
    /// `whitener` is the symmetric inverse square root of the residual covariance.
    MergeMahalanobis { regressor: Regressor, whitener: Matrix },
    McpMax { quantiles: QuantilePredictor },
    Otcp { regressor: Regressor, map: EntropicMap },
}

/// A fitted conformity score `S(x, y)` plus the origins of the data it was fitted on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoreFunction {
    pub model: ScoreModel,
    pub fitted_on: Vec<String>,
}

impl ScoreFunction {
    pub fn new(model: ScoreModel, fitted_on: Vec<String>) -> Self {
        Self { model, fitted_on }
    }

    pub fn kind(&self) -> ScoreKind {
        match &self.model {
            ScoreModel::AbsUnivariate { .. } => ScoreKind::AbsUnivariate,
            ScoreModel::MergeL2 { .. } => ScoreKind::MergeL2,
            ScoreModel::MergeMahalanobis { .. } => ScoreKind::MergeMahalanobis,
            ScoreModel::McpMax { .. } => ScoreKind::McpMax,
            ScoreModel::Otcp { .. } => ScoreKind::Otcp,
        }
    }

    pub fn n_targets(&self) -> usize {
        match &self.model {
            ScoreModel::AbsUnivariate { regressor }
            | ScoreModel::MergeL2 { regressor }
            | ScoreModel::MergeMahalanobis { regressor, .. }
            | ScoreModel::Otcp { regressor, .. } => regressor.n_targets(),
            ScoreModel::McpMax { quantiles } => quantiles.n_targets(),
        }
    }

    pub fn regressor(&self) -> Option<&Regressor> {
        match &self.model {
            ScoreModel::AbsUnivariate { regressor }
            | ScoreModel::MergeL2 { regressor }
            | ScoreModel::MergeMahalanobis { regressor, .. }
            | ScoreModel::Otcp { regressor, .. } => Some(regressor),
            ScoreModel::McpMax { .. } => None,
        }
    }

    /// Whether the score depends on `(x, y)` only through `y - y_hat(x)`.
    /// Regions of such scores are translates of one fixed set.
    pub fn is_residual_based(&self) -> bool {
        !matches!(self.model, ScoreModel::McpMax { .. })
    }

    /// Point prediction `y_hat(x)`; for M-CP the midpoint of the quantile box.
    pub fn center(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.model {
            ScoreModel::McpMax { quantiles } => {
                let (lo, hi) = quantiles.predict_bounds(x)?;
                Ok(lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect())
            }
            _ => self.regressor().expect("residual scores carry a regressor").predict(x),
        }
    }

    /// Score of a residual vector `y - y_hat(x)`. Not defined for M-CP.
    pub fn residual_score(&self, r: &[f64]) -> Result<f64> {
        match &self.model {
            ScoreModel::AbsUnivariate { .. } => {
                if r.len() != 1 {
                    return Err(Error::Dimension(format!("absolute score needs d=1, got d={}", r.len())));
                }
                Ok(r[0].abs())
            }
            ScoreModel::MergeL2 { .. } => Ok(norm(r)),
            ScoreModel::MergeMahalanobis { whitener, .. } => Ok(norm(&mat_vec(whitener, r))),
            ScoreModel::Otcp { map, .. } => map.ot_rank(r),
            ScoreModel::McpMax { .. } => Err(Error::Method("mcp_max is not residual based".into())),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if y.len() != self.n_targets() {
            return Err(Error::Dimension(format!(
                "response is {}-d, score expects {}-d",
                y.len(),
                self.n_targets()
            )));
        }
        match &self.model {
            ScoreModel::McpMax { quantiles } => {
                let (lo, hi) = quantiles.predict_bounds(x)?;
                Ok(mcp_score(&lo, &hi, y))
            }
            _ => {
                let pred = self.center(x)?;
                let r: Vec<f64> = y.iter().zip(&pred).map(|(y, p)| y - p).collect();
                self.residual_score(&r)
            }
        }
    }

    /// Score restricted to a fixed `x`, with the predictors evaluated once.
    pub fn at(&self, x: &[f64]) -> Result<LocalScore<'_>> {
        Ok(match &self.model {
            ScoreModel::McpMax { quantiles } => {
                let (lo, hi) = quantiles.predict_bounds(x)?;
                LocalScore::Box { lo, hi }
            }
            _ => LocalScore::Residual {
                score: self,
                center: self.center(x)?,
            },
        })
    }

    /// Scores of every row of `ds`.
    pub fn eval_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        (0..ds.len()).into_par_iter().map(|i| self.eval(ds.x(i), ds.y(i))).collect()
    }
}

/// A score function with `x` fixed; see [`ScoreFunction::at`].
pub enum LocalScore<'a> {
    Residual { score: &'a ScoreFunction, center: Vec<f64> },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl LocalScore<'_> {
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        match self {
            LocalScore::Residual { score, center } => {
                if y.len() != center.len() {
                    return Err(Error::Dimension(format!("response is {}-d, expected {}-d", y.len(), center.len())));
                }
                let r: Vec<f64> = y.iter().zip(center).map(|(y, c)| y - c).collect();
                score.residual_score(&r)
            }
            LocalScore::Box { lo, hi } => {
                if y.len() != lo.len() {
                    return Err(Error::Dimension(format!("response is {}-d, expected {}-d", y.len(), lo.len())));
                }
                Ok(mcp_score(lo, hi, y))
            }
        }
    }
}

/// `max_k max(lo_k - y_k, y_k - hi_k)`.
pub fn mcp_score(lo: &[f64], hi: &[f64], y: &[f64]) -> f64 {
    lo.iter()
        .zip(hi)
        .zip(y)
        .map(|((l, h), y)| (l - y).max(y - h))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.rows_iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Default Mahalanobis ridge `1e-6 * trace(cov) / d`.
pub fn default_ridge(residuals: &ScoreMatrix) -> f64 {
    let cov = residuals.scores.covariance();
    let d = cov.len();
    1e-6 * (0..d).map(|k| cov[k][k]).sum::<f64>() / d as f64
}

/// Symmetric inverse square root of `cov(residuals) + ridge * I`.
pub fn estimate_covariance(residuals: &ScoreMatrix, ridge: f64) -> Result<Matrix> {
    if !(ridge >= 0.0) {
        return Err(Error::Param(format!("ridge must be >= 0, got {ridge}")));
    }
    let cov = residuals.scores.covariance();
    let d = cov.len();
    let sigma = DMatrix::from_fn(d, d, |i, j| cov[i][j] + if i == j { ridge } else { 0.0 });
    let eig = sigma.symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12) {
        return Err(Error::Singular(min));
    }
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = q * scaled * q.transpose();
    let mut out = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out.set(i, j, 0.5 * (w[(i, j)] + w[(j, i)]));
        }
    }
    Ok(out)
}
