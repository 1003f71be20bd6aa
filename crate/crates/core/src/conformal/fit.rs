use serde::{Deserialize, Serialize};

use super::score::{default_ridge, estimate_covariance, ScoreFunction, ScoreKind, ScoreModel};
use crate::data_io::{residuals, Dataset, QuantilePredictor, Regressor, RegressorKind};
use crate::entropic_map::{EntropicMap, MapOptions};
use crate::error::{Error, Result};
use crate::sinkhorn;
use crate::sphere_grid::{build_spherical_grid, DirectionMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtcpParams {
    pub epsilon: f64,
    /// Number of grid points.
    pub targets: usize,
    pub grid_mode: DirectionMode,
    pub grid_seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OtcpParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            targets: 4096,
            grid_mode: DirectionMode::LowDiscrepancy,
            grid_seed: 0,
            tol: sinkhorn::DEFAULT_TOLERANCE,
            max_iter: sinkhorn::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McpParams {
    pub k: usize,
    /// Quantile levels; `None` means `(alpha / 2, 1 - alpha / 2)`.
    pub levels: Option<(f64, f64)>,
}

impl Default for McpParams {
    fn default() -> Self {
        Self { k: 50, levels: None }
    }
}

/// Everything needed to fit any of the score functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub regressor: RegressorKind,
    pub otcp: OtcpParams,
    pub mcp: McpParams,
    /// Mahalanobis ridge; `None` means `1e-6 * trace(cov) / d`.
    pub ridge: Option<f64>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            regressor: RegressorKind::RidgeLinear { lambda: 1e-6 },
            otcp: OtcpParams::default(),
            mcp: McpParams::default(),
            ridge: None,
        }
    }
}

/// Fits a score of the given kind.
///
/// The point predictor (or the quantile predictor for M-CP) is trained on
/// `train`. Mahalanobis covariance and the OT map are estimated from the
/// held-out residuals on `aux`.
pub fn fit_score_function(
    kind: ScoreKind,
    train: &Dataset,
    aux: &Dataset,
    alpha: f64,
    cfg: &ScoreConfig,
) -> Result<ScoreFunction> {
    let mut fitted_on = vec![train.origin.clone()];
    let model = match kind {
        ScoreKind::McpMax => {
            let (lo, hi) = cfg.mcp.levels.unwrap_or((alpha / 2.0, 1.0 - alpha / 2.0));
            let k = cfg.mcp.k.min(train.len());
            ScoreModel::McpMax {
                quantiles: QuantilePredictor::fit(train, k, lo, hi)?,
            }
        }
        _ => {
            let regressor = fit_regressor(train, cfg.regressor)?;
            match kind {
                ScoreKind::AbsUnivariate => {
                    if train.n_targets() != 1 {
                        return Err(Error::Dimension("abs_univariate needs d=1".into()));
                    }
                    ScoreModel::AbsUnivariate { regressor }
                }
                ScoreKind::MergeL2 => ScoreModel::MergeL2 { regressor },
                ScoreKind::MergeMahalanobis => {
                    let res = residuals(aux, &regressor)?;
                    let ridge = cfg.ridge.unwrap_or_else(|| default_ridge(&res));
                    fitted_on.push(aux.origin.clone());
                    ScoreModel::MergeMahalanobis {
                        whitener: estimate_covariance(&res, ridge)?,
                        regressor,
                    }
                }
                ScoreKind::Otcp => {
                    let res = residuals(aux, &regressor)?;
                    let grid = build_spherical_grid(
                        cfg.otcp.targets,
                        res.dim(),
                        None,
                        cfg.otcp.grid_mode,
                        cfg.otcp.grid_seed,
                    )?;
                    let opts = MapOptions {
                        epsilon: cfg.otcp.epsilon,
                        tol: cfg.otcp.tol,
                        max_iter: cfg.otcp.max_iter,
                    };
                    fitted_on.push(aux.origin.clone());
                    ScoreModel::Otcp {
                        map: EntropicMap::fit(&res.scores, &grid, opts)?,
                        regressor,
                    }
                }
                ScoreKind::McpMax => unreachable!(),
            }
        }
    };
    Ok(ScoreFunction::new(model, fitted_on))
}

/// Regressor fit with `k` clamped to the training size for k-NN.
pub fn fit_regressor(train: &Dataset, kind: RegressorKind) -> Result<Regressor> {
    let kind = match kind {
        RegressorKind::KnnMean { k } => RegressorKind::KnnMean { k: k.min(train.len()) },
        other => other,
    };
    Regressor::fit(train, kind)
}
