//! Dataset ingestion, seeded splits, synthetic generators, and the simple
//! point and quantile predictors that feed residuals into calibration.

mod dataset;
mod regressor;
mod split;
mod synth;

pub use dataset::{load_dataset_csv, write_dataset_csv, Dataset};
pub use regressor::{interpolated_quantile, nearest_neighbors, QuantilePredictor, Regressor, RegressorKind};
pub use split::{split_dataset, SplitSpec, Splits};
pub use synth::{mean_function, synth_dataset, synth_dataset_with_features, SynthKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Vector-valued residuals `y_i - y_hat(x_i)`, one row per observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub scores: Matrix,
    /// Dataset origin and model description the scores were computed from.
    pub origin: String,
}

impl ScoreMatrix {
    pub fn new(scores: Matrix, origin: impl Into<String>) -> Result<Self> {
        if scores.ncols() == 0 || !scores.is_finite() {
            return Err(Error::Param("score matrix must be finite with d >= 1".into()));
        }
        Ok(Self {
            scores,
            origin: origin.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.scores.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.scores.ncols()
    }
}

/// Signed residual vectors of `reg` on every row of `ds`.
pub fn residuals(ds: &Dataset, reg: &Regressor) -> Result<ScoreMatrix> {
    if ds.n_features() != reg.n_features() || ds.n_targets() != reg.n_targets() {
        return Err(Error::Dimension(format!(
            "dataset is (p={}, d={}) but regressor is (p={}, d={})",
            ds.n_features(),
            ds.n_targets(),
            reg.n_features(),
            reg.n_targets()
        )));
    }
    let mut out = Matrix::zeros(ds.len(), ds.n_targets());
    for i in 0..ds.len() {
        let pred = reg.predict(ds.x(i))?;
        for (o, (y, p)) in out.row_mut(i).iter_mut().zip(ds.y(i).iter().zip(&pred)) {
            *o = y - p;
        }
    }
    ScoreMatrix::new(out, format!("{} | {}", ds.origin, reg.describe()))
}
