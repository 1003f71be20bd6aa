use std::path::PathBuf;

use thiserror::Error;

use crate::sinkhorn::DualPotentials;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("inconsistent grid factorization: n_R={n_r}, n_S={n_s}, n_o={n_o}, m={m}")]
    Factorization {
        n_r: usize,
        n_s: usize,
        n_o: usize,
        m: usize,
    },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal error {marginal_error:e})")]
    NotConverged {
        iterations: usize,
        marginal_error: f64,
        potentials: Box<DualPotentials>,
    },

    #[error("matrix is numerically singular (smallest eigenvalue {0:e})")]
    Singular(f64),

    #[error("score function is not fitted: {0}")]
    NotFitted(String),

    #[error("score function was fitted on the calibration split ({0}); set the override flag to allow it")]
    Provenance(String),

    #[error("unsupported method: {0}")]
    Method(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
