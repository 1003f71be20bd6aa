//! Multivariate conformal prediction with optimal-transport ranks.
//!
//! Vector-valued residuals are transported onto a discrete spherical-uniform
//! measure with an entropic map; the norm of the image is a multivariate
//! rank in `[0, 1]` which is then calibrated like any scalar conformity
//! score. Baseline scores (Euclidean, Mahalanobis, max-of-quantiles) and a
//! benchmark harness are included.

pub mod bench;
pub mod conformal;
pub mod data_io;
pub mod entropic_map;
pub mod error;
pub mod matrix;
pub mod sinkhorn;
pub mod sphere_grid;

pub use error::{Error, Result};
pub use matrix::Matrix;
