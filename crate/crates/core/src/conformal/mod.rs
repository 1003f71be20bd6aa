//! Conformity scores, finite-sample calibration and prediction regions.
//!
//! Every method reduces `(x, y)` to a scalar score and calibrates the
//! `ceil((1 - alpha)(n + 1))`-th smallest calibration score as threshold,
//! which gives marginal coverage of at least `1 - alpha` under
//! exchangeability.

mod calibrate;
mod fit;
mod region;
mod score;

pub use calibrate::{calibrate, conformal_rank, conformal_threshold, pit_values, CalibratedPredictor};
pub use fit::{fit_regressor, fit_score_function, McpParams, OtcpParams, ScoreConfig};
pub use region::{polygon_area, region_contour_2d, Region2D};
pub use score::{default_ridge, estimate_covariance, mcp_score, LocalScore, ScoreFunction, ScoreKind, ScoreModel};
