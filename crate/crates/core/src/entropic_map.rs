//! Out-of-sample entropic transport maps built from Sinkhorn potentials.
//!
//! Scores are standardized per dimension with the fit-time mean and standard
//! deviation, then transported onto the spherical grid:
//!
//! ```text
//! p_j(z)   proportional to exp(-(|z - u_j|^2 - g_j) / eps)
//! T(z)     = sum_j p_j(z) u_j
//! T_inv(u) = sum_i q_i(u) z_i,   q_i(u) proportional to exp(-(|z_i - u|^2 - f_i) / eps)
//! ```
//!
//! `T(z)` is a convex combination of grid points, so `|T(z)| <= 1` always.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm, squared_distance, Matrix};
use crate::sinkhorn::{self, DualPotentials, OtProblem};
use crate::sphere_grid::SphericalGrid;

pub const MAP_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapOptions {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            tol: sinkhorn::DEFAULT_TOLERANCE,
            max_iter: sinkhorn::DEFAULT_MAX_ITER,
        }
    }
}

/// Per-dimension affine standardization `(z - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(points: &Matrix) -> Self {
        let mean = points.column_means();
        let cov = points.covariance();
        let scale = (0..points.ncols())
            .map(|k| {
                let s = cov[k][k].sqrt();
                if s > 1e-12 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn apply_matrix(&self, points: &Matrix) -> Matrix {
        let mut out = points.clone();
        for i in 0..out.nrows() {
            let r = self.apply(points.row(i));
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }
}

/// Softmax of `-values / eps`, computed with a max shift.
fn gibbs(values: &[f64], eps: f64) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = values.iter().map(|v| (-(v - lo) / eps).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropicMap {
    potentials: DualPotentials,
    standardizer: Standardizer,
    converged: bool,
}

impl EntropicMap {
    /// Standardizes `scores`, solves the entropic problem onto `grid` and wraps
    /// the potentials. An unconverged solve is kept (with a warning): coverage
    /// of the downstream conformal sets does not depend on map accuracy.
    pub fn fit(scores: &Matrix, grid: &SphericalGrid, opts: MapOptions) -> Result<Self> {
        Self::fit_with(scores, grid, opts, true)
    }

    /// As [`EntropicMap::fit`], optionally skipping standardization.
    pub fn fit_with(scores: &Matrix, grid: &SphericalGrid, opts: MapOptions, standardize: bool) -> Result<Self> {
        if scores.ncols() != grid.dim {
            return Err(Error::Dimension(format!(
                "scores are {}-d but the grid is {}-d",
                scores.ncols(),
                grid.dim
            )));
        }
        let standardizer = if standardize {
            Standardizer::fit(scores)
        } else {
            Standardizer::identity(scores.ncols())
        };
        let problem = OtProblem::new(standardizer.apply_matrix(scores), grid.points.clone(), opts.epsilon)?;
        let (potentials, converged) = match sinkhorn::sinkhorn_solve(problem, opts.tol, opts.max_iter) {
            Ok(p) => (p, true),
            Err(Error::NotConverged {
                iterations,
                marginal_error,
                potentials,
            }) => {
                log::warn!(
                    "sinkhorn stopped after {iterations} iterations with marginal error {marginal_error:e} (eps={})",
                    opts.epsilon
                );
                (*potentials, false)
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            potentials,
            standardizer,
            converged,
        })
    }

    pub fn from_parts(potentials: DualPotentials, standardizer: Standardizer) -> Self {
        let converged = potentials.marginal_error.is_finite();
        Self {
            potentials,
            standardizer,
            converged,
        }
    }

    pub fn dim(&self) -> usize {
        self.potentials.problem.source.ncols()
    }

    pub fn epsilon(&self) -> f64 {
        self.potentials.epsilon()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn potentials(&self) -> &DualPotentials {
        &self.potentials
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Grid points the map transports onto.
    pub fn target(&self) -> &Matrix {
        &self.potentials.problem.target
    }

    /// Standardized fit-time scores.
    pub fn source(&self) -> &Matrix {
        &self.potentials.problem.source
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "query is {}-d, map is {}-d",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn weights_std(&self, z_std: &[f64]) -> Vec<f64> {
        let tgt = self.target();
        let vals: Vec<f64> = tgt
            .rows_iter()
            .zip(&self.potentials.g)
            .map(|(u, g)| squared_distance(z_std, u) - g)
            .collect();
        gibbs(&vals, self.epsilon())
    }

    /// Weights `p_j(z)` over grid points for a score in original units.
    pub fn gibbs_weights(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok(self.weights_std(&self.standardizer.apply(z)))
    }

    /// Map of an already standardized score.
    pub fn forward_standardized(&self, z_std: &[f64]) -> Vec<f64> {
        let w = self.weights_std(z_std);
        let mut out = vec![0.0; self.dim()];
        for (wj, u) in w.iter().zip(self.target().rows_iter()) {
            out.iter_mut().zip(u).for_each(|(o, u)| *o += wj * u);
        }
        out
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok(self.forward_standardized(&self.standardizer.apply(z)))
    }

    /// Entropic potential `lse_eps_j(|z - u_j|^2 - g_j)` at a standardized
    /// point. For the squared cost, `forward = z - grad / 2`.
    pub fn potential_standardized(&self, z_std: &[f64]) -> f64 {
        let vals: Vec<f64> = self
            .target()
            .rows_iter()
            .zip(&self.potentials.g)
            .map(|(u, g)| squared_distance(z_std, u) - g)
            .collect();
        sinkhorn::lse_eps(&vals, self.epsilon())
    }

    /// Multivariate rank `|T(z)|` in `[0, 1]`.
    pub fn ot_rank(&self, z: &[f64]) -> Result<f64> {
        Ok(norm(&self.forward(z)?).min(1.0))
    }

    pub fn ot_ranks(&self, z: &Matrix) -> Result<Vec<f64>> {
        if z.ncols() != self.dim() {
            return Err(Error::Dimension(format!("queries are {}-d, map is {}-d", z.ncols(), self.dim())));
        }
        Ok((0..z.nrows())
            .into_par_iter()
            .map(|i| norm(&self.forward_standardized(&self.standardizer.apply(z.row(i)))).min(1.0))
            .collect())
    }

    /// Weights `q_i(u)` over fit-time scores for a point of the ball.
    pub fn inverse_weights(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        let vals: Vec<f64> = self
            .source()
            .rows_iter()
            .zip(&self.potentials.f)
            .map(|(z, f)| squared_distance(z, u) - f)
            .collect();
        Ok(gibbs(&vals, self.epsilon()))
    }

    /// Pulls a point of the ball back to score space (original units).
    pub fn inverse(&self, u: &[f64]) -> Result<Vec<f64>> {
        let w = self.inverse_weights(u)?;
        let mut out = vec![0.0; self.dim()];
        for (wi, z) in w.iter().zip(self.source().rows_iter()) {
            out.iter_mut().zip(z).for_each(|(o, z)| *o += wi * z);
        }
        Ok(self.standardizer.invert(&out))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let artifact = MapArtifact {
            version: MAP_FORMAT_VERSION,
            map: self.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&artifact)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let artifact: MapArtifact = serde_json::from_slice(&std::fs::read(path)?)?;
        if artifact.version != MAP_FORMAT_VERSION {
            return Err(Error::Param(format!(
                "unsupported map format version {} (expected {MAP_FORMAT_VERSION})",
                artifact.version
            )));
        }
        Ok(artifact.map)
    }
}

#[derive(Serialize, Deserialize)]
struct MapArtifact {
    version: u32,
    map: EntropicMap,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_grid::{build_spherical_grid, DirectionMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_cloud(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    fn small_map(eps: f64) -> EntropicMap {
        let src = gaussian_cloud(4, 2, 1);
        let grid = build_spherical_grid(4, 2, None, DirectionMode::LowDiscrepancy, 0).unwrap();
        EntropicMap::fit(
            &src,
            &grid,
            MapOptions {
                epsilon: eps,
                tol: 1e-12,
                max_iter: 100_000,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_grid_point_weight_is_one() {
        let src = gaussian_cloud(5, 2, 3);
        let grid = SphericalGrid {
            dim: 2,
            factorization: crate::sphere_grid::Factorization { n_r: 1, n_s: 1, n_o: 0 },
            points: Matrix::from_rows(&[[0.6, 0.8]]).unwrap(),
            radii: vec![1.0],
            directions: Matrix::from_rows(&[[0.6, 0.8]]).unwrap(),
        };
        let map = EntropicMap::fit(&src, &grid, MapOptions::default()).unwrap();
        assert_eq!(map.gibbs_weights(&[3.0, -1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn uniform_weights_at_huge_epsilon() {
        let map = small_map(1e9);
        for w in map.gibbs_weights(&[0.3, 10.0]).unwrap() {
            assert!((w - 0.25).abs() < 1e-9);
        }
        // inverse collapses to the source barycenter in original units
        let src = gaussian_cloud(4, 2, 1);
        let bary = src.column_means();
        for u in [[0.0, 0.0], [0.9, -0.1], [-0.5, 0.5]] {
            let z = map.inverse(&u).unwrap();
            assert!((z[0] - bary[0]).abs() < 1e-6 && (z[1] - bary[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn weights_match_direct_formula() {
        let map = small_map(0.3);
        let pot = map.potentials();
        let src = gaussian_cloud(4, 2, 1);
        for z in src.rows_iter().chain([[0.1, 0.2].as_slice()]) {
            let zs = map.standardizer().apply(z);
            let raw: Vec<f64> = (0..4)
                .map(|j| {
                    let u = map.target().row(j);
                    let c = (zs[0] - u[0]).powi(2) + (zs[1] - u[1]).powi(2);
                    (-(c - pot.g[j]) / 0.3).exp()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            let w = map.gibbs_weights(z).unwrap();
            for (a, b) in w.iter().zip(&raw) {
                assert!((a - b / total).abs() < 1e-10);
            }
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_source_inverse() {
        let src = Matrix::from_rows(&[[2.0, -1.0]]).unwrap();
        let grid = build_spherical_grid(16, 2, None, DirectionMode::Iid, 0).unwrap();
        let map = EntropicMap::fit(&src, &grid, MapOptions::default()).unwrap();
        for u in [[0.0, 0.0], [0.5, 0.5]] {
            let z = map.inverse(&u).unwrap();
            assert!((z[0] - 2.0).abs() < 1e-12 && (z[1] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_stays_in_unit_ball() {
        let map = small_map(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.random_range(-3.0..6.0));
            let z = [scale * rng.sample::<f64, _>(StandardNormal), scale * rng.sample::<f64, _>(StandardNormal)];
            assert!(norm(&map.forward(&z).unwrap()) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        let map = small_map(0.5);
        assert!(matches!(map.forward(&[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(map.inverse(&[1.0, 2.0, 3.0]), Err(Error::Dimension(_))));
        assert!(matches!(map.gibbs_weights(&[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn json_round_trip() {
        let map = small_map(0.2);
        let f = tempfile::NamedTempFile::new().unwrap();
        map.save_json(f.path()).unwrap();
        let back = EntropicMap::load_json(f.path()).unwrap();
        assert_eq!(map, back);
    }
}
