use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Noise model of a synthetic regression problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    /// Zero-mean Gaussian noise with covariance `cov` (identity when empty).
    Gaussian {
        #[serde(default)]
        cov: Vec<Vec<f64>>,
    },
    /// Two-dimensional curved noise: `(e1, curvature * (e1^2 - 1) + noise * e2)`.
    Banana {
        #[serde(default = "default_curvature")]
        curvature: f64,
        #[serde(default = "default_banana_noise")]
        noise: f64,
    },
    /// Gaussian mixture sharing the covariance `cov` (identity when empty).
    Mixture {
        means: Vec<Vec<f64>>,
        weights: Vec<f64>,
        #[serde(default)]
        cov: Vec<Vec<f64>>,
    },
}

fn default_curvature() -> f64 {
    1.0
}

fn default_banana_noise() -> f64 {
    0.25
}

impl SynthKind {
    pub fn gaussian_identity() -> Self {
        SynthKind::Gaussian { cov: Vec::new() }
    }

    pub fn banana() -> Self {
        SynthKind::Banana {
            curvature: default_curvature(),
            noise: default_banana_noise(),
        }
    }
}

/// Mean response: output `k` is `(k + 1)` times the feature average.
pub fn mean_function(x: &[f64], d: usize) -> Vec<f64> {
    let s = x.iter().sum::<f64>() / x.len() as f64;
    (0..d).map(|k| (k + 1) as f64 * s).collect()
}

fn cholesky(cov: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if cov.is_empty() {
        return Ok(DMatrix::identity(d, d));
    }
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(Error::Param(format!("covariance must be {d}x{d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    if (&m - m.transpose()).abs().max() > 1e-12 {
        return Err(Error::Param("covariance is not symmetric".into()));
    }
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Param("covariance is not positive definite".into()))
}

fn correlated(rng: &mut ChaCha8Rng, l: &DMatrix<f64>) -> Vec<f64> {
    let d = l.nrows();
    let e: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    (0..d).map(|i| (0..=i).map(|j| l[(i, j)] * e[j]).sum()).collect()
}

/// Draws `n` pairs with one uniform feature on `[0,1]`.
pub fn synth_dataset(kind: &SynthKind, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    synth_dataset_with_features(kind, n, d, 1, seed)
}

/// Features uniform on `[0,1]^p`; targets are [`mean_function`] plus noise from `kind`.
pub fn synth_dataset_with_features(
    kind: &SynthKind,
    n: usize,
    d: usize,
    p: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || d == 0 || p == 0 {
        return Err(Error::Param("n, d and p must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Box<dyn FnMut(&mut ChaCha8Rng) -> Vec<f64>> = match kind {
        SynthKind::Gaussian { cov } => {
            let l = cholesky(cov, d)?;
            Box::new(move |r| correlated(r, &l))
        }
        SynthKind::Banana { curvature, noise } => {
            if d != 2 {
                return Err(Error::Param(format!("banana noise is two-dimensional, got d={d}")));
            }
            let (b, s) = (*curvature, *noise);
            Box::new(move |r| {
                let e1: f64 = r.sample(StandardNormal);
                let e2: f64 = r.sample(StandardNormal);
                vec![e1, b * (e1 * e1 - 1.0) + s * e2]
            })
        }
        SynthKind::Mixture { means, weights, cov } => {
            if means.is_empty() || means.len() != weights.len() {
                return Err(Error::Param("mixture needs one weight per mean".into()));
            }
            if means.iter().any(|m| m.len() != d) {
                return Err(Error::Param(format!("mixture means must have length {d}")));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Param("mixture weights must be nonnegative".into()));
            }
            let l = cholesky(cov, d)?;
            let total: f64 = weights.iter().sum();
            let cdf: Vec<f64> = weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w / total;
                    Some(*acc)
                })
                .collect();
            let means = means.clone();
            Box::new(move |r| {
                let c = if means.len() == 1 {
                    0
                } else {
                    let u: f64 = r.random();
                    cdf.iter().position(|&c| u < c).unwrap_or(means.len() - 1)
                };
                let mut e = correlated(r, &l);
                e.iter_mut().zip(&means[c]).for_each(|(a, m)| *a += m);
                e
            })
        }
    };
    let mut noise = noise;
    let mut feats = Vec::with_capacity(n * p);
    let mut targs = Vec::with_capacity(n * d);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let e = noise(&mut rng);
        targs.extend(mean_function(&x, d).iter().zip(&e).map(|(m, e)| m + e));
        feats.extend(x);
    }
    let origin = match kind {
        SynthKind::Gaussian { .. } => "synth:gaussian",
        SynthKind::Banana { .. } => "synth:banana",
        SynthKind::Mixture { .. } => "synth:mixture",
    };
    Dataset::new(
        Matrix::from_vec(n, p, feats)?,
        Matrix::from_vec(n, d, targs)?,
        format!("{origin}:{seed}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_cov(ds: &Dataset) -> Vec<Vec<f64>> {
        let d = ds.n_targets();
        let rows: Vec<Vec<f64>> = (0..ds.len())
            .map(|i| {
                let m = mean_function(ds.x(i), d);
                ds.y(i).iter().zip(&m).map(|(y, m)| y - m).collect()
            })
            .collect();
        Matrix::from_rows(&rows).unwrap().covariance()
    }

    #[test]
    fn gaussian_identity_covariance() {
        let ds = synth_dataset(&SynthKind::gaussian_identity(), 10_000, 3, 11).unwrap();
        let c = residual_cov(&ds);
        for (i, row) in c.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 0.05, "cov[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn gaussian_correlated_covariance() {
        let cov = vec![vec![2.0, 0.7], vec![0.7, 1.0]];
        let ds = synth_dataset(&SynthKind::Gaussian { cov: cov.clone() }, 20_000, 2, 5).unwrap();
        let c = residual_cov(&ds);
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[i][j] - cov[i][j]).abs() < 0.08);
            }
        }
    }

    #[test]
    fn rejects_non_spd() {
        let cov = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            synth_dataset(&SynthKind::Gaussian { cov }, 10, 2, 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn banana_deterministic() {
        let a = synth_dataset(&SynthKind::banana(), 4, 2, 42).unwrap();
        let b = synth_dataset(&SynthKind::banana(), 4, 2, 42).unwrap();
        assert_eq!(a.targets.nrows(), 4);
        assert_eq!(a.targets.ncols(), 2);
        let bits = |d: &Dataset| d.targets.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(synth_dataset(&SynthKind::banana(), 4, 3, 42).is_err());
    }

    #[test]
    fn single_component_mixture_is_gaussian() {
        let cov = vec![vec![1.0, 0.3], vec![0.3, 0.5]];
        let g = synth_dataset(&SynthKind::Gaussian { cov: cov.clone() }, 50, 2, 9).unwrap();
        let m = synth_dataset(
            &SynthKind::Mixture {
                means: vec![vec![0.0, 0.0]],
                weights: vec![1.0],
                cov,
            },
            50,
            2,
            9,
        )
        .unwrap();
        assert_eq!(g.targets, m.targets);
        assert_eq!(g.features, m.features);
    }

    #[test]
    fn mixture_uses_means() {
        let m = synth_dataset(
            &SynthKind::Mixture {
                means: vec![vec![-10.0], vec![10.0]],
                weights: vec![1.0, 3.0],
                cov: vec![],
            },
            4000,
            1,
            3,
        )
        .unwrap();
        let pos = (0..m.len()).filter(|&i| m.y(i)[0] > 0.0).count() as f64 / 4000.0;
        assert!((pos - 0.75).abs() < 0.03, "{pos}");
    }
}
