//! Discrete spherical-uniform reference measure.
//!
//! The grid is a set of `n_S` unit directions replicated on `n_R` regularly
//! spaced shells of radius `1/n_R, 2/n_R, ..., 1`, plus `n_o` copies of the
//! origin. Every point carries mass `1/m` with `m = n_S * n_R + n_o`.
//! Directions come either from a Halton sequence pushed through the normal
//! quantile function and normalized, or from seeded Gaussian draws.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};

const PRIMES: [u64; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311,
];

/// Default number of leading Halton indices dropped.
pub const DEFAULT_HALTON_SKIP: u64 = 64;

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    out
}

/// Halton points for indices `skip..skip + count`, one prime base per column.
///
/// Index 0 maps to the origin, so `skip` must be at least 1 to keep every
/// coordinate inside the open unit cube.
pub fn halton_sequence(count: usize, dim: usize, skip: u64) -> Result<Matrix> {
    if dim == 0 || dim > PRIMES.len() {
        return Err(Error::Param(format!("halton dimension must be in 1..=64, got {dim}")));
    }
    if count == 0 {
        return Err(Error::Param("halton count must be positive".into()));
    }
    if skip == 0 {
        return Err(Error::Param("halton skip must be >= 1 (index 0 is the origin)".into()));
    }
    let mut m = Matrix::zeros(count, dim);
    for i in 0..count {
        let idx = skip + i as u64;
        for (j, v) in m.row_mut(i).iter_mut().enumerate() {
            *v = radical_inverse(idx, PRIMES[j]);
        }
    }
    Ok(m)
}

/// Standard normal quantile function.
///
/// Rational approximation (Acklam) followed by one Halley refinement step
/// against `erfc`, giving close to full double precision.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve in the lower tail and reflect, so the result is exactly antisymmetric.
    let (q, sign) = if p > 0.5 { (1.0 - p, 1.0) } else { (p, -1.0) };
    let x = acklam_lower(q);
    // Halley step on Phi(x) - q using Phi(x) = erfc(-x / sqrt 2) / 2
    let e = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2) - q;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    let x = x - u / (1.0 + x * u / 2.0);
    Ok(-sign * x)
}

fn acklam_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    #[default]
    LowDiscrepancy,
    Iid,
}

/// `n_s` unit vectors in `R^dim`, approximately uniform on the sphere.
pub fn sphere_directions(n_s: usize, dim: usize, mode: DirectionMode, seed: u64) -> Result<Matrix> {
    if n_s == 0 || dim == 0 {
        return Err(Error::Param("need n_S >= 1 and dim >= 1".into()));
    }
    let mut out = Matrix::zeros(n_s, dim);
    let mut filled = 0;
    match mode {
        DirectionMode::LowDiscrepancy => {
            let mut next = DEFAULT_HALTON_SKIP + seed;
            while filled < n_s {
                let block = halton_sequence(n_s - filled, dim, next)?;
                next += (n_s - filled) as u64;
                for r in block.rows_iter() {
                    let g: Vec<f64> = r.iter().map(|&w| inverse_normal_cdf(w)).collect::<Result<_>>()?;
                    if push_normalized(&mut out, filled, &g) {
                        filled += 1;
                    }
                }
            }
        }
        DirectionMode::Iid => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while filled < n_s {
                let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                if push_normalized(&mut out, filled, &g) {
                    filled += 1;
                }
            }
        }
    }
    Ok(out)
}

fn push_normalized(out: &mut Matrix, row: usize, g: &[f64]) -> bool {
    let n = norm(g);
    if n < 1e-12 {
        return false;
    }
    for (o, v) in out.row_mut(row).iter_mut().zip(g) {
        *o = v / n;
    }
    true
}

/// Shell structure of a grid: `n_R` radii, `n_S` directions, `n_o` origin copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub n_r: usize,
    pub n_s: usize,
    pub n_o: usize,
}

impl Factorization {
    /// `n_R = floor(sqrt m)`, `n_S = floor((m - 1) / n_R)`, remainder at the origin.
    pub fn default_for(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Param(format!("grid size must be >= 2, got {m}")));
        }
        let mut n_r = (m as f64).sqrt().floor() as usize;
        while n_r * n_r > m {
            n_r -= 1;
        }
        while (n_r + 1) * (n_r + 1) <= m {
            n_r += 1;
        }
        let n_s = (m - 1) / n_r;
        Ok(Self {
            n_r,
            n_s,
            n_o: m - n_r * n_s,
        })
    }

    pub fn total(&self) -> usize {
        self.n_r * self.n_s + self.n_o
    }
}

impl std::fmt::Display for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n_R={} n_S={} n_o={} (m={})", self.n_r, self.n_s, self.n_o, self.total())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalGrid {
    pub dim: usize,
    pub factorization: Factorization,
    /// Origin copies first, then shells from the innermost outwards.
    pub points: Matrix,
    pub radii: Vec<f64>,
    pub directions: Matrix,
}

impl SphericalGrid {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// One point per row, columns `u0..u{d-1}`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((0..self.dim).map(|k| format!("u{k}")))?;
        for r in self.points.rows_iter() {
            w.write_record(r.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_spherical_grid(
    m: usize,
    dim: usize,
    factorization: Option<Factorization>,
    mode: DirectionMode,
    seed: u64,
) -> Result<SphericalGrid> {
    if m < 2 {
        return Err(Error::Param(format!("grid size must be >= 2, got {m}")));
    }
    let f = match factorization {
        Some(f) => {
            if f.total() != m || f.n_r == 0 || f.n_s == 0 {
                return Err(Error::Factorization {
                    n_r: f.n_r,
                    n_s: f.n_s,
                    n_o: f.n_o,
                    m,
                });
            }
            f
        }
        None => Factorization::default_for(m)?,
    };
    let directions = sphere_directions(f.n_s, dim, mode, seed)?;
    let radii: Vec<f64> = (1..=f.n_r).map(|j| j as f64 / f.n_r as f64).collect();
    let mut points = Matrix::zeros(m, dim);
    let mut row = f.n_o;
    for &r in &radii {
        for dir in directions.rows_iter() {
            for (p, u) in points.row_mut(row).iter_mut().zip(dir) {
                *p = r * u;
            }
            row += 1;
        }
    }
    Ok(SphericalGrid {
        dim,
        factorization: f,
        points,
        radii,
        directions,
    })
}

/// Smallest shell index `j` whose ball (origin plus shells `1..=j`) holds
/// at least `1 - alpha` of the grid mass, and its radius `j / n_R`.
pub fn grid_radius_index(n_total: usize, f: Factorization, alpha: f64) -> Result<(usize, f64)> {
    if f.total() != n_total || f.n_r == 0 || f.n_s == 0 {
        return Err(Error::Param(format!("{f} is inconsistent with n_total={n_total}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Param(format!("alpha must be in (0,1), got {alpha}")));
    }
    let need = (n_total as f64 * (1.0 - alpha) - f.n_o as f64) / f.n_s as f64;
    // guard against (0.9 * 100 - 10) / 10 landing a hair above an integer
    let j = (need - 1e-9).ceil().clamp(0.0, f.n_r as f64) as usize;
    Ok((j, j as f64 / f.n_r as f64))
}
