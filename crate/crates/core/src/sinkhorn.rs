//! Log-domain Sinkhorn iterations for the entropic OT dual between two
//! uniformly weighted point clouds under squared Euclidean cost.
//!
//! With `lse_eps(v) = -eps * log(mean(exp(-v / eps)))`, the updates are
//!
//! ```text
//! f_i <- lse_eps_j(|z_i - u_j|^2 - g_j)
//! g_j <- lse_eps_i(|z_i - u_j|^2 - f_i)
//! ```
//!
//! and the implied coupling is `P_ij = exp((f_i + g_j - c_ij) / eps) / (n m)`.
//! Each update is an exact block-coordinate ascent step on the dual
//! `mean(f) + mean(g) - eps * sum_ij P_ij`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 2000;

pub fn squared_cost(z: &[f64], u: &[f64]) -> Result<f64> {
    if z.len() != u.len() {
        return Err(Error::Dimension(format!("cost between {}-d and {}-d points", z.len(), u.len())));
    }
    Ok(squared_distance(z, u))
}

/// Soft minimum `-eps * log(mean(exp(-v / eps)))`, shifted by the minimum for stability.
pub fn lse_eps(values: &[f64], eps: f64) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.len() == 1 || !lo.is_finite() {
        return lo;
    }
    let s: f64 = values.iter().map(|v| (-(v - lo) / eps).exp()).sum();
    lo - eps * (s / values.len() as f64).ln()
}

/// Soft minimum over `k` of `cost(k) - pot[k]` without materializing the values.
#[inline]
fn soft_min<F: Fn(usize) -> f64>(k: usize, eps: f64, value: F) -> f64 {
    let mut lo = f64::INFINITY;
    for j in 0..k {
        lo = lo.min(value(j));
    }
    if k == 1 {
        return lo;
    }
    let mut s = 0.0;
    for j in 0..k {
        s += (-(value(j) - lo) / eps).exp();
    }
    lo - eps * (s / k as f64).ln()
}

/// Soft minimum of `costs[k] - pot[k]` over contiguous slices.
#[inline]
fn soft_min_slice(costs: &[f64], pot: &[f64], eps: f64) -> f64 {
    let lo = costs
        .iter()
        .zip(pot)
        .map(|(c, p)| c - p)
        .fold(f64::INFINITY, f64::min);
    if costs.len() == 1 {
        return lo;
    }
    let inv = 1.0 / eps;
    let s: f64 = costs.iter().zip(pot).map(|(c, p)| ((lo - (c - p)) * inv).exp()).sum();
    lo - eps * (s / costs.len() as f64).ln()
}

/// Largest `n * m` for which the solver keeps the cost matrix (and its
/// transpose) in memory instead of recomputing distances.
const COST_CACHE_LIMIT: usize = 1 << 23;

#[derive(Clone, Debug)]
struct CostCache {
    /// `n x m`, row-major.
    rows: Vec<f64>,
    /// `m x n`, row-major.
    cols: Vec<f64>,
}

impl CostCache {
    fn build(p: &OtProblem) -> Option<Self> {
        let (n, m) = (p.n(), p.m());
        if n.saturating_mul(m) > COST_CACHE_LIMIT {
            return None;
        }
        let mut rows = vec![0.0; n * m];
        let mut cols = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                let c = p.cost(i, j);
                rows[i * m + j] = c;
                cols[j * n + i] = c;
            }
        }
        Some(Self { rows, cols })
    }
}

/// Uniform-weight entropic OT problem between `source` (n x d) and `target` (m x d).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtProblem {
    pub source: Matrix,
    pub target: Matrix,
    pub epsilon: f64,
}

impl OtProblem {
    pub fn new(source: Matrix, target: Matrix, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Param(format!("epsilon must be positive, got {epsilon}")));
        }
        if source.nrows() == 0 || target.nrows() == 0 {
            return Err(Error::Param("source and target must be nonempty".into()));
        }
        if source.ncols() != target.ncols() {
            return Err(Error::Dimension(format!(
                "source is {}-d, target is {}-d",
                source.ncols(),
                target.ncols()
            )));
        }
        if !source.is_finite() || !target.is_finite() {
            return Err(Error::Param("OT problem has non-finite points".into()));
        }
        Ok(Self {
            source,
            target,
            epsilon,
        })
    }

    pub fn n(&self) -> usize {
        self.source.nrows()
    }

    pub fn m(&self) -> usize {
        self.target.nrows()
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        squared_distance(self.source.row(i), self.target.row(j))
    }

    /// `f` that makes the row marginals exact for the given `g`.
    pub fn f_transform(&self, g: &[f64]) -> Vec<f64> {
        let (m, eps) = (self.m(), self.epsilon);
        (0..self.n())
            .into_par_iter()
            .map(|i| soft_min(m, eps, |j| self.cost(i, j) - g[j]))
            .collect()
    }

    /// `g` that makes the column marginals exact for the given `f`.
    pub fn g_transform(&self, f: &[f64]) -> Vec<f64> {
        let (n, eps) = (self.n(), self.epsilon);
        (0..self.m())
            .into_par_iter()
            .map(|j| soft_min(n, eps, |i| self.cost(i, j) - f[i]))
            .collect()
    }
}

/// Dual vectors of a (possibly partial) Sinkhorn solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub problem: OtProblem,
    pub iterations: usize,
    pub marginal_error: f64,
}

impl DualPotentials {
    pub fn epsilon(&self) -> f64 {
        self.problem.epsilon
    }

    /// Row and column sums of the implied coupling.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let p = &self.problem;
        let (n, m, eps) = (p.n() as f64, p.m() as f64, p.epsilon);
        // row sum i = exp((f_i - fbar_i) / eps) / n with fbar the f-transform of g
        let fbar = p.f_transform(&self.g);
        let gbar = p.g_transform(&self.f);
        let rows = self.f.iter().zip(&fbar).map(|(f, b)| ((f - b) / eps).exp() / n).collect();
        let cols = self.g.iter().zip(&gbar).map(|(g, b)| ((g - b) / eps).exp() / m).collect();
        (rows, cols)
    }

    /// Dense coupling matrix; intended for small problems.
    pub fn coupling(&self) -> Matrix {
        let p = &self.problem;
        let (n, m, eps) = (p.n(), p.m(), p.epsilon);
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                let v = ((self.f[i] + self.g[j] - p.cost(i, j)) / eps).exp() / (n * m) as f64;
                out.set(i, j, v);
            }
        }
        out
    }

    /// Adds `c` to `f` and subtracts it from `g`; the coupling is unchanged.
    pub fn shift_gauge(&mut self, c: f64) {
        self.f.iter_mut().for_each(|v| *v += c);
        self.g.iter_mut().for_each(|v| *v -= c);
    }
}

/// Largest absolute deviation of any row sum from `1/n` or column sum from `1/m`.
pub fn coupling_marginal_error(pot: &DualPotentials) -> f64 {
    let (rows, cols) = pot.marginals();
    let n = pot.problem.n() as f64;
    let m = pot.problem.m() as f64;
    let r = rows.iter().map(|r| (r - 1.0 / n).abs()).fold(0.0, f64::max);
    let c = cols.iter().map(|c| (c - 1.0 / m).abs()).fold(0.0, f64::max);
    r.max(c)
}

/// `mean(f) + mean(g) - eps * total coupling mass`.
pub fn dual_objective(pot: &DualPotentials) -> f64 {
    let p = &pot.problem;
    let eps = p.epsilon;
    let fbar = p.f_transform(&pot.g);
    let mass: f64 = pot
        .f
        .iter()
        .zip(&fbar)
        .map(|(f, b)| ((f - b) / eps).exp())
        .sum::<f64>()
        / p.n() as f64;
    mean(&pot.f) + mean(&pot.g) - eps * mass
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Stepwise Sinkhorn driver. `solve` covers the common case; the stepping
/// API exists for diagnostics such as tracking the dual objective.
#[derive(Clone, Debug)]
pub struct Sinkhorn {
    problem: OtProblem,
    cache: Option<CostCache>,
    f: Vec<f64>,
    g: Vec<f64>,
    iterations: usize,
}

impl Sinkhorn {
    pub fn new(problem: OtProblem) -> Self {
        let (n, m) = (problem.n(), problem.m());
        Self {
            cache: CostCache::build(&problem),
            problem,
            f: vec![0.0; n],
            g: vec![0.0; m],
            iterations: 0,
        }
    }

    fn f_transform(&self, g: &[f64]) -> Vec<f64> {
        match &self.cache {
            Some(c) => {
                let eps = self.problem.epsilon;
                c.rows.par_chunks_exact(g.len()).map(|row| soft_min_slice(row, g, eps)).collect()
            }
            None => self.problem.f_transform(g),
        }
    }

    fn g_transform(&self, f: &[f64]) -> Vec<f64> {
        match &self.cache {
            Some(c) => {
                let eps = self.problem.epsilon;
                c.cols.par_chunks_exact(f.len()).map(|col| soft_min_slice(col, f, eps)).collect()
            }
            None => self.problem.g_transform(f),
        }
    }

    pub fn update_f(&mut self) {
        self.f = self.f_transform(&self.g);
    }

    pub fn update_g(&mut self) {
        self.g = self.g_transform(&self.f);
    }

    /// One full iteration: `f` then `g`.
    pub fn step(&mut self) {
        self.update_f();
        self.update_g();
        self.iterations += 1;
    }

    pub fn potentials(&self) -> DualPotentials {
        let mut p = DualPotentials {
            f: self.f.clone(),
            g: self.g.clone(),
            problem: self.problem.clone(),
            iterations: self.iterations,
            marginal_error: f64::NAN,
        };
        p.marginal_error = coupling_marginal_error(&p);
        p
    }

    /// Iterates until the row-marginal violation (columns are exact after
    /// each `g` update) drops to `tol`, or `max_iter` iterations have run.
    pub fn run(mut self, tol: f64, max_iter: usize) -> Result<DualPotentials> {
        if !(tol > 0.0) {
            return Err(Error::Param(format!("tolerance must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(Error::Param("max_iter must be >= 1".into()));
        }
        let n = self.problem.n() as f64;
        let eps = self.problem.epsilon;
        if self.iterations == 0 {
            self.step();
        }
        let mut err;
        loop {
            let f_next = self.f_transform(&self.g);
            err = self
                .f
                .iter()
                .zip(&f_next)
                .map(|(f, fb)| (((f - fb) / eps).exp() - 1.0).abs() / n)
                .fold(0.0, f64::max);
            if err.is_nan() {
                err = f64::INFINITY;
            }
            if err <= tol || self.iterations >= max_iter {
                break;
            }
            self.f = f_next;
            self.update_g();
            self.iterations += 1;
        }
        let gauge = mean(&self.g);
        let mut pot = DualPotentials {
            f: self.f,
            g: self.g,
            problem: self.problem,
            iterations: self.iterations,
            marginal_error: err,
        };
        pot.shift_gauge(gauge);
        if err <= tol {
            Ok(pot)
        } else {
            Err(Error::NotConverged {
                iterations: pot.iterations,
                marginal_error: err,
                potentials: Box::new(pot),
            })
        }
    }
}

/// Solves `prob` to marginal tolerance `tol`. On hitting `max_iter` the
/// error carries the last potentials.
pub fn sinkhorn_solve(prob: OtProblem, tol: f64, max_iter: usize) -> Result<DualPotentials> {
    Sinkhorn::new(prob).run(tol, max_iter)
}
