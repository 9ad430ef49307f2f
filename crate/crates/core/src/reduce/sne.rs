//! Stochastic neighbour embedding with Gaussian kernels in both spaces.
//!
//! High-dimensional conditionals use a per-point bandwidth found by
//! perplexity bisection:
//!
//! ```text
//! p_{j|i} = exp(-d_ij^2 / 2 sigma_i^2) / sum_k exp(-d_ik^2 / 2 sigma_i^2)
//! ```
//!
//! The low-dimensional conditionals use a fixed unit-bandwidth kernel
//! `q_{j|i} ~ exp(-|y_i - y_j|^2)` (or a Student-t kernel when selected), and
//! the embedding minimises `sum_i KL(P_i || Q_i)` by gradient descent with
//! momentum. The gradient is
//!
//! ```text
//! dC/dy_i = 2 sum_j (y_i - y_j) (p_{j|i} - q_{j|i} + p_{i|j} - q_{i|j})
//! ```
//!
//! (Student-t: each term additionally weighted by `(1 + |y_i - y_j|^2)^-1`).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const PERPLEXITY_TOL: f64 = 1e-4;
const MAX_BISECTION_STEPS: usize = 100;
const INIT_STD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SneKernel {
    #[default]
    Gaussian,
    StudentT,
}

impl fmt::Display for SneKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SneKernel::Gaussian => "gaussian",
            SneKernel::StudentT => "student-t",
        })
    }
}

impl FromStr for SneKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SneKernel::Gaussian),
            "student-t" | "t" => Ok(SneKernel::StudentT),
            other => Err(Error::Parse(format!("unknown SNE kernel '{other}'"))),
        }
    }
}

impl SneKernel {
    /// `ln k(d2)`.
    #[inline]
    fn log_kernel(self, d2: f64) -> f64 {
        match self {
            SneKernel::Gaussian => -d2,
            SneKernel::StudentT => -d2.ln_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SneConfig {
    pub target_dim: usize,
    /// `None` selects `min(30, floor((n - 1) / 3))` at fit time.
    pub perplexity: Option<f64>,
    pub max_iter: usize,
    /// Step size on the summed conditional KL. With the Gaussian output
    /// kernel the attraction grows linearly with distance, so steps much above
    /// 0.3 oscillate and blow up.
    pub learning_rate: f64,
    /// Momentum for the first `momentum_switch_iter` iterations.
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    pub kernel: SneKernel,
}

impl Default for SneConfig {
    fn default() -> Self {
        Self {
            target_dim: 2,
            perplexity: None,
            max_iter: 500,
            learning_rate: 0.2,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 100,
            seed: 0,
            kernel: SneKernel::Gaussian,
        }
    }
}

impl SneConfig {
    pub fn default_perplexity(n: usize) -> f64 {
        (((n.saturating_sub(1)) / 3) as f64).min(30.0)
    }

    pub fn resolved_perplexity(&self, n: usize) -> f64 {
        self.perplexity.unwrap_or_else(|| Self::default_perplexity(n))
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.target_dim == 0 {
            return bad("target_dim must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive".into());
        }
        for m in [self.momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return bad(format!("momentum {m} outside [0, 1)"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        check_perplexity(n, self.resolved_perplexity(n))
    }
}

fn check_perplexity(n: usize, perplexity: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidConfig(format!("SNE needs at least 3 points, got {n}")));
    }
    if !(perplexity >= 1.0 && perplexity < n as f64) {
        return Err(Error::InvalidConfig(format!(
            "perplexity {perplexity} must lie in [1, n = {n})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Array2<f64>,
    pub final_cost: f64,
    /// Cost before every update, followed by the cost of the returned
    /// coordinates.
    pub cost_trace: Vec<f64>,
}

pub fn squared_distances(data: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = data.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = data
                .row(i)
                .iter()
                .zip(data.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Row `i` of the conditional matrix for precision `beta = 1 / (2 sigma^2)`;
/// returns the row and its entropy in bits.
fn conditional_row(d2: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = d2
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&d, o)) in d2.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { (-beta * (d - min)).exp() };
        sum += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            h -= *o * o.log2();
        }
    }
    h
}

/// Conditional matrix `p_{j|i}` with explicit per-row bandwidths `sigmas`.
pub fn conditional_p_with_sigmas(data: ArrayView2<'_, f64>, sigmas: &[f64]) -> Result<Array2<f64>> {
    let n = data.nrows();
    if sigmas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigmas.len() });
    }
    if n < 2 {
        return Err(Error::InvalidConfig("need at least 2 points".into()));
    }
    let d2 = squared_distances(data);
    let mut p = Array2::zeros((n, n));
    for (i, mut row) in p.axis_iter_mut(Axis(0)).enumerate() {
        let beta = 1.0 / (2.0 * sigmas[i] * sigmas[i]);
        conditional_row(d2.row(i).as_slice().unwrap(), i, beta, row.as_slice_mut().unwrap());
    }
    Ok(p)
}

/// Row-stochastic conditional matrix whose rows each reach `perplexity`
/// (`2^H(P_i)`) within `1e-4`.
pub fn sne_conditional_p(data: ArrayView2<'_, f64>, perplexity: f64) -> Result<Array2<f64>> {
    let n = data.nrows();
    check_perplexity(n, perplexity)?;
    let d2 = squared_distances(data);
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| perplexity_row(d2.row(i).as_slice().unwrap(), i, perplexity))
        .collect();
    let mut p = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        p.row_mut(i).assign(&ndarray::ArrayView1::from(&row?));
    }
    Ok(p)
}

fn perplexity_row(d2: &[f64], i: usize, perplexity: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; d2.len()];
    let target = perplexity.log2();
    let (lo_d, hi_d) = d2
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, &v)| (a.min(v), b.max(v)));
    if hi_d - lo_d <= 1e-12 * hi_d {
        // equidistant neighbours (up to rounding): the row is uniform for
        // every bandwidth
        conditional_row(d2, i, 1.0, &mut out);
        return Ok(out);
    }
    let mean_d = d2.iter().sum::<f64>() / (d2.len() - 1) as f64;
    let mut beta = if mean_d > 0.0 { 1.0 / mean_d } else { 1.0 };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..MAX_BISECTION_STEPS {
        let h = conditional_row(d2, i, beta, &mut out);
        if (h.exp2() - perplexity).abs() < PERPLEXITY_TOL {
            return Ok(out);
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    Err(Error::PerplexityUnreachable { row: i, perplexity })
}

/// Joint matrix `p_ij = (p_{i|j} + p_{j|i}) / 2n`; sums to one.
pub fn joint_p(conditional: &Array2<f64>) -> Array2<f64> {
    let n = conditional.nrows() as f64;
    (conditional + &conditional.t()) / (2.0 * n)
}

pub fn sne_p_matrix(data: ArrayView2<'_, f64>, perplexity: f64) -> Result<Array2<f64>> {
    Ok(joint_p(&sne_conditional_p(data, perplexity)?))
}

/// Low-dimensional conditionals `q_{j|i}` for `coords`.
pub fn conditional_q(coords: ArrayView2<'_, f64>, kernel: SneKernel) -> Array2<f64> {
    let n = coords.nrows();
    let d2 = squared_distances(coords);
    let mut q = Array2::zeros((n, n));
    for i in 0..n {
        let logs: Vec<f64> = (0..n).map(|j| kernel.log_kernel(d2[[i, j]])).collect();
        let max = (0..n).filter(|&j| j != i).map(|j| logs[j]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..n).filter(|&j| j != i).map(|j| (logs[j] - max).exp()).sum();
        for j in 0..n {
            if j != i {
                q[[i, j]] = (logs[j] - max).exp() / z;
            }
        }
    }
    q
}

/// Precomputed high-dimensional side of the objective.
struct Affinities {
    /// `p_{j|i} + p_{i|j}`.
    sym: Array2<f64>,
    /// `sum_ij p_{j|i} ln p_{j|i}`.
    neg_entropy: f64,
}

impl Affinities {
    fn new(conditional: &Array2<f64>) -> Self {
        let sym = conditional + &conditional.t();
        let neg_entropy = conditional
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum();
        Self { sym, neg_entropy }
    }
}

/// Cost `sum_i KL(P_i || Q_i)` and its gradient with respect to `y`.
fn objective(aff: &Affinities, y: &Array2<f64>, kernel: SneKernel) -> (f64, Array2<f64>) {
    let (n, dim) = y.dim();
    let y = y.as_standard_layout();
    let ys = y.as_slice().expect("standard layout");
    // log-kernel matrix, row-major; diagonal unused
    let log_k: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let yi = &ys[i * dim..(i + 1) * dim];
            (0..n).map(move |j| {
                let yj = &ys[j * dim..(j + 1) * dim];
                let d2: f64 = yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
                kernel.log_kernel(d2)
            })
        })
        .collect();
    let log_z: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &log_k[i * n..(i + 1) * n];
            let max = (0..n).filter(|&j| j != i).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
            max + (0..n).filter(|&j| j != i).map(|j| (row[j] - max).exp()).sum::<f64>().ln()
        })
        .collect();
    let rows: Vec<(f64, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = vec![0.0; dim];
            let mut cross = 0.0;
            let yi = &ys[i * dim..(i + 1) * dim];
            let row = &log_k[i * n..(i + 1) * n];
            let sym = aff.sym.row(i);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let lk = row[j];
                let s = sym[j];
                cross += s * lk;
                let q_ji = (lk - log_z[i]).exp();
                let q_ij = (lk - log_z[j]).exp();
                let w = match kernel {
                    SneKernel::Gaussian => 1.0,
                    SneKernel::StudentT => lk.exp(),
                };
                let f = 2.0 * w * (s - q_ji - q_ij);
                let yj = &ys[j * dim..(j + 1) * dim];
                for ((gk, a), b) in g.iter_mut().zip(yi).zip(yj) {
                    *gk += f * (a - b);
                }
            }
            (cross, g)
        })
        .collect();
    let mut grad = Array2::zeros((n, dim));
    let mut cross = 0.0;
    for (i, (c, g)) in rows.into_iter().enumerate() {
        cross += c;
        grad.row_mut(i).assign(&ndarray::ArrayView1::from(&g));
    }
    let cost = aff.neg_entropy + log_z.iter().sum::<f64>() - 0.5 * cross;
    (cost, grad)
}

/// Cost and gradient of the embedding objective for a given conditional `P`.
pub fn sne_cost_and_gradient(
    conditional: &Array2<f64>,
    coords: &Array2<f64>,
    kernel: SneKernel,
) -> (f64, Array2<f64>) {
    objective(&Affinities::new(conditional), coords, kernel)
}

pub fn sne_fit(data: ArrayView2<'_, f64>, config: &SneConfig) -> Result<Embedding> {
    let n = data.nrows();
    config.validate(n)?;
    let conditional = sne_conditional_p(data, config.resolved_perplexity(n))?;
    sne_fit_conditional(&conditional, config)
}

/// Optimises an embedding for a precomputed conditional matrix.
pub fn sne_fit_conditional(conditional: &Array2<f64>, config: &SneConfig) -> Result<Embedding> {
    let n = conditional.nrows();
    let aff = Affinities::new(conditional);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut y = Array2::from_shape_simple_fn((n, config.target_dim), || init.sample(&mut rng));
    let mut velocity = Array2::<f64>::zeros((n, config.target_dim));
    let mut cost_trace = Vec::with_capacity(config.max_iter + 1);
    for iter in 0..config.max_iter {
        let (cost, grad) = objective(&aff, &y, config.kernel);
        if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteCost { iteration: iter });
        }
        cost_trace.push(cost);
        let momentum = if iter < config.momentum_switch_iter {
            config.momentum
        } else {
            config.final_momentum
        };
        velocity = velocity * momentum - grad * config.learning_rate;
        y += &velocity;
    }
    let (final_cost, _) = objective(&aff, &y, config.kernel);
    if !final_cost.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost { iteration: config.max_iter });
    }
    cost_trace.push(final_cost);
    Ok(Embedding {
        coords: y,
        final_cost,
        cost_trace,
    })
}
