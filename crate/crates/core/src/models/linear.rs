//! L2-regularized logistic regression over sparse TF-IDF features, trained
//! with limited-memory BFGS.
//!
//! Objective per binary problem (or jointly for the multinomial model):
//! `(1/N) Σ loss_i + ||w||² / (2 C N)`; intercepts are not penalized.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::models::nn::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the relative objective change falls below this.
    pub tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` (returning value and gradient) from `x0`.
pub fn minimize<F>(f: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> LbfgsResult
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut history = vec![fx];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let gnorm = dotv(&g, &g).sqrt();
        if gnorm < 1e-12 {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dotv(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = mem
            .back()
            .map_or(1.0 / gnorm.max(1.0), |(s, y, _)| dotv(s, y) / dotv(y, y));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dotv(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dotv(&g, &d);
        if slope >= 0.0 {
            mem.clear();
            d = g.iter().map(|v| -v / gnorm.max(1.0)).collect();
            slope = dotv(&g, &d);
        }
        // Armijo backtracking
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (fnew, gnew) = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((xn, fnew, gnew)) = accepted else {
            converged = true;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dotv(&s, &y);
        if sy > 1e-12 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let change = (fx - fnew).abs() / fx.abs().max(fnew.abs()).max(f64::MIN_POSITIVE);
        x = xn;
        fx = fnew;
        g = gnew;
        history.push(fx);
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    LbfgsResult {
        x,
        objective: fx,
        iterations,
        converged,
        history,
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary objective over parameters `[w (dim), b]`.
pub fn binary_objective(xs: &[SparseVector], y: &[bool], dim: usize, c: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let (w, b) = theta.split_at(dim);
    let z: Vec<f64> = xs.par_iter().map(|x| x.dot(w) + b[0]).collect();
    let mut grad = vec![0.0; dim + 1];
    let mut loss = 0.0;
    for ((x, &zi), &yi) in xs.iter().zip(&z).zip(y) {
        let t = if yi { 1.0 } else { 0.0 };
        loss += softplus(zi) - t * zi;
        let r = sigmoid(zi) - t;
        for (i, v) in x.iter() {
            grad[i] += r * v;
        }
        grad[dim] += r;
    }
    let reg = 1.0 / (c * n);
    let mut f = loss / n;
    for i in 0..dim {
        grad[i] = grad[i] / n + reg * w[i];
        f += 0.5 * reg * w[i] * w[i];
    }
    grad[dim] /= n;
    (f, grad)
}

/// Multinomial objective over parameters `[W (k × dim) row-major, b (k)]`.
pub fn multinomial_objective(xs: &[SparseVector], y: &[usize], k: usize, dim: usize, c: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let (w, b) = theta.split_at(k * dim);
    let z: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|x| (0..k).map(|j| x.dot(&w[j * dim..(j + 1) * dim]) + b[j]).collect())
        .collect();
    let mut grad = vec![0.0; k * dim + k];
    let mut loss = 0.0;
    for ((x, zi), &yi) in xs.iter().zip(&z).zip(y) {
        let max = zi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = zi.iter().map(|v| (v - max).exp()).sum();
        loss += s.ln() + max - zi[yi];
        for j in 0..k {
            let r = (zi[j] - max).exp() / s - if j == yi { 1.0 } else { 0.0 };
            for (i, v) in x.iter() {
                grad[j * dim + i] += r * v;
            }
            grad[k * dim + j] += r;
        }
    }
    let reg = 1.0 / (c * n);
    let mut f = loss / n;
    for i in 0..k * dim {
        grad[i] = grad[i] / n + reg * w[i];
        f += 0.5 * reg * w[i] * w[i];
    }
    for j in 0..k {
        grad[k * dim + j] /= n;
    }
    (f, grad)
}

/// Fitted weights: `weights[c]` and `bias[c]` per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearWeights {
    pub dim: usize,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub multinomial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLog {
    pub iterations: Vec<usize>,
    pub objective: Vec<f64>,
    pub converged: Vec<bool>,
}

/// One-vs-rest binary problems, solved in parallel across classes.
pub fn fit_one_vs_rest(xs: &[SparseVector], gold: &[Vec<bool>], k: usize, dim: usize, c: f64, cfg: &LbfgsConfig) -> (LinearWeights, LinearLog) {
    let results: Vec<LbfgsResult> = (0..k)
        .into_par_iter()
        .map(|class| {
            let y: Vec<bool> = gold.iter().map(|g| g[class]).collect();
            minimize(|t| binary_objective(xs, &y, dim, c, t), vec![0.0; dim + 1], cfg)
        })
        .collect();
    let log = LinearLog {
        iterations: results.iter().map(|r| r.iterations).collect(),
        objective: results.iter().map(|r| r.objective).collect(),
        converged: results.iter().map(|r| r.converged).collect(),
    };
    let weights = results.iter().map(|r| r.x[..dim].to_vec()).collect();
    let bias = results.iter().map(|r| r.x[dim]).collect();
    (
        LinearWeights {
            dim,
            weights,
            bias,
            multinomial: false,
        },
        log,
    )
}

pub fn fit_multinomial(xs: &[SparseVector], y: &[usize], k: usize, dim: usize, c: f64, cfg: &LbfgsConfig) -> (LinearWeights, LinearLog) {
    let r = minimize(|t| multinomial_objective(xs, y, k, dim, c, t), vec![0.0; k * (dim + 1)], cfg);
    let weights = (0..k).map(|j| r.x[j * dim..(j + 1) * dim].to_vec()).collect();
    let bias = r.x[k * dim..].to_vec();
    (
        LinearWeights {
            dim,
            weights,
            bias,
            multinomial: true,
        },
        LinearLog {
            iterations: vec![r.iterations],
            objective: vec![r.objective],
            converged: vec![r.converged],
        },
    )
}

impl LinearWeights {
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        let z: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| x.dot(w) + b)
            .collect();
        if self.multinomial {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        } else {
            z.into_iter().map(sigmoid).collect()
        }
    }
}
