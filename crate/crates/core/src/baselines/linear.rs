//! L2-regularized linear classifiers over sparse rows.
//!
//! Logistic regression minimizes `0.5 |w|^2 + C * sum log(1 + exp(-y m))`
//! with L-BFGS (bias unregularized). The SVM minimizes
//! `0.5 |w|^2 + C * sum max(0, 1 - y m)` by dual coordinate descent, with
//! the bias folded in as a constant feature.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Label;
use crate::textprep::SparseVector;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct LogisticObjective<'a> {
    x: &'a [SparseVector],
    y: Vec<f64>,
    c: f64,
    dim: usize,
}

impl LogisticObjective<'_> {
    /// Objective and gradient at `theta = [w.., b]`.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (w, b) = theta.split_at(self.dim);
        let b = b[0];
        grad[..self.dim].copy_from_slice(w);
        grad[self.dim] = 0.0;
        let mut f = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        for (xi, &yi) in self.x.iter().zip(&self.y) {
            let m = xi.dot_dense(w) + b;
            f += self.c * softplus(-yi * m);
            let coef = -self.c * yi * sigmoid(-yi * m);
            for &(j, v) in xi.entries() {
                grad[j] += coef * v;
            }
            grad[self.dim] += coef;
        }
        f
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits logistic regression. Stops when the gradient's max-abs entry falls to
/// `tol * max(1, initial max-abs gradient)`, after `max_iter` iterations, or
/// when the line search can no longer decrease the objective.
pub fn fit_logistic(
    x: &[SparseVector],
    y: &[Label],
    c: f64,
    tol: f64,
    max_iter: usize,
) -> (LinearModel, SolveSummary) {
    let dim = x.first().map_or(0, SparseVector::dimension);
    let obj = LogisticObjective {
        x,
        y: y.iter().map(|l| l.signed()).collect(),
        c,
        dim,
    };
    let n = dim + 1;
    let mut theta = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut f = obj.eval(&theta, &mut grad);
    let threshold = tol * inf_norm(&grad).max(1.0);

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = inf_norm(&grad) <= threshold;

    while !converged && iterations < max_iter {
        iterations += 1;
        let mut dir = two_loop_direction(&grad, &history);
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        let mut step = if history.is_empty() {
            (1.0 / dot(&grad, &grad).sqrt()).min(1.0)
        } else {
            1.0
        };

        let f_new = loop {
            for i in 0..n {
                trial[i] = theta[i] + step * dir[i];
            }
            let f_trial = obj.eval(&trial, &mut trial_grad);
            if f_trial <= f + ARMIJO_C1 * step * slope {
                break Some(f_trial);
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some(f_new) = f_new else {
            // No representable decrease left along a descent direction.
            converged = true;
            break;
        };

        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        std::mem::swap(&mut theta, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        f = f_new;
        converged = inf_norm(&grad) <= threshold;
    }

    let bias = theta[dim];
    theta.truncate(dim);
    (
        LinearModel {
            weights: theta,
            bias,
        },
        SolveSummary {
            iterations,
            converged,
            objective: f,
        },
    )
}

fn two_loop_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for qi in &mut q {
        *qi = -*qi;
    }
    q
}

/// Fits the hinge-loss SVM. Each epoch visits the examples in a seeded
/// random order; stops when the projected-gradient spread drops to `tol` or
/// after `max_iter` epochs.
pub fn fit_hinge(
    x: &[SparseVector],
    y: &[Label],
    c: f64,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> (LinearModel, SolveSummary) {
    let dim = x.first().map_or(0, SparseVector::dimension);
    let ys: Vec<f64> = y.iter().map(|l| l.signed()).collect();
    let diag: Vec<f64> = x.iter().map(|xi| xi.norm_squared() + 1.0).collect();
    let mut alpha = vec![0.0; x.len()];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = ys[i] * (x[i].dot_dense(&w) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * ys[i];
                for &(j, v) in x[i].entries() {
                    w[j] += delta * v;
                }
                b += delta;
            }
        }
        if pg_max - pg_min <= tol {
            converged = true;
            break;
        }
    }

    let objective = 0.5 * (dot(&w, &w) + b * b)
        + c * x
            .iter()
            .zip(&ys)
            .map(|(xi, yi)| (1.0 - yi * (xi.dot_dense(&w) + b)).max(0.0))
            .sum::<f64>();
    (
        LinearModel { weights: w, bias: b },
        SolveSummary {
            iterations,
            converged,
            objective,
        },
    )
}
