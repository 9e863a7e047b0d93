//! Binary logistic regression fitted by iteratively reweighted least squares.
//!
//! The model is `P(label = 1 | x) = sigmoid(intercept + <coefficients, x>)`.
//! Note the sign convention differs from a membership model written as
//! `P(S=1|x) = 1/(1 + exp(theta0 + <theta, x>))`: there `theta = -coefficients`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, log1p, sqrt, sum};

/// Linear predictors are clamped to this magnitude so probabilities stay in (0, 1).
const LOGIT_CLAMP: f64 = 36.0;
const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    /// Ridge penalty on the coefficients (the intercept is not penalized).
    pub l2: f64,
    pub max_iters: usize,
    /// Bound on the max-norm of the mean log-likelihood gradient.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 0.0,
            max_iters: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl LogisticModel {
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        self.intercept + crate::math::dot(&self.coefficients, x)
    }

    /// `P(label = 1 | x)`, strictly inside (0, 1) for finite `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + exp(-z))
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + log1p(exp(-z))
    } else {
        log1p(exp(z))
    }
}

/// Penalized mean log-likelihood.
fn objective(beta: &[f64], rows: &[Vec<f64>], labels: &[bool], l2: f64) -> f64 {
    let n = rows.len() as f64;
    let ll = sum(rows.iter().zip(labels).map(|(x, &y)| {
        let z = beta[0] + crate::math::dot(&beta[1..], x);
        if y {
            -softplus(-z)
        } else {
            -softplus(z)
        }
    }));
    ll / n - 0.5 * l2 * sum(beta[1..].iter().map(|b| b * b)) / n
}

/// In-place Cholesky solve of `a x = b` for symmetric positive definite `a`.
fn cholesky_solve(mut a: Vec<Vec<f64>>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 1e-14 * a[j][j].max(1e-300)) {
            return None;
        }
        let d = sqrt(d);
        a[j][j] = d;
        for i in (j + 1)..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= a[k][i] * y[k];
        }
        y[i] /= a[i][i];
    }
    Some(y)
}

/// Maximizes the (ridge-penalized) log-likelihood by Newton/IRLS with step halving.
pub fn fit_logistic(features: &[Vec<f64>], labels: &[bool], cfg: &LogisticConfig) -> Result<LogisticModel> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if let Some(i) = features.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(i));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    if !(cfg.l2 >= 0.0 && cfg.tol > 0.0) {
        return Err(Error::InvalidConfig("l2 must be nonnegative and tol positive"));
    }

    let p = d + 1;
    let nf = n as f64;
    let mean = positives as f64 / nf;
    let mut beta = vec![0.0; p];
    beta[0] = ln(mean / (1.0 - mean));
    let mut current = objective(&beta, features, labels, cfg.l2);
    let mut gradient_norm;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // gradient and Hessian of the mean log-likelihood
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (x, &y) in features.iter().zip(labels) {
            let z = beta[0] + crate::math::dot(&beta[1..], x);
            let mu = sigmoid(z);
            let w = mu * (1.0 - mu);
            let r = if y { 1.0 } else { 0.0 } - mu;
            grad[0] += r;
            hess[0][0] += w;
            for i in 0..d {
                grad[i + 1] += r * x[i];
                hess[i + 1][0] += w * x[i];
                for k in 0..=i {
                    hess[i + 1][k + 1] += w * x[i] * x[k];
                }
            }
        }
        for i in 0..p {
            grad[i] /= nf;
            for k in 0..=i {
                hess[i][k] /= nf;
            }
        }
        for i in 1..p {
            grad[i] -= cfg.l2 * beta[i] / nf;
            hess[i][i] += cfg.l2 / nf;
        }
        gradient_norm = grad.iter().fold(0.0, |acc: f64, g| acc.max(abs(*g)));
        if gradient_norm <= cfg.tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;

        let step = match cholesky_solve(hess, &grad) {
            Some(s) => s,
            None if cfg.l2 == 0.0 && saturated(&beta, features, labels) => {
                return Err(Error::PerfectSeparation(norm(&beta)));
            }
            None => return Err(Error::SingularDesign),
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let value = objective(&trial, features, labels, cfg.l2);
            if value >= current {
                beta = trial;
                current = value;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if norm(&beta) > DIVERGENCE_NORM {
            return Err(Error::PerfectSeparation(norm(&beta)));
        }
        if !improved {
            break;
        }
    }
    // every label reproduced by the sign of the logit means the data are separable
    if cfg.l2 == 0.0 && saturated(&beta, features, labels) {
        return Err(Error::PerfectSeparation(norm(&beta)));
    }
    Ok(LogisticModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        iterations,
        gradient_norm,
        converged,
    })
}

fn norm(beta: &[f64]) -> f64 {
    sqrt(sum(beta.iter().map(|b| b * b)))
}

/// Every training label is reproduced with near certainty.
fn saturated(beta: &[f64], rows: &[Vec<f64>], labels: &[bool]) -> bool {
    rows.iter().zip(labels).all(|(x, &y)| {
        let z = beta[0] + crate::math::dot(&beta[1..], x);
        if y {
            z > 10.0
        } else {
            z < -10.0
        }
    })
}
