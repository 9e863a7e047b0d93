//! Multiplicative perturbations `p0(x) (1 + eps f(x))` and the first-order
//! change of the objective along them.

use alloc::vec::Vec;

use crate::distributions::{expectation, AuditContext, DiscreteDistribution, ScoreFunction};
use crate::error::{Error, Result};
use crate::math::{abs, ln, sqrt, sum};

/// Default tolerance on the zero-mean / unit-second-moment constraints.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Nonnegative weights of the four divergence terms of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaWeights([f64; 4]);

impl LambdaWeights {
    pub fn new(l1: f64, l2: f64, l3: f64, l4: f64) -> Result<Self> {
        Self::from_array([l1, l2, l3, l4])
    }

    pub fn from_array(w: [f64; 4]) -> Result<Self> {
        for &l in &w {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::NegativeLambda(l));
            }
        }
        Ok(LambdaWeights(w))
    }

    /// Weight on `J(Q_X || P_{X|S=0})`.
    pub fn l1(&self) -> f64 {
        self.0[0]
    }

    /// Weight on `J(Q_X || P_{X|S=1})`.
    pub fn l2(&self) -> f64 {
        self.0[1]
    }

    /// Weight on `J(Q_Y || P_{Y|S=0})`.
    pub fn l3(&self) -> f64 {
        self.0[2]
    }

    /// Weight on `J(Q_Y || P_{Y|S=1})`.
    pub fn l4(&self) -> f64 {
        self.0[3]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_array(self.0.map(|l| c * l))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&l| l == 0.0)
    }
}

/// Moments `(E_p[f], E_p[f^2])`.
pub(crate) fn moments(p: &DiscreteDistribution, f: &ScoreFunction) -> Result<(f64, f64)> {
    let mean = expectation(p, f)?;
    let second = sum(p.masses().iter().zip(f.values()).map(|(m, v)| m * v * v));
    Ok((mean, second))
}

/// Whether `f` is zero-mean with unit second moment under `p`, within `tol`.
pub fn is_feasible_direction(p: &DiscreteDistribution, f: &ScoreFunction, tol: f64) -> Result<bool> {
    let (mean, second) = moments(p, f)?;
    Ok(abs(mean) <= tol && abs(second - 1.0) <= tol)
}

fn require_feasible(p: &DiscreteDistribution, f: &ScoreFunction) -> Result<()> {
    let (mean, second_moment) = moments(p, f)?;
    if abs(mean) <= DEFAULT_FEASIBILITY_TOL && abs(second_moment - 1.0) <= DEFAULT_FEASIBILITY_TOL {
        Ok(())
    } else {
        Err(Error::InfeasibleDirection { mean, second_moment })
    }
}

/// Standardizes `f_raw` under `p`: `(f - E f) / sd(f)`.
pub fn normalize_direction(p: &DiscreteDistribution, f_raw: &ScoreFunction) -> Result<ScoreFunction> {
    let mean = expectation(p, f_raw)?;
    let var = sum(p
        .masses()
        .iter()
        .zip(f_raw.values())
        .map(|(m, v)| m * (v - mean) * (v - mean)));
    let scale = f_raw.values().iter().fold(abs(mean), |acc, v| acc.max(abs(*v)));
    if !(var > 1e-28 * scale * scale) || var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sd = sqrt(var);
    let values: Vec<f64> = f_raw.values().iter().map(|v| (v - mean) / sd).collect();
    // cancellation in a nearly constant input leaves a residual mean; remove it once more
    let residual = sum(p.masses().iter().zip(&values).map(|(m, v)| m * v));
    let values: Vec<f64> = values.iter().map(|v| v - residual).collect();
    let norm = sqrt(sum(p.masses().iter().zip(&values).map(|(m, v)| m * v * v)));
    ScoreFunction::new(f_raw.support().clone(), values.into_iter().map(|v| v / norm).collect())
}

/// Largest `eps` keeping `1 + eps f(x) >= 0` on the support of `p`; infinite
/// when `f` is nonnegative there.
pub fn max_epsilon(p: &DiscreteDistribution, f: &ScoreFunction) -> f64 {
    let most_negative = p
        .masses()
        .iter()
        .zip(f.values())
        .filter(|(m, _)| **m > 0.0)
        .fold(0.0_f64, |acc, (_, v)| acc.max(-v));
    if most_negative > 0.0 {
        1.0 / most_negative
    } else {
        f64::INFINITY
    }
}

/// The perturbed distribution `p(x) (1 + eps f(x))`.
pub fn perturbed_distribution(p: &DiscreteDistribution, f: &ScoreFunction, eps: f64) -> Result<DiscreteDistribution> {
    require_feasible(p, f)?;
    if !(eps > 0.0) {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    let max = max_epsilon(p, f);
    if eps > max {
        return Err(Error::EpsilonTooLarge { eps, max });
    }
    let mass: Vec<f64> = p
        .masses()
        .iter()
        .zip(f.values())
        .map(|(m, v)| (m * (1.0 + eps * v)).max(0.0))
        .collect();
    Ok(DiscreteDistribution::renormalized(p.support().clone(), mass))
}

/// `g(y) = E[f(X) | Y = y, S = 0]`, tabulated on the output support.
pub fn induced_output_function(ctx: &AuditContext, f: &ScoreFunction) -> Result<ScoreFunction> {
    let p0 = ctx.p0();
    if !crate::distributions::same_support(p0.support(), f.support()) {
        return Err(Error::SupportMismatch);
    }
    let channel = ctx.channel();
    let q0 = ctx.q0();
    let values = (0..q0.len())
        .map(|y| {
            let num = sum(channel
                .rows()
                .iter()
                .zip(p0.masses())
                .zip(f.values())
                .map(|((row, m), v)| v * row[y] * m));
            num / q0.mass(y)
        })
        .collect();
    ScoreFunction::new(ctx.output_support().clone(), values)
}

/// First-order change of the objective along `f` (directional derivative at
/// `p0`). Independent of `l1` and `l3`.
///
/// `f` must be a feasible direction; see [`delta_lambda_linear`] for the bare
/// linear functional.
pub fn delta_lambda(lam: &LambdaWeights, ctx: &AuditContext, f: &ScoreFunction) -> Result<f64> {
    require_feasible(ctx.p0(), f)?;
    delta_lambda_linear(lam, ctx, f)
}

/// `l2 E_p0[f log(p0/p1)] + l4 E_q0[g log(q0/q1)]` for any tabulated `f`,
/// with `g` the induced output function.
pub fn delta_lambda_linear(lam: &LambdaWeights, ctx: &AuditContext, f: &ScoreFunction) -> Result<f64> {
    let mut total = 0.0;
    if lam.l2() > 0.0 {
        let llr = log_ratio_weighted(ctx.p0(), ctx.p1())?;
        if !crate::distributions::same_support(ctx.p0().support(), f.support()) {
            return Err(Error::SupportMismatch);
        }
        total += lam.l2() * sum(llr.iter().zip(f.values()).map(|(a, b)| a * b));
    }
    if lam.l4() > 0.0 {
        let g = induced_output_function(ctx, f)?;
        let llr = log_ratio_weighted(ctx.q0(), ctx.q1())?;
        total += lam.l4() * sum(llr.iter().zip(g.values()).map(|(a, b)| a * b));
    }
    Ok(total)
}

/// `p(x) log(p(x)/q(x))` per point, zero where `p(x) = 0`.
fn log_ratio_weighted(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<Vec<f64>> {
    p.masses()
        .iter()
        .zip(q.masses())
        .enumerate()
        .map(|(i, (&a, &b))| {
            if a == 0.0 {
                Ok(0.0)
            } else if b == 0.0 {
                Err(Error::AbsoluteContinuityViolation {
                    label: p.support().label(i).into(),
                })
            } else {
                Ok(a * ln(a / b))
            }
        })
        .collect()
}
