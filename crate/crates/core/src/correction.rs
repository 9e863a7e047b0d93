//! Closed-form correction function for binary-output channels.
//!
//! The correction function `f*` is the zero-mean, unit-norm perturbation of
//! `p0` minimizing the first-order objective change [`delta_lambda`]. For a
//! binary output it lies in the span of two functions:
//!
//! - `f_l`, the centered log-likelihood ratio `log p0/p1`, which pulls the
//!   input distribution towards `p1`;
//! - `f_m`, the principal function of the maximal correlation between `X`
//!   and `Y` under `p0`, which pulls the output distribution towards `q1`.
//!
//! With `a1 = E[f_l f_m]`, `a2 = ||f_l - a1 f_m||`, `b1 = E[g_l g_m]` and the
//! normalizer `D = sqrt((l2 a1 + l4 rho b1)^2 + (l2 a2)^2)`:
//!
//! ```text
//! f* = n_l f_l + n_m f_m,   n_l = -l2 / D,   n_m = -l4 rho b1 / D,
//! delta(f*) = -D.
//! ```
//!
//! All expectations are under `S = 0` (`p0` on inputs, `q0` on outputs).
//!
//! [`delta_lambda`]: crate::perturbation::delta_lambda

use alloc::vec::Vec;

use crate::distributions::{expectation, inner_product, AuditContext, DiscreteDistribution, ScoreFunction};
use crate::error::{Error, Result};
use crate::math::{abs, hypot, ln, log1p, sqrt, sum};
use crate::perturbation::{moments, LambdaWeights};

/// Maximal correlations below this are treated as an independent channel.
pub const INDEPENDENCE_TOL: f64 = 1e-12;

/// Normalizers below this multiple of `l2 + l4` mean there is nothing to correct.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Log-odds are clipped to `+-ln(1e12)`.
pub const LOG_ODDS_CLIP: f64 = 27.631_021_115_928_547;

/// Tolerance for the unit-norm check on the assembled correction function.
pub const CONSTRAINT_TOL: f64 = 1e-8;

/// Principal functions `(f_m, g_m)` and the maximal correlation `rho_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPair {
    pub f_m: ScoreFunction,
    pub g_m: ScoreFunction,
    pub rho_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub n_l: f64,
    pub n_m: f64,
    /// Zero when the channel output is independent of its input.
    pub rho_m: f64,
    /// `D`; the optimal first-order change is `-D`.
    pub normalizer: f64,
    pub lam: LambdaWeights,
}

impl CorrectionCoefficients {
    /// Component of `f*` along `f_m`.
    pub fn m1(&self) -> f64 {
        -(self.lam.l2() * self.a1 + self.lam.l4() * self.rho_m * self.b1) / self.normalizer
    }

    /// Component of `f*` along the normalized part of `f_l` orthogonal to `f_m`.
    pub fn m2(&self) -> f64 {
        -self.lam.l2() * self.a2 / self.normalizer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    pub f_star: ScoreFunction,
    pub coefficients: CorrectionCoefficients,
    /// `None` when the input log-likelihood ratio is undefined and unused (`l2 = 0`).
    pub f_l: Option<ScoreFunction>,
    /// `None` when the output log-likelihood ratio is undefined and unused (`l4 = 0`).
    pub g_l: Option<ScoreFunction>,
    /// `None` for an independent channel.
    pub principal: Option<PrincipalPair>,
    pub delta_opt: f64,
}

fn require_binary(ctx: &AuditContext) -> Result<f64> {
    let n = ctx.output_support().len();
    if n != 2 {
        return Err(Error::UnsupportedOutputAlphabet(n));
    }
    let p = ctx.q0().mass(1);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DegenerateOutput(p));
    }
    Ok(p)
}

/// `log(p(x)/q(x)) - E_p[log(p/q)]`; zero off the support of `p`.
fn centered_log_ratio(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<ScoreFunction> {
    let mut raw = Vec::with_capacity(p.len());
    for (i, (&a, &b)) in p.masses().iter().zip(q.masses()).enumerate() {
        if a == 0.0 {
            raw.push(None);
        } else if b == 0.0 {
            return Err(Error::AbsoluteContinuityViolation {
                label: p.support().label(i).into(),
            });
        } else {
            raw.push(Some(ln(a / b)));
        }
    }
    let mean = sum(raw.iter().zip(p.masses()).map(|(r, m)| r.map_or(0.0, |v| m * v)));
    let values = raw.iter().map(|r| r.map_or(0.0, |v| v - mean)).collect();
    ScoreFunction::new(p.support().clone(), values)
}

/// Centered input log-likelihood ratio `f_l`.
///
/// Points outside the support of `p0` cannot gain mass under a multiplicative
/// perturbation; `f_l` is set to zero there.
pub fn log_likelihood_ratio_fl(ctx: &AuditContext) -> Result<ScoreFunction> {
    centered_log_ratio(ctx.p0(), ctx.p1())
}

/// Centered output log-likelihood ratio `g_l`.
pub fn log_likelihood_ratio_gl(ctx: &AuditContext) -> Result<ScoreFunction> {
    centered_log_ratio(ctx.q0(), ctx.q1())
}

/// Principal functions of a binary-output channel under `p0`.
///
/// `g_m(0) = sqrt(p/(1-p))`, `g_m(1) = -sqrt((1-p)/p)` with `p = q0(1)`, and
/// `f_m(x) = ((g_m(1) - g_m(0)) W(1|x) + g_m(0)) / rho_m`.
pub fn principal_functions(ctx: &AuditContext) -> Result<PrincipalPair> {
    let p = require_binary(ctx)?;
    let g0 = sqrt(p / (1.0 - p));
    let g1 = -sqrt((1.0 - p) / p);
    let conditional: Vec<f64> = ctx.channel().rows().iter().map(|row| (g1 - g0) * row[1] + g0).collect();
    let rho_m = sqrt(sum(ctx.p0().masses().iter().zip(&conditional).map(|(m, h)| m * h * h)));
    if !(rho_m >= INDEPENDENCE_TOL) {
        return Err(Error::IndependentChannel(rho_m));
    }
    let f_m = ScoreFunction::new(
        ctx.input_support().clone(),
        conditional.iter().map(|h| h / rho_m).collect(),
    )?;
    let g_m = ScoreFunction::new(ctx.output_support().clone(), alloc::vec![g0, g1])?;
    Ok(PrincipalPair { f_m, g_m, rho_m })
}

struct Ingredients {
    f_l: Option<ScoreFunction>,
    g_l: Option<ScoreFunction>,
    principal: Option<PrincipalPair>,
    coefficients: CorrectionCoefficients,
}

fn ingredients(lam: &LambdaWeights, ctx: &AuditContext) -> Result<Ingredients> {
    require_binary(ctx)?;
    let (l2, l4) = (lam.l2(), lam.l4());
    if l2 == 0.0 && l4 == 0.0 {
        return Err(Error::DegenerateObjective(0.0));
    }
    // Each log-likelihood ratio is mandatory only when its term is active.
    let f_l = match log_likelihood_ratio_fl(ctx) {
        Ok(f) => Some(f),
        Err(e) if l2 > 0.0 => return Err(e),
        Err(_) => None,
    };
    let g_l = match log_likelihood_ratio_gl(ctx) {
        Ok(g) => Some(g),
        Err(e) if l4 > 0.0 => return Err(e),
        Err(_) => None,
    };
    let principal = match principal_functions(ctx) {
        Ok(pair) => Some(pair),
        Err(Error::IndependentChannel(_)) => None,
        Err(e) => return Err(e),
    };

    let p0 = ctx.p0();
    let (a1, a2) = match (&f_l, &principal) {
        (Some(f_l), Some(pair)) => {
            let a1 = inner_product(p0, f_l, &pair.f_m)?;
            let resid = f_l.combine(1.0, &pair.f_m, -a1)?;
            (a1, sqrt(moments(p0, &resid)?.1.max(0.0)))
        }
        (Some(f_l), None) => (0.0, sqrt(moments(p0, f_l)?.1.max(0.0))),
        (None, _) => (0.0, 0.0),
    };
    let (b1, rho_m) = match (&g_l, &principal) {
        (Some(g_l), Some(pair)) => (inner_product(ctx.q0(), g_l, &pair.g_m)?, pair.rho_m),
        (None, Some(pair)) => (0.0, pair.rho_m),
        (_, None) => (0.0, 0.0),
    };

    let along_fm = l2 * a1 + l4 * rho_m * b1;
    let normalizer = hypot(along_fm, l2 * a2);
    if !(normalizer > DEGENERACY_TOL * (l2 + l4)) {
        return Err(Error::DegenerateObjective(normalizer));
    }
    let coefficients = CorrectionCoefficients {
        a1,
        a2,
        b1,
        n_l: -l2 / normalizer,
        n_m: -l4 * rho_m * b1 / normalizer,
        rho_m,
        normalizer,
        lam: *lam,
    };
    Ok(Ingredients {
        f_l,
        g_l,
        principal,
        coefficients,
    })
}

/// The constants `a1, a2, b1, n_l, n_m` of the closed form.
///
/// Fails with [`Error::DegenerateObjective`] when no first-order improvement
/// exists (`D = 0`), including `l2 = l4 = 0`.
pub fn correction_coefficients(lam: &LambdaWeights, ctx: &AuditContext) -> Result<CorrectionCoefficients> {
    ingredients(lam, ctx).map(|i| i.coefficients)
}

/// Assembles `f* = n_l f_l + n_m f_m` and its optimal value `-D`.
///
/// An independent channel contributes nothing through the output terms, so
/// then `f* = -f_l / ||f_l||` (requires `l2 > 0`).
pub fn correction_function(lam: &LambdaWeights, ctx: &AuditContext) -> Result<CorrectionResult> {
    let Ingredients {
        f_l,
        g_l,
        principal,
        coefficients,
    } = ingredients(lam, ctx)?;
    let support = ctx.input_support().clone();
    let mut values = alloc::vec![0.0; support.len()];
    if let Some(f_l) = &f_l {
        for (v, l) in values.iter_mut().zip(f_l.values()) {
            *v += coefficients.n_l * l;
        }
    }
    if let Some(pair) = &principal {
        for (v, m) in values.iter_mut().zip(pair.f_m.values()) {
            *v += coefficients.n_m * m;
        }
    }
    let f_star = ScoreFunction::new(support, values)?;
    let (mean, second_moment) = moments(ctx.p0(), &f_star)?;
    if abs(mean) > CONSTRAINT_TOL || abs(second_moment - 1.0) > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolated { mean, second_moment });
    }
    Ok(CorrectionResult {
        f_star,
        delta_opt: -coefficients.normalizer,
        coefficients,
        f_l,
        g_l,
        principal,
    })
}

/// Optimal first-order change `-D`; zero when nothing can be corrected.
pub fn delta_at_optimum(lam: &LambdaWeights, ctx: &AuditContext) -> Result<f64> {
    match correction_coefficients(lam, ctx) {
        Ok(c) => Ok(-c.normalizer),
        Err(Error::DegenerateObjective(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Optimal change when only the outputs are aligned (`l2 = 0`):
/// `-l4 rho_m sqrt(Var_q0[log q0/q1])`. The `l2` weight is ignored.
pub fn output_alignment_delta(lam: &LambdaWeights, ctx: &AuditContext) -> Result<f64> {
    let rho_m = match principal_functions(ctx) {
        Ok(pair) => pair.rho_m,
        Err(Error::IndependentChannel(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let g_l = log_likelihood_ratio_gl(ctx)?;
    let var = moments(ctx.q0(), &g_l)?.1;
    Ok(-lam.l4() * rho_m * sqrt(var.max(0.0)))
}

/// Centered log posterior odds from a group-membership model.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipLogOdds {
    pub f_l: ScoreFunction,
    /// Number of points whose log-odds hit the `+-ln(1e12)` clip.
    pub clipped: usize,
}

/// `f_l(x) = log P(S=0|x)/P(S=1|x) - E[...|S=0]` from posterior
/// probabilities `P(S=1|x)`, one per input point.
///
/// Agrees with [`log_likelihood_ratio_fl`] whenever the posterior is
/// Bayes-consistent with `(p0, p1)` for some prior, since the prior log-odds
/// cancel under centering.
pub fn fl_from_membership_model(posterior_s1: &[f64], ctx: &AuditContext) -> Result<MembershipLogOdds> {
    let support = ctx.input_support();
    if posterior_s1.len() != support.len() {
        return Err(Error::LengthMismatch {
            expected: support.len(),
            got: posterior_s1.len(),
        });
    }
    let mut clipped = 0;
    let mut odds = Vec::with_capacity(posterior_s1.len());
    for (i, &pi) in posterior_s1.iter().enumerate() {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::DegeneratePosterior {
                label: support.label(i).into(),
            });
        }
        let raw = log1p(-pi) - ln(pi);
        if abs(raw) > LOG_ODDS_CLIP {
            clipped += 1;
        }
        odds.push(raw.clamp(-LOG_ODDS_CLIP, LOG_ODDS_CLIP));
    }
    let raw = ScoreFunction::new(support.clone(), odds)?;
    let mean = expectation(ctx.p0(), &raw)?;
    let f_l = ScoreFunction::new(support.clone(), raw.values().iter().map(|v| v - mean).collect())?;
    Ok(MembershipLogOdds { f_l, clipped })
}

fn check_features(ctx: &AuditContext, features: &[Vec<f64>], theta: &[f64]) -> Result<()> {
    if features.len() != ctx.input_support().len()
        || theta.is_empty()
        || features.iter().any(|row| row.len() != theta.len())
    {
        return Err(Error::MissingFeatureVectors);
    }
    Ok(())
}

/// `f_l` under a logistic membership model `P(S=1|x) = 1/(1 + exp(theta0 + <theta, x>))`:
/// the linear function `<theta, x> - sum_i theta_i E[X_i|S=0]`.
pub fn logistic_fl(ctx: &AuditContext, features: &[Vec<f64>], theta: &[f64]) -> Result<ScoreFunction> {
    check_features(ctx, features, theta)?;
    let linear: Vec<f64> = features.iter().map(|x| crate::math::dot(theta, x)).collect();
    let mean = sum(ctx.p0().masses().iter().zip(&linear).map(|(m, v)| m * v));
    ScoreFunction::new(ctx.input_support().clone(), linear.iter().map(|v| v - mean).collect())
}

/// First-order change under logistic membership models for both `X` and `Y`:
///
/// ```text
/// l2 sum_i theta_i E[f X_i | S=0] + l4 gamma1 E[g(Y) Y | S=0]
/// ```
///
/// where `P(S=1|y) = 1/(1 + exp(gamma0 + gamma1 y))`. `f` must be zero-mean.
pub fn delta_lambda_logistic(
    lam: &LambdaWeights,
    ctx: &AuditContext,
    f: &ScoreFunction,
    features: &[Vec<f64>],
    theta: &[f64],
    gamma1: f64,
) -> Result<f64> {
    check_features(ctx, features, theta)?;
    require_binary(ctx)?;
    let p0 = ctx.p0();
    let mut total = 0.0;
    if lam.l2() > 0.0 {
        let fx: Vec<f64> = (0..theta.len())
            .map(|i| {
                sum(p0
                    .masses()
                    .iter()
                    .zip(f.values())
                    .zip(features)
                    .map(|((m, v), x)| m * v * x[i]))
            })
            .collect();
        total += lam.l2() * crate::math::dot(theta, &fx);
    }
    if lam.l4() > 0.0 {
        let g = crate::perturbation::induced_output_function(ctx, f)?;
        total += lam.l4() * gamma1 * ctx.q0().mass(1) * g.value(1);
    }
    Ok(total)
}
