//! Minimizers of the KL objective over the input simplex ("correction paths").
//!
//! The solver is entropic mirror descent (exponentiated gradient) with
//! backtracking. Iterates stay in the relative interior of the admissible
//! face, so no projection is needed. Convergence is certified by the
//! Frank-Wolfe gap `<g, q> - min_x g(x)`, an upper bound on the suboptimality
//! of a convex objective.

use alloc::vec::Vec;

use crate::correction::correction_function;
use crate::distributions::{
    inner_product, kl_divergence, objective_terms, AuditContext, DiscreteDistribution, Divergence, ScoreFunction,
};
use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, sqrt, sum};
use crate::perturbation::{normalize_direction, LambdaWeights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the Frank-Wolfe gap is below `rel_tol * max(1, objective)`.
    pub rel_tol: f64,
    pub initial_step: f64,
    /// Backtracking factor in `(0, 1)`.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Lower bound on admissible iterate masses.
    pub floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            rel_tol: 1e-10,
            initial_step: 1.0,
            shrink: 0.5,
            max_backtracks: 80,
            floor: 1e-12,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.max_backtracks == 0 {
            return Err(Error::InvalidConfig("iteration limits must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.initial_step > 0.0 && self.floor > 0.0) {
            return Err(Error::InvalidConfig("tolerances, step and floor must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig("shrink must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One solved point of a correction path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub qx: DiscreteDistribution,
    pub qy: DiscreteDistribution,
    /// `KL(qx||p0), KL(qx||p1), KL(qy||q0), KL(qy||q1)`; infinite where undefined.
    pub divergences: [f64; 4],
    pub lam: LambdaWeights,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when only output terms are active, where minimizers form a set.
    pub non_unique: bool,
}

/// Input points that may carry mass without making an active term infinite.
fn admissible(lam: &LambdaWeights, ctx: &AuditContext) -> Vec<bool> {
    let (p0, p1, q1) = (ctx.p0(), ctx.p1(), ctx.q1());
    ctx.channel()
        .rows()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let blocked = (lam.l1() > 0.0 && p0.mass(x) == 0.0)
                || (lam.l2() > 0.0 && p1.mass(x) == 0.0)
                || (lam.l4() > 0.0 && row.iter().zip(q1.masses()).any(|(w, q)| *w > 0.0 && *q == 0.0));
            !blocked
        })
        .collect()
}

fn floored(q: &[f64], mask: &[bool], floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = q
        .iter()
        .zip(mask)
        .map(|(&m, &ok)| if ok { m.max(floor) } else { 0.0 })
        .collect();
    let total = sum(raw.iter().copied());
    raw.into_iter().map(|m| m / total).collect()
}

fn initial_point(lam: &LambdaWeights, ctx: &AuditContext) -> Vec<f64> {
    let zero_side = lam.l1() > 0.0 || lam.l3() > 0.0;
    let one_side = lam.l2() > 0.0 || lam.l4() > 0.0;
    match (zero_side, one_side) {
        (true, true) => ctx
            .p0()
            .masses()
            .iter()
            .zip(ctx.p1().masses())
            .map(|(a, b)| sqrt(a * b))
            .collect(),
        (true, false) => ctx.p0().masses().to_vec(),
        _ => ctx.p1().masses().to_vec(),
    }
}

/// Gradient of the KL objective with respect to `qx` (up to an additive constant).
fn gradient(lam: &LambdaWeights, ctx: &AuditContext, qx: &[f64], qy: &[f64], mask: &[bool]) -> Vec<f64> {
    let (p0, p1, q0, q1) = (ctx.p0(), ctx.p1(), ctx.q0(), ctx.q1());
    let out: Vec<f64> = (0..qy.len())
        .map(|y| {
            let mut v = 0.0;
            if lam.l3() > 0.0 && qy[y] > 0.0 {
                v += lam.l3() * ln(qy[y] / q0.mass(y));
            }
            if lam.l4() > 0.0 && qy[y] > 0.0 {
                v += lam.l4() * ln(qy[y] / q1.mass(y));
            }
            v
        })
        .collect();
    ctx.channel()
        .rows()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            if !mask[x] {
                return 0.0;
            }
            let mut g = 0.0;
            if lam.l1() > 0.0 {
                g += lam.l1() * ln(qx[x] / p0.mass(x));
            }
            if lam.l2() > 0.0 {
                g += lam.l2() * ln(qx[x] / p1.mass(x));
            }
            g + sum(row.iter().zip(&out).filter(|(w, _)| **w > 0.0).map(|(w, o)| w * o))
        })
        .collect()
}

struct Iterate {
    qx: DiscreteDistribution,
    qy: DiscreteDistribution,
    objective: f64,
}

fn evaluate(lam: &LambdaWeights, ctx: &AuditContext, mass: Vec<f64>) -> Result<Iterate> {
    let qx = DiscreteDistribution::renormalized(ctx.input_support().clone(), mass);
    let qy = ctx.channel().pushforward(&qx)?;
    let (objective, _) = objective_terms(lam, &qx, &qy, ctx, Divergence::Kl)?;
    Ok(Iterate { qx, qy, objective })
}

/// Exponentiated-gradient step `q exp(-t g)`, renormalized and floored.
fn eg_step(q: &[f64], g: &[f64], mask: &[bool], t: f64, floor: f64) -> Vec<f64> {
    let shift = g
        .iter()
        .zip(mask)
        .filter(|(_, ok)| **ok)
        .fold(f64::INFINITY, |acc, (v, _)| acc.min(*v));
    let raw: Vec<f64> = q
        .iter()
        .zip(g)
        .zip(mask)
        .map(|((&m, &gx), &ok)| if ok { m * exp(-t * (gx - shift)) } else { 0.0 })
        .collect();
    let total = sum(raw.iter().copied());
    let normalized: Vec<f64> = raw.into_iter().map(|m| m / total).collect();
    floored(&normalized, mask, floor)
}

fn frank_wolfe_gap(q: &[f64], g: &[f64], mask: &[bool]) -> f64 {
    let min = g
        .iter()
        .zip(mask)
        .filter(|(_, ok)| **ok)
        .fold(f64::INFINITY, |acc, (v, _)| acc.min(*v));
    let avg = sum(q
        .iter()
        .zip(g)
        .zip(mask)
        .filter(|(_, ok)| **ok)
        .map(|((m, v), _)| m * v));
    (avg - min).max(0.0)
}

fn solve_from(
    lam: &LambdaWeights,
    ctx: &AuditContext,
    cfg: &SolverConfig,
    start: Option<&DiscreteDistribution>,
) -> Result<PathPoint> {
    cfg.validate()?;
    if lam.is_zero() {
        return Err(Error::NoActiveTerm);
    }
    let mask = admissible(lam, ctx);
    if !mask.iter().any(|&ok| ok) {
        return Err(Error::EmptyFeasibleSet);
    }
    let init = match start {
        Some(q) if crate::distributions::same_support(q.support(), ctx.input_support()) => q.masses().to_vec(),
        Some(_) => return Err(Error::SupportMismatch),
        None => initial_point(lam, ctx),
    };
    let mut init = floored(&init, &mask, cfg.floor);
    if init.iter().any(|m| !m.is_finite()) {
        init = floored(&alloc::vec![1.0; mask.len()], &mask, cfg.floor);
    }

    let mut current = evaluate(lam, ctx, init)?;
    // every divergence term is 1-smooth relative to the entropy
    let safe_step = 1.0 / lam.as_array().iter().sum::<f64>();
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let q = current.qx.masses();
        let g = gradient(lam, ctx, q, current.qy.masses(), &mask);
        let gap = frank_wolfe_gap(q, &g, &mask);
        if gap <= cfg.rel_tol * current.objective.max(1.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let cand = evaluate(lam, ctx, eg_step(q, &g, &mask, t, cfg.floor))?;
            let linear = sum(cand.qx.masses().iter().zip(q).zip(&g).map(|((c, m), gx)| gx * (c - m)));
            let bregman = kl_divergence(&cand.qx, &current.qx)?;
            let model = current.objective + linear + bregman / t;
            let slack = 4.0 * f64::EPSILON * current.objective.max(1.0);
            // At t <= 1/sum(lambda) the model bound holds exactly, so only a
            // rounding-level comparison is left to decide.
            let safe = t <= safe_step && cand.objective <= current.objective + slack;
            if safe || (cand.objective <= model + slack && cand.objective <= current.objective) {
                accepted = Some(cand);
                break;
            }
            t *= cfg.shrink;
        }
        match accepted {
            Some(next) => {
                current = next;
                step = (t * 2.0).min(1e12);
            }
            // No representable step decreases the objective further.
            None => break,
        }
    }
    if !converged {
        let q = current.qx.masses();
        let g = gradient(lam, ctx, q, current.qy.masses(), &mask);
        converged = frank_wolfe_gap(q, &g, &mask) <= cfg.rel_tol * current.objective.max(1.0);
    }
    let divergences = [
        kl_divergence(&current.qx, ctx.p0()),
        kl_divergence(&current.qx, ctx.p1()),
        kl_divergence(&current.qy, ctx.q0()),
        kl_divergence(&current.qy, ctx.q1()),
    ]
    .map(|d| d.unwrap_or(f64::INFINITY));
    Ok(PathPoint {
        qx: current.qx,
        qy: current.qy,
        divergences,
        lam: *lam,
        objective: current.objective,
        iterations,
        converged,
        non_unique: lam.l1() == 0.0 && lam.l2() == 0.0,
    })
}

/// Minimizes the KL objective for fixed weights.
///
/// Iteration-limit exhaustion is not an error: the best iterate is returned
/// with `converged = false`.
pub fn solve_correction_path(lam: &LambdaWeights, ctx: &AuditContext, cfg: &SolverConfig) -> Result<PathPoint> {
    solve_from(lam, ctx, cfg, None)
}

/// Solves every weight vector of `schedule` in order, warm-starting each
/// solve from the previous solution.
pub fn trace_path(schedule: &[LambdaWeights], ctx: &AuditContext, cfg: &SolverConfig) -> Result<Vec<PathPoint>> {
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut points: Vec<PathPoint> = Vec::with_capacity(schedule.len());
    for lam in schedule {
        let start = points.last().map(|p| &p.qx);
        let point = solve_from(lam, ctx, cfg, start)?;
        points.push(point);
    }
    Ok(points)
}

/// Agreement between the solver's first step out of `p0` and the closed-form
/// correction function.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionReport {
    /// Normalized first-step direction `q1/p0 - 1`, when nondegenerate.
    pub step_direction: Option<ScoreFunction>,
    /// `E_p0[h f*]` for the normalized step direction `h`.
    pub cosine: Option<f64>,
    /// No disparity: the gradient at `p0` is constant or `f*` does not exist.
    pub degenerate: bool,
    pub step: f64,
}

/// Takes one exponentiated-gradient step of size `step` from `p0` and compares
/// the induced multiplicative direction with `f*` under the `p0` inner product.
pub fn local_direction_consistency(lam: &LambdaWeights, ctx: &AuditContext, step: f64) -> Result<DirectionReport> {
    let degenerate = DirectionReport {
        step_direction: None,
        cosine: None,
        degenerate: true,
        step,
    };
    let p0 = ctx.p0();
    let mask: Vec<bool> = p0.masses().iter().map(|&m| m > 0.0).collect();
    let g = gradient(lam, ctx, p0.masses(), ctx.q0().masses(), &mask);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::AbsoluteContinuityViolation {
            label: ctx.continuity_violations().into_iter().next().unwrap_or_default(),
        });
    }
    let next = eg_step(p0.masses(), &g, &mask, step, 0.0);
    let ratio: Vec<f64> = next
        .iter()
        .zip(p0.masses())
        .map(|(n, m)| if *m > 0.0 { n / m - 1.0 } else { 0.0 })
        .collect();
    let raw = ScoreFunction::new(ctx.input_support().clone(), ratio)?;
    let h = match normalize_direction(p0, &raw) {
        Ok(h) => h,
        Err(Error::ZeroVariance) => return Ok(degenerate),
        Err(e) => return Err(e),
    };
    let result = match correction_function(lam, ctx) {
        Ok(r) => r,
        Err(Error::DegenerateObjective(_)) => return Ok(degenerate),
        Err(e) => return Err(e),
    };
    let cosine = inner_product(p0, &h, &result.f_star)?;
    Ok(DirectionReport {
        step_direction: Some(h),
        cosine: Some(cosine),
        degenerate: abs(cosine).is_nan(),
        step,
    })
}
