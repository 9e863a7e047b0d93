//! Brute-force verifiers for the closed forms and the path solver.
//!
//! Nothing in the main computation path calls into this module. The oracles
//! only rely on [`crate::distributions`] (plus the first-order change
//! [`delta_lambda`] where that is the quantity being searched over) and
//! recompute everything else from definitions: perturbed distributions,
//! directions on the constraint sphere, singular values, simplex lattices.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{
    objective, AuditContext, Channel, DiscreteDistribution, Divergence, ScoreFunction, Support,
};
use crate::error::{Error, Result};
use crate::math::{abs, ln, sqrt, sum};
use crate::perturbation::{delta_lambda, delta_lambda_linear, LambdaWeights};
use alloc::sync::Arc;

/// Step ladder for [`richardson_delta`].
pub const DEFAULT_EPS_LADDER: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Deterministic generator used by every randomized oracle.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    sqrt(-2.0 * ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Random context with `n_inputs` points, strictly positive `p0`, `p1`
/// (masses bounded away from zero) and a binary channel with
/// `W(1|x) in [0.05, 0.95]`.
pub fn random_binary_context<R: Rng + ?Sized>(rng: &mut R, n_inputs: usize) -> Result<AuditContext> {
    let support = Arc::new(Support::indexed(n_inputs)?);
    let mut weights = || -> Vec<f64> { (0..n_inputs).map(|_| 0.1 + rng.random::<f64>()).collect() };
    let p0 = DiscreteDistribution::from_weights(support.clone(), &weights())?;
    let p1 = DiscreteDistribution::from_weights(support.clone(), &weights())?;
    let w1: Vec<f64> = (0..n_inputs).map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect();
    let channel = Channel::binary(support, &w1)?;
    AuditContext::new(p0, p1, channel)
}

/// Zero-mean, unit-norm direction under `p` built from Gaussian coordinates.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, p: &DiscreteDistribution) -> ScoreFunction {
    loop {
        let raw: Vec<f64> = (0..p.len()).map(|_| standard_normal(rng)).collect();
        if let Some(values) = sphere_normalize(p, &raw) {
            return ScoreFunction::new(p.support().clone(), values).expect("finite direction");
        }
    }
}

/// Centers `raw` under `p` and scales to unit second moment; zero off the
/// support of `p`.
fn sphere_normalize(p: &DiscreteDistribution, raw: &[f64]) -> Option<Vec<f64>> {
    let m = p.masses();
    let mut values = raw.to_vec();
    // a second pass removes the residual mean left by cancellation in the first
    for pass in 0..2 {
        let mean = sum(m.iter().zip(&values).map(|(a, b)| a * b));
        for (v, &w) in values.iter_mut().zip(m) {
            *v = if w > 0.0 { *v - mean } else { 0.0 };
        }
        let norm = sqrt(sum(m.iter().zip(&values).map(|(a, b)| a * b * b)));
        if !(norm > if pass == 0 { 1e-12 } else { 0.5 }) {
            return None;
        }
        for v in &mut values {
            *v /= norm;
        }
    }
    Some(values)
}

/// Difference quotient `(L(p0 (1 + eps f)) - L(p0)) / eps` of the KL objective.
pub fn finite_difference_delta(lam: &LambdaWeights, ctx: &AuditContext, f: &ScoreFunction, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    let p0 = ctx.p0();
    let mut weights = Vec::with_capacity(p0.len());
    for (m, v) in p0.masses().iter().zip(f.values()) {
        let w = m * (1.0 + eps * v);
        if w < 0.0 {
            return Err(Error::EpsilonTooLarge { eps, max: eps });
        }
        weights.push(w);
    }
    let perturbed = DiscreteDistribution::from_weights(p0.support().clone(), &weights)?;
    let base = objective(lam, p0, ctx, Divergence::Kl)?;
    let moved = objective(lam, &perturbed, ctx, Divergence::Kl)?;
    Ok((moved - base) / eps)
}

/// First-order Richardson extrapolation of the difference quotient.
///
/// The quotient carries an `O(eps)` bias from the second-order divergence
/// terms; each consecutive pair of the ladder cancels it, and the estimate from
/// the finest pair is returned.
pub fn richardson_delta(lam: &LambdaWeights, ctx: &AuditContext, f: &ScoreFunction, ladder: &[f64]) -> Result<f64> {
    if ladder.len() < 2 {
        return Err(Error::InvalidConfig("Richardson ladder needs at least two steps"));
    }
    let quotients = ladder
        .iter()
        .map(|&eps| finite_difference_delta(lam, ctx, f, eps))
        .collect::<Result<Vec<f64>>>()?;
    let k = ladder.len() - 1;
    let (h_coarse, h_fine) = (ladder[k - 1], ladder[k]);
    let r = h_coarse / h_fine;
    Ok((r * quotients[k] - quotients[k - 1]) / (r - 1.0))
}

/// Best direction found by sampling the constraint sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceMin {
    pub f_best: ScoreFunction,
    pub delta_best: f64,
}

/// Samples `samples` random directions on the zero-mean unit sphere of `p0`,
/// keeps the one minimizing [`delta_lambda`], and optionally polishes it with
/// Riemannian gradient steps on the sphere.
pub fn brute_force_min_delta(
    lam: &LambdaWeights,
    ctx: &AuditContext,
    samples: usize,
    polish: bool,
    seed: u64,
) -> Result<BruteForceMin> {
    let p0 = ctx.p0();
    let mut rng = seeded_rng(seed);
    let mut best: Option<(ScoreFunction, f64)> = None;
    for _ in 0..samples.max(1) {
        let f = random_direction(&mut rng, p0);
        let d = delta_lambda(lam, ctx, &f)?;
        if best.as_ref().is_none_or(|(_, b)| d < *b) {
            best = Some((f, d));
        }
    }
    let (mut f_best, mut delta_best) = best.expect("at least one sample");
    if polish {
        (f_best, delta_best) = polish_on_sphere(lam, ctx, f_best, delta_best)?;
    }
    Ok(BruteForceMin { f_best, delta_best })
}

fn polish_on_sphere(
    lam: &LambdaWeights,
    ctx: &AuditContext,
    mut f: ScoreFunction,
    mut value: f64,
) -> Result<(ScoreFunction, f64)> {
    let p0 = ctx.p0();
    let n = p0.len();
    let support = p0.support().clone();
    // Riesz representer of the linear functional in the p0 inner product.
    let mut riesz = vec![0.0; n];
    for x in 0..n {
        if p0.mass(x) == 0.0 {
            continue;
        }
        let mut e = vec![0.0; n];
        e[x] = 1.0;
        let c = delta_lambda_linear(lam, ctx, &ScoreFunction::new(support.clone(), e)?)?;
        riesz[x] = c / p0.mass(x);
    }
    let mean = sum(p0.masses().iter().zip(&riesz).map(|(m, r)| m * r));
    for (r, &m) in riesz.iter_mut().zip(p0.masses()) {
        *r = if m > 0.0 { *r - mean } else { 0.0 };
    }
    let scale = sqrt(sum(p0.masses().iter().zip(&riesz).map(|(m, r)| m * r * r)));
    if !(scale > 0.0) {
        return Ok((f, value));
    }
    let mut eta = 0.5 / scale;
    for _ in 0..500 {
        let along = sum(p0
            .masses()
            .iter()
            .zip(&riesz)
            .zip(f.values())
            .map(|((m, r), v)| m * r * v));
        let tangent: Vec<f64> = riesz.iter().zip(f.values()).map(|(r, v)| r - along * v).collect();
        let tnorm = sqrt(sum(p0.masses().iter().zip(&tangent).map(|(m, t)| m * t * t)));
        if tnorm <= 1e-15 * scale {
            break;
        }
        let raw: Vec<f64> = f.values().iter().zip(&tangent).map(|(v, t)| v - eta * t).collect();
        let Some(values) = sphere_normalize(p0, &raw) else {
            break;
        };
        let cand = ScoreFunction::new(support.clone(), values)?;
        let d = delta_lambda(lam, ctx, &cand)?;
        if d <= value {
            f = cand;
            value = d;
            eta = (eta * 1.5).min(4.0 / scale);
        } else {
            eta *= 0.5;
        }
    }
    Ok((f, value))
}

/// Singular values of a dense matrix (rows of equal length), descending, by
/// one-sided Jacobi rotations.
pub fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.len();
    if m == 0 {
        return Vec::new();
    }
    let n = rows[0].len();
    // Orthogonalize the columns of the transpose when that has fewer columns.
    let (len, cols): (usize, Vec<Vec<f64>>) = if m <= n {
        (n, rows.to_vec())
    } else {
        (m, (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
    };
    let mut cols = cols;
    let k = cols.len();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let alpha = sum(cols[i].iter().map(|v| v * v));
                let beta = sum(cols[j].iter().map(|v| v * v));
                let gamma = sum(cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b));
                if abs(gamma) <= 1e-15 * sqrt(alpha * beta) || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (abs(zeta) + sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for r in 0..len {
                    let a = cols[i][r];
                    let b = cols[j][r];
                    cols[i][r] = c * a - s * b;
                    cols[j][r] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| sqrt(sum(c.iter().map(|v| v * v)))).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Maximal correlation of `(X, Y)` under `p0` as the second singular value of
/// `B[y][x] = W(y|x) p0(x) / sqrt(q0(y) p0(x))`, clamped to `[0, 1]`.
pub fn maximal_correlation_svd(ctx: &AuditContext) -> Result<f64> {
    let p0 = ctx.p0();
    let q0 = ctx.q0();
    let w = ctx.channel();
    let b: Vec<Vec<f64>> = (0..q0.len())
        .map(|y| {
            (0..p0.len())
                .map(|x| w.prob(x, y) * sqrt(p0.mass(x)) / sqrt(q0.mass(y)))
                .collect()
        })
        .collect();
    let sv = singular_values(&b);
    Ok(sv.get(1).copied().unwrap_or(0.0).clamp(0.0, 1.0))
}

/// Exhaustive minimum of the KL objective over the lattice `{k / resolution}`
/// of the input simplex. Points where an active term is infinite are skipped.
pub fn grid_simplex_min(
    lam: &LambdaWeights,
    ctx: &AuditContext,
    resolution: usize,
) -> Result<(DiscreteDistribution, f64)> {
    let n = ctx.input_support().len();
    if resolution == 0 {
        return Err(Error::InvalidConfig("resolution must be positive"));
    }
    let support = ctx.input_support().clone();
    let mut counts = vec![0usize; n];
    counts[n - 1] = resolution;
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / resolution as f64).collect();
        let q = DiscreteDistribution::from_masses(support.clone(), mass)?;
        if let Ok(v) = objective(lam, &q, ctx, Divergence::Kl) {
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((counts.clone(), v));
            }
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    let (counts, value) = best.ok_or(Error::EmptyFeasibleSet)?;
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / resolution as f64).collect();
    Ok((DiscreteDistribution::from_masses(support, mass)?, value))
}

/// Advances to the next weak composition with the same total, in
/// lexicographic order of the leading parts.
fn next_composition(counts: &mut [usize]) -> bool {
    let n = counts.len();
    if n < 2 {
        return false;
    }
    let total: usize = counts.iter().sum();
    // the last part holds the remainder; increment the leading parts like an odometer
    let mut i = n - 2;
    loop {
        let leading: usize = counts[..n - 1].iter().sum();
        if leading < total {
            counts[i] += 1;
            counts[n - 1] = total - leading - 1;
            return true;
        }
        // carry
        counts[i] = 0;
        let leading: usize = counts[..n - 1].iter().sum();
        counts[n - 1] = total - leading;
        if i == 0 {
            return false;
        }
        i -= 1;
    }
}
