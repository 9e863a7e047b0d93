//! Finite-alphabet distributions, channels, tabulated functions and divergences.
//!
//! Every pairwise operation requires both operands to live on the same ordered
//! [`Support`]; nothing is reindexed implicitly.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, sum};
use crate::perturbation::LambdaWeights;

/// Tolerance on the total mass of a distribution or channel row.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// One point of an ordered support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportPoint {
    pub id: usize,
    pub label: String,
}

/// Ordered finite support with dense ids `0..n` and unique labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    points: Vec<SupportPoint>,
}

impl Support {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = BTreeMap::new();
        let mut points = Vec::new();
        for (id, label) in labels.into_iter().enumerate() {
            let label = label.into();
            if seen.insert(label.clone(), id).is_some() {
                return Err(Error::DuplicateLabel(label));
            }
            points.push(SupportPoint { id, label });
        }
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(Support { points })
    }

    /// Support labelled `"0", "1", ..., "n-1"`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SupportPoint] {
        &self.points
    }

    pub fn label(&self, id: usize) -> &str {
        &self.points[id].label
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p.label == label)
    }
}

pub(crate) fn same_support(a: &Arc<Support>, b: &Arc<Support>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

fn ensure_same(a: &Arc<Support>, b: &Arc<Support>) -> Result<()> {
    if same_support(a, b) {
        Ok(())
    } else {
        Err(Error::SupportMismatch)
    }
}

/// Probability mass function on an explicit finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Arc<Support>,
    mass: Vec<f64>,
}

impl DiscreteDistribution {
    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(support: Arc<Support>, weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySupport);
        }
        check_len(support.len(), weights.len())?;
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite(index));
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { index, value: w });
            }
        }
        let total = sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::ZeroTotalMass);
        }
        let mass = weights.iter().map(|w| w / total).collect();
        Ok(DiscreteDistribution { support, mass })
    }

    /// Wraps masses that must already sum to one within [`MASS_TOLERANCE`].
    pub fn from_masses(support: Arc<Support>, mass: Vec<f64>) -> Result<Self> {
        check_len(support.len(), mass.len())?;
        check_row(&mass)?;
        Ok(DiscreteDistribution { support, mass })
    }

    pub fn uniform(support: Arc<Support>) -> Self {
        let n = support.len();
        DiscreteDistribution {
            support,
            mass: alloc::vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on the support point `id`.
    pub fn point_mass(support: Arc<Support>, id: usize) -> Result<Self> {
        let mut mass = alloc::vec![0.0; support.len()];
        *mass.get_mut(id).ok_or(Error::LengthMismatch {
            expected: support.len(),
            got: id + 1,
        })? = 1.0;
        Ok(DiscreteDistribution { support, mass })
    }

    /// Renormalizes after an update whose total is one up to rounding.
    pub(crate) fn renormalized(support: Arc<Support>, mut mass: Vec<f64>) -> Self {
        let total = sum(mass.iter().copied());
        for m in &mut mass {
            *m /= total;
        }
        DiscreteDistribution { support, mass }
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass(&self, id: usize) -> f64 {
        self.mass[id]
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Additive smoothing `(m + delta) / (1 + n delta)`.
    pub fn smoothed(&self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidSmoothing(delta));
        }
        let denom = 1.0 + self.len() as f64 * delta;
        let mass = self.mass.iter().map(|m| (m + delta) / denom).collect();
        Ok(DiscreteDistribution::renormalized(self.support.clone(), mass))
    }

    /// Convex combination `t * self + (1 - t) * other`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        ensure_same(&self.support, &other.support)?;
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        Ok(DiscreteDistribution::renormalized(self.support.clone(), mass))
    }
}

/// Builds a distribution over a fresh support from labels and nonnegative weights.
pub fn make_distribution<S: Into<String>>(
    labels: impl IntoIterator<Item = S>,
    weights: &[f64],
) -> Result<DiscreteDistribution> {
    let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
    if labels.is_empty() || weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    let support = Arc::new(Support::new(labels)?);
    DiscreteDistribution::from_weights(support, weights)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

fn check_row(row: &[f64]) -> Result<()> {
    for (index, &m) in row.iter().enumerate() {
        if !m.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if m < 0.0 {
            return Err(Error::NegativeWeight { index, value: m });
        }
    }
    let total = sum(row.iter().copied());
    if abs(total - 1.0) > MASS_TOLERANCE {
        return Err(Error::NotNormalized(total));
    }
    Ok(())
}

/// Row-stochastic conditional distribution `W(y|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    input: Arc<Support>,
    output: Arc<Support>,
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(input: Arc<Support>, output: Arc<Support>, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_len(input.len(), rows.len())?;
        for row in &rows {
            check_len(output.len(), row.len())?;
            check_row(row)?;
        }
        Ok(Channel { input, output, rows })
    }

    /// Binary-output channel from `W(1|x)`; the output support is `["0", "1"]`.
    pub fn binary(input: Arc<Support>, prob_one: &[f64]) -> Result<Self> {
        let output = Arc::new(Support::new(["0", "1"])?);
        let rows = prob_one.iter().map(|&w| alloc::vec![1.0 - w, w]).collect();
        Self::new(input, output, rows)
    }

    pub fn identity(support: Arc<Support>) -> Self {
        let n = support.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Channel {
            input: support.clone(),
            output: support,
            rows,
        }
    }

    pub fn input_support(&self) -> &Arc<Support> {
        &self.input
    }

    pub fn output_support(&self) -> &Arc<Support> {
        &self.output
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    pub fn pushforward(&self, p: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        ensure_same(&self.input, &p.support)?;
        let mass = (0..self.output.len())
            .map(|y| sum(self.rows.iter().zip(&p.mass).map(|(row, px)| row[y] * px)))
            .collect();
        Ok(DiscreteDistribution::renormalized(self.output.clone(), mass))
    }
}

/// Output distribution `sum_x W(y|x) p(x)`.
pub fn pushforward(channel: &Channel, p: &DiscreteDistribution) -> Result<DiscreteDistribution> {
    channel.pushforward(p)
}

/// Real-valued function tabulated on every point of a support.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFunction {
    support: Arc<Support>,
    values: Vec<f64>,
}

impl ScoreFunction {
    pub fn new(support: Arc<Support>, values: Vec<f64>) -> Result<Self> {
        check_len(support.len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ScoreFunction { support, values })
    }

    pub fn constant(support: Arc<Support>, value: f64) -> Self {
        let values = alloc::vec![value; support.len()];
        ScoreFunction { support, values }
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScoreFunction {
            support: self.support.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Pointwise `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        ensure_same(&self.support, &other.support)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(ScoreFunction {
            support: self.support.clone(),
            values,
        })
    }
}

/// `E_p[f]`.
pub fn expectation(p: &DiscreteDistribution, f: &ScoreFunction) -> Result<f64> {
    ensure_same(&p.support, &f.support)?;
    Ok(sum(p.mass.iter().zip(&f.values).map(|(m, v)| m * v)))
}

/// `E_p[f g]`, the `p`-weighted inner product.
pub fn inner_product(p: &DiscreteDistribution, f: &ScoreFunction, g: &ScoreFunction) -> Result<f64> {
    ensure_same(&p.support, &f.support)?;
    ensure_same(&p.support, &g.support)?;
    Ok(sum(p
        .mass
        .iter()
        .zip(&f.values)
        .zip(&g.values)
        .map(|((m, a), b)| m * a * b)))
}

/// `KL(p || q)` in nats with `0 log 0 = 0`.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    ensure_same(&p.support, &q.support)?;
    let mut terms = Vec::with_capacity(p.len());
    for (i, (&pi, &qi)) in p.mass.iter().zip(&q.mass).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuityViolation {
                label: p.support.label(i).into(),
            });
        }
        terms.push(pi * ln(pi / qi));
    }
    Ok(sum(terms).max(0.0))
}

/// `(1/2) sum |p - q|`.
pub fn total_variation(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    ensure_same(&p.support, &q.support)?;
    Ok(0.5 * sum(p.mass.iter().zip(&q.mass).map(|(a, b)| abs(a - b))))
}

/// Renyi divergence of order `alpha` in nats.
///
/// Returns `+inf` for `alpha < 1` when `p` and `q` have disjoint supports.
pub fn renyi_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) || alpha == 1.0 {
        return Err(Error::InvalidAlpha(alpha));
    }
    ensure_same(&p.support, &q.support)?;
    let mut terms = Vec::with_capacity(p.len());
    for (i, (&pi, &qi)) in p.mass.iter().zip(&q.mass).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            if alpha > 1.0 {
                return Err(Error::AbsoluteContinuityViolation {
                    label: p.support.label(i).into(),
                });
            }
            continue;
        }
        terms.push(pi * exp((alpha - 1.0) * ln(pi / qi)));
    }
    let total = sum(terms);
    if total == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((ln(total) / (alpha - 1.0)).max(0.0))
}

/// Divergence used in the objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Divergence {
    #[default]
    Kl,
    TotalVariation,
    Renyi(f64),
}

impl Divergence {
    pub fn eval(&self, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
        match *self {
            Divergence::Kl => kl_divergence(p, q),
            Divergence::TotalVariation => total_variation(p, q),
            Divergence::Renyi(alpha) => renyi_divergence(p, q, alpha),
        }
    }
}

/// The fixed structure `S -> X -> Y`: both group input distributions and the
/// channel, with the induced output distributions.
#[derive(Debug, Clone)]
pub struct AuditContext {
    p0: DiscreteDistribution,
    p1: DiscreteDistribution,
    channel: Channel,
    q0: DiscreteDistribution,
    q1: DiscreteDistribution,
}

impl AuditContext {
    /// Rejects output atoms that carry no mass under the `S=0` output distribution.
    pub fn new(p0: DiscreteDistribution, p1: DiscreteDistribution, channel: Channel) -> Result<Self> {
        ensure_same(&p0.support, &p1.support)?;
        let q0 = channel.pushforward(&p0)?;
        let q1 = channel.pushforward(&p1)?;
        if let Some(y) = q0.mass.iter().position(|&m| m <= 0.0) {
            return Err(Error::ZeroOutputMass {
                label: q0.support.label(y).into(),
            });
        }
        Ok(AuditContext {
            p0,
            p1,
            channel,
            q0,
            q1,
        })
    }

    pub fn p0(&self) -> &DiscreteDistribution {
        &self.p0
    }

    pub fn p1(&self) -> &DiscreteDistribution {
        &self.p1
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn q0(&self) -> &DiscreteDistribution {
        &self.q0
    }

    pub fn q1(&self) -> &DiscreteDistribution {
        &self.q1
    }

    pub fn input_support(&self) -> &Arc<Support> {
        &self.p0.support
    }

    pub fn output_support(&self) -> &Arc<Support> {
        self.channel.output_support()
    }

    /// Labels of input and output points whose log-likelihood ratio between
    /// the groups exceeds `threshold` in magnitude. Such points make the
    /// first-order expansions unreliable.
    pub fn extreme_log_ratios(&self, threshold: f64) -> Vec<String> {
        let mut flagged = Vec::new();
        for (p, q) in [(&self.p0, &self.p1), (&self.q0, &self.q1)] {
            for (i, (&a, &b)) in p.mass.iter().zip(&q.mass).enumerate() {
                if a > 0.0 && b > 0.0 && abs(ln(a / b)) > threshold {
                    flagged.push(p.support.label(i).into());
                }
            }
        }
        flagged
    }

    /// Labels of input points with `p0 > 0` but `p1 = 0`.
    pub fn continuity_violations(&self) -> Vec<String> {
        (0..self.p0.len())
            .filter(|&i| self.p0.mass[i] > 0.0 && self.p1.mass[i] == 0.0)
            .map(|i| self.p0.support.label(i).into())
            .collect()
    }
}

/// Four-term objective
/// `l1 J(qx||p0) + l2 J(qx||p1) + l3 J(qy||q0) + l4 J(qy||q1)` with `qy = W qx`.
///
/// Terms with zero weight are never evaluated.
pub fn objective(
    lam: &LambdaWeights,
    qx: &DiscreteDistribution,
    ctx: &AuditContext,
    metric: Divergence,
) -> Result<f64> {
    let qy = ctx.channel.pushforward(qx)?;
    objective_terms(lam, qx, &qy, ctx, metric).map(|(total, _)| total)
}

/// Objective together with the individual weighted-term divergences (zero for
/// inactive terms).
pub fn objective_terms(
    lam: &LambdaWeights,
    qx: &DiscreteDistribution,
    qy: &DiscreteDistribution,
    ctx: &AuditContext,
    metric: Divergence,
) -> Result<(f64, [f64; 4])> {
    let w = lam.as_array();
    let pairs = [(qx, &ctx.p0), (qx, &ctx.p1), (qy, &ctx.q0), (qy, &ctx.q1)];
    let mut divs = [0.0; 4];
    let mut total = 0.0;
    for (i, (a, b)) in pairs.into_iter().enumerate() {
        if w[i] > 0.0 {
            divs[i] = metric.eval(a, b)?;
            total += w[i] * divs[i];
        }
    }
    Ok((total, divs))
}
