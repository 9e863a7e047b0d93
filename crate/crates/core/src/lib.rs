//! Disparate-impact analysis of a fixed binary classifier viewed as a channel.
//!
//! A classifier `W(y|x)` is audited against two group-conditional input
//! distributions `p0 = P(X|S=0)` and `p1 = P(X|S=1)`. The crate provides
//!
//! - finite-alphabet distributions, channels and the divergence family
//!   ([`distributions`]),
//! - multiplicative local perturbations of `p0` and the first-order change of
//!   the four-term divergence objective ([`perturbation`]),
//! - the closed-form correction function, i.e. the unit-norm perturbation
//!   direction that most steeply reduces the objective ([`correction`]),
//! - an exponentiated-gradient solver tracing minimizers of the objective on
//!   the simplex ([`path`]),
//! - logistic regression by IRLS and Gaussian KDE used by the audit pipeline
//!   ([`logistic`], [`kde`]),
//! - brute-force verifiers for all of the above ([`oracle`]).
//!
//! The crate is `no_std` and only needs `alloc`. All logarithms are natural.

#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod correction;
pub mod distributions;
mod error;
pub mod kde;
pub mod logistic;
mod math;
pub mod oracle;
pub mod path;
pub mod perturbation;

pub use correction::{
    correction_coefficients, correction_function, delta_at_optimum, CorrectionCoefficients, CorrectionResult,
    PrincipalPair,
};
pub use distributions::{
    AuditContext, Channel, DiscreteDistribution, Divergence, ScoreFunction, Support, SupportPoint,
};
pub use error::{Error, Result};
pub use path::{solve_correction_path, trace_path, PathPoint, SolverConfig};
pub use perturbation::{delta_lambda, LambdaWeights};
