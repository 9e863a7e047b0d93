use alloc::string::String;
use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("support is empty")]
    EmptySupport,
    #[error("duplicate support label `{0}`")]
    DuplicateLabel(String),
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights have zero total mass")]
    ZeroTotalMass,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("masses do not sum to one (sum = {0})")]
    NotNormalized(f64),
    #[error("operands are defined over different supports")]
    SupportMismatch,
    #[error("absolute continuity violated at `{label}`: reference mass is zero")]
    AbsoluteContinuityViolation { label: String },
    #[error("Renyi order must be positive and different from one, got {0}")]
    InvalidAlpha(f64),
    #[error("invalid smoothing constant {0}")]
    InvalidSmoothing(f64),
    #[error("negative lambda weight {0}")]
    NegativeLambda(f64),

    #[error("function has zero variance under the reference distribution")]
    ZeroVariance,
    #[error("direction is not zero-mean unit-norm (mean {mean:e}, second moment {second_moment})")]
    InfeasibleDirection { mean: f64, second_moment: f64 },
    #[error("epsilon {eps} exceeds the largest admissible value {max}")]
    EpsilonTooLarge { eps: f64, max: f64 },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("output atom `{label}` has zero probability under the S=0 output distribution")]
    ZeroOutputMass { label: String },

    #[error("closed forms need a binary output alphabet, got {0} outputs")]
    UnsupportedOutputAlphabet(usize),
    #[error("output distribution is degenerate: P(Y=1|S=0) = {0}")]
    DegenerateOutput(f64),
    #[error("channel output is independent of its input (maximal correlation {0:e})")]
    IndependentChannel(f64),
    #[error("objective has no first-order descent direction (normalizer {0:e})")]
    DegenerateObjective(f64),
    #[error("membership posterior is 0 or 1 at `{label}`")]
    DegeneratePosterior { label: String },
    #[error("feature vectors missing or inconsistent with the input support")]
    MissingFeatureVectors,
    #[error("correction function left the constraint set (mean {mean:e}, second moment {second_moment})")]
    ConstraintViolated { mean: f64, second_moment: f64 },

    #[error("solver configuration invalid: {0}")]
    InvalidConfig(&'static str),
    #[error("all lambda weights are zero")]
    NoActiveTerm,
    #[error("no input point is admissible for the active divergence terms")]
    EmptyFeasibleSet,
    #[error("lambda schedule is empty")]
    EmptySchedule,

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("labels must contain both classes")]
    SingleClass,
    #[error("data are perfectly separable (coefficient norm {0:e}); use a positive l2 penalty")]
    PerfectSeparation(f64),
    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("sample is degenerate: every value equals {0}")]
    DegenerateSample(f64),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
