use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] fairchannel_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("value {value:?} in column {column:?} is not listed in the schema")]
    UnmappableCategory { column: String, value: String },
    #[error("no records left after filtering ({read} rows read)")]
    EmptyAfterFiltering { read: usize },
    #[error("{} cell(s) carry group-0 mass but no group-1 mass (first: {:?}); rerun with --smooth", cells.len(), cells.first().map(String::as_str).unwrap_or(""))]
    ContinuityViolations { cells: Vec<String> },
    #[error("group S={0} has no records")]
    EmptyGroup(u8),
    #[error("record {record} falls in a cell outside the correction table")]
    UnknownCell { record: usize },
    #[error("unknown feature {0:?} in cell specification")]
    UnknownFeature(String),
    #[error("{file}:{line}: {message}")]
    Schedule { file: String, line: usize, message: String },
    #[error("invalid distributions file: {0}")]
    Distributions(String),
    #[error("invalid argument: {0}")]
    Usage(String),
}

impl Error {
    /// Process exit code: 2 for malformed invocations and inputs, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Schema(_) | Error::Schedule { .. } | Error::Usage(_) | Error::Distributions(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(e) => core_kind(e),
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
            Error::Schema(_) => "Schema",
            Error::Json(_) => "Json",
            Error::MissingColumn(_) => "MissingColumn",
            Error::UnmappableCategory { .. } => "UnmappableCategory",
            Error::EmptyAfterFiltering { .. } => "EmptyAfterFiltering",
            Error::ContinuityViolations { .. } => "AbsoluteContinuityViolation",
            Error::EmptyGroup(_) => "EmptyGroup",
            Error::UnknownCell { .. } => "UnknownCell",
            Error::UnknownFeature(_) => "UnknownFeature",
            Error::Schedule { .. } => "Schedule",
            Error::Distributions(_) => "Distributions",
            Error::Usage(_) => "Usage",
        }
    }
}

fn core_kind(e: &fairchannel_core::Error) -> &'static str {
    use fairchannel_core::Error as E;
    match e {
        E::AbsoluteContinuityViolation { .. } => "AbsoluteContinuityViolation",
        E::DegenerateObjective(_) => "DegenerateObjective",
        E::PerfectSeparation(_) => "PerfectSeparation",
        E::SingularDesign => "SingularDesign",
        E::SingleClass => "SingleClass",
        E::ZeroOutputMass { .. } => "ZeroOutputMass",
        E::DegenerateOutput(_) => "DegenerateOutput",
        E::UnsupportedOutputAlphabet(_) => "UnsupportedOutputAlphabet",
        E::DegeneratePosterior { .. } => "DegeneratePosterior",
        E::NoActiveTerm => "NoActiveTerm",
        E::EmptyFeasibleSet => "EmptyFeasibleSet",
        E::NegativeLambda(_) => "NegativeLambda",
        E::InvalidSmoothing(_) => "InvalidSmoothing",
        _ => "Core",
    }
}

pub type Result<T> = std::result::Result<T, Error>;
