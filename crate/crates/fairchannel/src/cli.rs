//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairchannel_core::kde::Bandwidth;
use fairchannel_core::{trace_path, AuditContext, LambdaWeights, SolverConfig};
use serde_json::json;

use crate::cells::{discretize, select_features};
use crate::context::{empirical_context, ChannelSource, ContextOptions, GroupSource};
use crate::dataset::load_csv;
use crate::error::{Error, Result};
use crate::report::{run_audit, AuditOptions, AuditOutput};
use crate::schedule::{load_schedule, path_csv, DistributionsFile};
use crate::schema::{DatasetSchema, ModelEncoding};
use crate::selftest::run_selftest;

/// Default smoothing mass when `--smooth` is given without a value.
pub const DEFAULT_SMOOTHING: &str = "1e-9";

#[derive(Debug, Parser)]
#[command(
    name = "fairchannel",
    version,
    about = "Correction functions for group disparities through a channel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the correction function of a dataset and write report files.
    Audit(AuditArgs),
    /// Solve the correction problem along a schedule of weights.
    Path(PathArgs),
    /// Run the oracle checks and print the results as JSON.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Model,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupsArg {
    Empirical,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Binned,
    Raw,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML dataset schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Additive smoothing of the group distributions.
    #[arg(long, num_args = 0..=1, default_missing_value = DEFAULT_SMOOTHING, value_name = "DELTA")]
    pub smooth: Option<f64>,
    /// Comma-separated features spanning the cells (default: all).
    #[arg(long, value_name = "FEATURES")]
    pub cells: Option<String>,
    /// Source of W(Y|X).
    #[arg(long, value_enum, default_value = "model")]
    pub channel: ChannelArg,
    /// Source of the group distributions.
    #[arg(long, value_enum, default_value = "empirical")]
    pub groups: GroupsArg,
    /// Logistic design encoding (default: from the schema).
    #[arg(long, value_enum)]
    pub encoding: Option<EncodingArg>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Weights l1,l2,l3,l4.
    #[arg(long, default_value = "0,1,0,1", allow_hyphen_values = true)]
    pub lambda: String,
    /// Fixed KDE bandwidth (default: Silverman's rule).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    /// Weight schedule: one `l1,l2,l3,l4` row per line.
    #[arg(long)]
    pub schedule: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON file with labels, p0, p1 and w1 (instead of --data/--schema).
    #[arg(long, conflicts_with_all = ["data", "schema"])]
    pub distributions: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_lambda(text: &str) -> Result<LambdaWeights> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let values: Option<Vec<f64>> = parts
        .iter()
        .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    match values.as_deref() {
        Some(&[a, b, c, d]) => LambdaWeights::new(a, b, c, d).map_err(|e| Error::Usage(format!("--lambda: {e}"))),
        _ => Err(Error::Usage(format!(
            "--lambda expects four comma-separated numbers, got {text:?}"
        ))),
    }
}

impl DataArgs {
    fn required(&self) -> Result<(&Path, &Path)> {
        match (&self.data, &self.schema) {
            (Some(d), Some(s)) => Ok((d, s)),
            _ => Err(Error::Usage("--data and --schema are both required".into())),
        }
    }

    fn context_options(&self, schema: &DatasetSchema) -> Result<ContextOptions> {
        if let Some(delta) = self.smooth {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::Usage(format!("--smooth must be positive, got {delta}")));
            }
        }
        Ok(ContextOptions {
            channel: match self.channel {
                ChannelArg::Model => ChannelSource::Model,
                ChannelArg::Empirical => ChannelSource::Empirical,
            },
            groups: match self.groups {
                GroupsArg::Empirical => GroupSource::Empirical,
                GroupsArg::Model => GroupSource::Model,
            },
            smoothing: self.smooth,
            encoding: match self.encoding {
                Some(EncodingArg::Binned) => ModelEncoding::Binned,
                Some(EncodingArg::Raw) => ModelEncoding::Raw,
                None => schema.model_encoding,
            },
            ..ContextOptions::default()
        })
    }
}

/// Loads, discretizes and audits a dataset.
pub fn audit(args: &AuditArgs) -> Result<AuditOutput> {
    let (data, schema_path) = args.data.required()?;
    let lam = parse_lambda(&args.lambda)?;
    let bandwidth = match args.bandwidth {
        None => Bandwidth::Silverman,
        Some(h) if h.is_finite() && h > 0.0 => Bandwidth::Fixed(h),
        Some(h) => return Err(Error::Usage(format!("--bandwidth must be positive, got {h}"))),
    };
    let schema = DatasetSchema::load(schema_path)?;
    let context = args.data.context_options(&schema)?;
    let ds = load_csv(data, &schema)?;
    let features = select_features(&ds, args.data.cells.as_deref())?;
    let cells = discretize(&ds, &features);
    run_audit(
        &ds,
        &cells,
        &AuditOptions {
            lam,
            context,
            bandwidth,
        },
    )
}

fn path_context(args: &PathArgs) -> Result<AuditContext> {
    if let Some(file) = &args.distributions {
        return DistributionsFile::load(file)?.context();
    }
    let (data, schema_path) = args.data.required()?;
    let schema = DatasetSchema::load(schema_path)?;
    let opts = args.data.context_options(&schema)?;
    let ds = load_csv(data, &schema)?;
    let features = select_features(&ds, args.data.cells.as_deref())?;
    let cells = discretize(&ds, &features);
    Ok(empirical_context(&ds, &cells, &opts)?.ctx)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Outcome of a successful command: text for stdout and the exit code.
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Audit(args) => {
            let out = audit(args)?;
            out.write(&args.out)?;
            let summary = json!({
                "status": "ok",
                "out": args.out.display().to_string(),
                "cells": out.report.cell_count,
                "delta_opt": out.report.delta_opt,
                "degenerate": out.report.degenerate,
                "warnings": out.report.warnings.len(),
            });
            Ok(Outcome {
                stdout: serde_json::to_string(&summary)?,
                code: 0,
            })
        }
        Command::Path(args) => {
            let schedule = load_schedule(&args.schedule)?;
            let ctx = path_context(args)?;
            let points = trace_path(&schedule, &ctx, &SolverConfig::default())?;
            write(&args.out, &path_csv(&points))?;
            let summary = json!({
                "status": "ok",
                "out": args.out.display().to_string(),
                "rows": points.len(),
                "converged": points.iter().all(|p| p.converged),
            });
            Ok(Outcome {
                stdout: serde_json::to_string(&summary)?,
                code: 0,
            })
        }
        Command::Selftest => {
            let report = run_selftest()?;
            Ok(Outcome {
                stdout: serde_json::to_string_pretty(&report)?,
                code: if report.passed { 0 } else { 1 },
            })
        }
    }
}

/// Machine-readable error object printed on failure.
pub fn error_json(e: &Error) -> String {
    let violations = match e {
        Error::ContinuityViolations { cells } => cells.clone(),
        Error::Core(fairchannel_core::Error::AbsoluteContinuityViolation { label }) => vec![label.clone()],
        _ => Vec::new(),
    };
    json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
        "continuity_violations": violations,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_parsing() {
        assert_eq!(parse_lambda("0, 1,0,1").unwrap().as_array(), [0.0, 1.0, 0.0, 1.0]);
        for bad in ["1,2,3", "a,b,c,d", "0,-1,0,1", "0,inf,0,1"] {
            assert!(matches!(parse_lambda(bad), Err(Error::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn smooth_flag_default() {
        let cli = Cli::try_parse_from([
            "fairchannel",
            "audit",
            "--data",
            "d",
            "--schema",
            "s",
            "--smooth",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Audit(a) = cli.command else { panic!() };
        assert_eq!(a.data.smooth, Some(1e-9));
        let cli = Cli::try_parse_from(["fairchannel", "audit", "--data", "d", "--schema", "s", "--out", "o"]).unwrap();
        let Command::Audit(a) = cli.command else { panic!() };
        assert_eq!(a.data.smooth, None);
    }
}
