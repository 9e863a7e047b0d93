//! Weight schedules, distribution files and path tables.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use fairchannel_core::{AuditContext, Channel, DiscreteDistribution, LambdaWeights, PathPoint, Support};
use serde::Deserialize;

use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `l1,l2,l3,l4` rows. Blank lines and `#` comments are skipped; an
/// optional `l1,l2,l3,l4` header line is allowed.
pub fn parse_schedule(text: &str, file: &str) -> Result<Vec<LambdaWeights>> {
    let mut schedule = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (schedule.is_empty() && line.replace(' ', "") == "l1,l2,l3,l4") {
            continue;
        }
        let err = |message: String| Error::Schedule {
            file: file.to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(format!(
                "expected 4 comma-separated weights, found {}",
                fields.len()
            )));
        }
        let mut w = [0.0; 4];
        for (slot, field) in w.iter_mut().zip(&fields) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("{field:?} is not a finite number")))?;
        }
        schedule.push(LambdaWeights::from_array(w).map_err(|e| err(e.to_string()))?);
    }
    if schedule.is_empty() {
        return Err(Error::Schedule {
            file: file.to_string(),
            line: 0,
            message: "no weight rows".into(),
        });
    }
    Ok(schedule)
}

pub fn load_schedule(path: &Path) -> Result<Vec<LambdaWeights>> {
    parse_schedule(&read(path)?, &path.display().to_string())
}

/// Explicit `(p0, p1, W)` given as JSON.
///
/// `w1` lists `W(1|x)` for a binary outcome; alternatively `channel` gives
/// full rows over `outputs`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionsFile {
    pub labels: Vec<String>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    #[serde(default)]
    pub w1: Option<Vec<f64>>,
    #[serde(default)]
    pub channel: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub outputs: Option<Vec<String>>,
}

impl DistributionsFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Distributions(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?)
    }

    pub fn context(&self) -> Result<AuditContext> {
        let bad = |e: fairchannel_core::Error| Error::Distributions(e.to_string());
        let support = Arc::new(Support::new(self.labels.clone()).map_err(bad)?);
        let p0 = DiscreteDistribution::from_weights(support.clone(), &self.p0).map_err(bad)?;
        let p1 = DiscreteDistribution::from_weights(support.clone(), &self.p1).map_err(bad)?;
        let channel = match (&self.w1, &self.channel) {
            (Some(w1), None) => Channel::binary(support, w1).map_err(bad)?,
            (None, Some(rows)) => {
                let outputs = match &self.outputs {
                    Some(o) => o.clone(),
                    None => (0..rows.first().map_or(0, Vec::len)).map(|y| y.to_string()).collect(),
                };
                let output = Arc::new(Support::new(outputs).map_err(bad)?);
                Channel::new(support, output, rows.clone()).map_err(bad)?
            }
            _ => {
                return Err(Error::Distributions(
                    "give exactly one of \"w1\" and \"channel\"".into(),
                ))
            }
        };
        AuditContext::new(p0, p1, channel).map_err(bad)
    }
}

/// One row per path point, in schedule order.
pub fn path_csv(points: &[PathPoint]) -> String {
    let mut csv =
        String::from("l1,l2,l3,l4,objective,kl_qx_p0,kl_qx_p1,kl_qy_q0,kl_qy_q1,iterations,converged,non_unique\n");
    for p in points {
        let [l1, l2, l3, l4] = p.lam.as_array();
        let [d0, d1, d2, d3] = p.divergences;
        let _ = writeln!(
            csv,
            "{l1},{l2},{l3},{l4},{},{d0},{d1},{d2},{d3},{},{},{}",
            p.objective, p.iterations, p.converged, p.non_unique
        );
    }
    csv
}
