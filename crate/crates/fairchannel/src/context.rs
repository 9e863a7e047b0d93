//! Audit contexts built from discretized data.

use std::sync::Arc;

use fairchannel_core::logistic::{fit_logistic, LogisticConfig, LogisticModel};
use fairchannel_core::{AuditContext, Channel, DiscreteDistribution, Support};
use serde::Serialize;

use crate::cells::CellMapping;
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::schema::{Feature, ModelEncoding};

/// Source of the channel `W(Y|X)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    /// Logistic model of the outcome, evaluated per cell.
    #[default]
    Model,
    /// Pooled per-cell outcome frequencies.
    Empirical,
}

/// Source of the group distributions `p0`, `p1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSource {
    /// Per-group cell frequencies.
    #[default]
    Empirical,
    /// `p_s(x)` proportional to the pooled cell frequency times a logistic
    /// membership model `P(S=s|x)`.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextOptions {
    pub channel: ChannelSource,
    pub groups: GroupSource,
    /// Additive smoothing of `p0` and `p1`.
    pub smoothing: Option<f64>,
    pub encoding: ModelEncoding,
    pub logistic: LogisticConfig,
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions {
            channel: ChannelSource::Model,
            groups: GroupSource::Empirical,
            smoothing: None,
            encoding: ModelEncoding::Binned,
            logistic: LogisticConfig::default(),
        }
    }
}

/// A fitted logistic model with named design columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub columns: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl FittedModel {
    fn new(columns: Vec<String>, m: &LogisticModel) -> Self {
        FittedModel {
            columns,
            intercept: m.intercept,
            coefficients: m.coefficients.clone(),
            iterations: m.iterations,
            gradient_norm: m.gradient_norm,
            converged: m.converged,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedContext {
    pub ctx: AuditContext,
    pub channel_model: Option<FittedModel>,
    pub membership_model: Option<FittedModel>,
    /// Per-cell `P(S=1|x)` from the membership model, when fitted.
    pub membership_posterior: Option<Vec<f64>>,
    pub options: ContextOptions,
}

/// Design matrix over the cell features: one row per record and one per cell.
pub struct Design {
    pub columns: Vec<String>,
    pub records: Vec<Vec<f64>>,
    pub cells: Vec<Vec<f64>>,
}

fn bin_means(ds: &GroupedDataset, f: usize) -> Vec<f64> {
    let bins = ds.features[f].bin_count();
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for r in &ds.records {
        sums[r.bins[f]] += r.values[f];
        counts[r.bins[f]] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect()
}

pub fn design(ds: &GroupedDataset, cells: &CellMapping, encoding: ModelEncoding) -> Design {
    let mut columns = Vec::new();
    // per selected feature: (feature index, encoding closure data)
    enum Col {
        Indicator { slot: usize, bin: usize },
        Value { slot: usize, means: Vec<f64> },
    }
    let mut cols = Vec::new();
    for (slot, &f) in cells.features.iter().enumerate() {
        let feature = &ds.features[f];
        let one_hot = encoding == ModelEncoding::Binned || matches!(feature, Feature::Categorical { .. });
        if one_hot {
            for bin in 1..feature.bin_count() {
                columns.push(format!("{}={}", feature.name(), feature.labels()[bin]));
                cols.push(Col::Indicator { slot, bin });
            }
        } else {
            columns.push(feature.name().to_string());
            cols.push(Col::Value {
                slot,
                means: bin_means(ds, f),
            });
        }
    }
    let row = |bins: &[usize], raw: Option<&[f64]>| -> Vec<f64> {
        cols.iter()
            .map(|c| match c {
                Col::Indicator { slot, bin } => (bins[*slot] == *bin) as u8 as f64,
                Col::Value { slot, means } => raw.map_or(means[bins[*slot]], |r| r[*slot]),
            })
            .collect()
    };
    let records = ds
        .records
        .iter()
        .map(|r| {
            let bins: Vec<usize> = cells.features.iter().map(|&f| r.bins[f]).collect();
            let raw: Vec<f64> = cells.features.iter().map(|&f| r.values[f]).collect();
            row(&bins, Some(&raw))
        })
        .collect();
    let cell_rows = cells.cells.iter().map(|c| row(&c.bins, None)).collect();
    Design {
        columns,
        records,
        cells: cell_rows,
    }
}

/// Builds `(p0, p1, W)` over the occupied cells.
pub fn empirical_context(ds: &GroupedDataset, cells: &CellMapping, opts: &ContextOptions) -> Result<FittedContext> {
    for s in 0..2u8 {
        if ds.stats.group_counts[s as usize] == 0 {
            return Err(Error::EmptyGroup(s));
        }
    }
    let support = Arc::new(Support::new(cells.labels())?);
    let needs_design = opts.channel == ChannelSource::Model || opts.groups == GroupSource::Model;
    let design = needs_design.then(|| design(ds, cells, opts.encoding));

    let (w1, channel_model) = match opts.channel {
        ChannelSource::Empirical => (
            cells
                .cells
                .iter()
                .map(|c| (c.positives[0] + c.positives[1]) as f64 / c.total() as f64)
                .collect::<Vec<f64>>(),
            None,
        ),
        ChannelSource::Model => {
            let d = design.as_ref().expect("design built for model channel");
            let labels: Vec<bool> = ds.records.iter().map(|r| r.y == 1).collect();
            let m = fit_logistic(&d.records, &labels, &opts.logistic)?;
            (
                d.cells.iter().map(|x| m.predict(x)).collect(),
                Some(FittedModel::new(d.columns.clone(), &m)),
            )
        }
    };

    let (p0, p1, membership_model, membership_posterior) = match opts.groups {
        GroupSource::Empirical => {
            let w0: Vec<f64> = cells.cells.iter().map(|c| c.counts[0] as f64).collect();
            let w1_: Vec<f64> = cells.cells.iter().map(|c| c.counts[1] as f64).collect();
            (
                DiscreteDistribution::from_weights(support.clone(), &w0)?,
                DiscreteDistribution::from_weights(support.clone(), &w1_)?,
                None,
                None,
            )
        }
        GroupSource::Model => {
            let d = design.as_ref().expect("design built for model groups");
            let labels: Vec<bool> = ds.records.iter().map(|r| r.s == 1).collect();
            let m = fit_logistic(&d.records, &labels, &opts.logistic)?;
            let pi: Vec<f64> = d.cells.iter().map(|x| m.predict(x)).collect();
            let n = ds.records.len() as f64;
            let px: Vec<f64> = cells.cells.iter().map(|c| c.total() as f64 / n).collect();
            let w0: Vec<f64> = px.iter().zip(&pi).map(|(p, s)| p * (1.0 - s)).collect();
            let w1_: Vec<f64> = px.iter().zip(&pi).map(|(p, s)| p * s).collect();
            (
                DiscreteDistribution::from_weights(support.clone(), &w0)?,
                DiscreteDistribution::from_weights(support.clone(), &w1_)?,
                Some(FittedModel::new(d.columns.clone(), &m)),
                Some(pi),
            )
        }
    };
    let (p0, p1) = match opts.smoothing {
        Some(delta) => (p0.smoothed(delta)?, p1.smoothed(delta)?),
        None => (p0, p1),
    };
    let channel = Channel::binary(support, &w1)?;
    Ok(FittedContext {
        ctx: AuditContext::new(p0, p1, channel)?,
        channel_model,
        membership_model,
        membership_posterior,
        options: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::discretize;
    use crate::dataset::load_reader;
    use crate::schema::DatasetSchema;
    use fairchannel_core::correction::correction_function;
    use fairchannel_core::LambdaWeights;

    fn dataset(rows: &str) -> GroupedDataset {
        let schema = DatasetSchema::from_toml(
            r#"
            outcome = { column = "y", zero = ["0"], one = ["1"] }
            group = { column = "g", zero = ["a"], one = ["b"] }
            [[features]]
            name = "A"
            kind = "categorical"
            column = "a"
            values = ["0", "1"]
        "#,
        )
        .unwrap();
        load_reader(format!("a,g,y\n{rows}").as_bytes(), &schema).unwrap()
    }

    fn empirical() -> ContextOptions {
        ContextOptions {
            channel: ChannelSource::Empirical,
            ..ContextOptions::default()
        }
    }

    #[test]
    fn single_cell_has_no_disparity() {
        let ds = dataset("0,a,1\n0,b,0\n0,a,0\n");
        let m = discretize(&ds, &[0]);
        let fc = empirical_context(&ds, &m, &empirical()).unwrap();
        assert_eq!(fc.ctx.p0().masses(), &[1.0]);
        assert_eq!(fc.ctx.p1().masses(), &[1.0]);
        assert_eq!(fc.ctx.q0(), fc.ctx.q1());
    }

    #[test]
    fn disjoint_groups_need_smoothing() {
        let ds = dataset("0,a,1\n0,a,0\n1,b,0\n1,b,1\n1,b,1\n");
        let m = discretize(&ds, &[0]);
        let lam = LambdaWeights::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let fc = empirical_context(&ds, &m, &empirical()).unwrap();
        assert_eq!(fc.ctx.continuity_violations(), ["A=0"]);
        assert!(matches!(
            correction_function(&lam, &fc.ctx),
            Err(fairchannel_core::Error::AbsoluteContinuityViolation { .. })
        ));
        let smoothed = ContextOptions {
            smoothing: Some(1e-6),
            ..empirical()
        };
        let fc = empirical_context(&ds, &m, &smoothed).unwrap();
        let res = correction_function(&lam, &fc.ctx).unwrap();
        assert!(res.f_l.unwrap().values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_group_is_rejected() {
        let ds = dataset("0,a,1\n1,a,0\n");
        let m = discretize(&ds, &[0]);
        assert!(matches!(
            empirical_context(&ds, &m, &empirical()),
            Err(Error::EmptyGroup(1))
        ));
    }

    #[test]
    fn model_channel_rows_are_interior() {
        let ds = dataset("0,a,1\n0,a,0\n1,b,0\n1,b,1\n1,a,1\n0,b,0\n");
        let m = discretize(&ds, &[0]);
        let fc = empirical_context(&ds, &m, &ContextOptions::default()).unwrap();
        for row in fc.ctx.channel().rows() {
            assert!(row[1] > 0.0 && row[1] < 1.0);
        }
        // a saturated binned model reproduces the pooled cell frequencies
        assert!((fc.ctx.channel().prob(0, 1) - 1.0 / 3.0).abs() < 1e-8);
        assert!((fc.ctx.channel().prob(1, 1) - 2.0 / 3.0).abs() < 1e-8);
    }
}
