//! Audit reports: correction table, prototypes and conditional densities of `f*`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use fairchannel_core::correction::{correction_function, CorrectionResult};
use fairchannel_core::distributions::kl_divergence;
use fairchannel_core::kde::{kde_density, padded_grid, Bandwidth};
use fairchannel_core::{Error as CoreError, LambdaWeights};
use serde::Serialize;

use crate::cells::CellMapping;
use crate::context::{empirical_context, ChannelSource, ContextOptions, FittedContext, FittedModel, GroupSource};
use crate::dataset::{GroupedDataset, IngestStats};
use crate::error::{Error, Result};
use crate::schema::{Feature, ModelEncoding};

/// Log-ratio magnitude above which a cell is listed in the warnings.
const EXTREME_LOG_RATIO: f64 = 20.0;
/// Numeric features with at most this many distinct values also get per-value strata.
const MAX_VALUE_STRATA: usize = 50;
const DENSITY_POINTS: usize = 201;
const DENSITY_PAD_BANDWIDTHS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    pub lam: LambdaWeights,
    pub context: ContextOptions,
    pub bandwidth: Bandwidth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportOptions {
    pub lambda: [f64; 4],
    pub channel: ChannelSource,
    pub groups: GroupSource,
    pub smoothing: Option<f64>,
    pub encoding: &'static str,
    /// `None` for Silverman's rule.
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disparity {
    /// `P(Y=1|S=0)` under the channel.
    pub e_y_s0: f64,
    pub e_y_s1: f64,
    pub kl_q0_q1: f64,
    /// Raw outcome-column rates per group.
    pub label_rate_s0: f64,
    pub label_rate_s1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionSummary {
    pub rho_m: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub n_l: f64,
    pub n_m: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub cell: String,
    pub features: BTreeMap<String, String>,
    pub count_s0: usize,
    pub count_s1: usize,
    pub p0: f64,
    pub p1: f64,
    /// `W(1|x)`.
    pub w1: f64,
    pub f_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prototype {
    pub cell: String,
    pub features: BTreeMap<String, String>,
    pub f_star: f64,
    pub p0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prototypes {
    pub argmax: Prototype,
    pub argmin: Prototype,
    pub closest_to_zero: Prototype,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub name: String,
    pub n: usize,
    pub mean_f_star: Option<f64>,
    pub bandwidth: Option<f64>,
    /// Location of a degenerate (single-valued) stratum.
    pub spike: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySet {
    pub feature: String,
    /// `bins` or `values`.
    pub strata_by: &'static str,
    pub file: String,
    pub strata: Vec<Stratum>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Models {
    pub channel: Option<FittedModel>,
    pub membership: Option<FittedModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub dataset: IngestStats,
    pub cell_features: Vec<String>,
    pub cell_count: usize,
    pub options: ReportOptions,
    pub disparity: Disparity,
    pub delta_opt: f64,
    /// No first-order correction exists (no disparity seen by the active terms).
    pub degenerate: bool,
    pub correction: Option<CorrectionSummary>,
    pub prototypes: Option<Prototypes>,
    pub cells: Vec<CellRow>,
    pub models: Models,
    pub densities: Vec<DensitySet>,
    pub warnings: Vec<String>,
}

/// A finished audit: the report plus the rendered CSV files.
#[derive(Debug, Clone)]
pub struct AuditOutput {
    pub report: AuditReport,
    pub fitted: FittedContext,
    pub correction: Option<CorrectionResult>,
    /// `f*` per record, when the correction exists.
    pub record_scores: Option<Vec<f64>>,
    /// Relative path and contents of every CSV output.
    pub files: Vec<(String, String)>,
}

/// `f*` of each record's cell.
pub fn score_records(cells: &CellMapping, result: &CorrectionResult) -> Result<Vec<f64>> {
    let f = result.f_star.values();
    cells
        .record_cell
        .iter()
        .enumerate()
        .map(|(record, &c)| f.get(c).copied().ok_or(Error::UnknownCell { record }))
        .collect()
}

fn prototype(ds: &GroupedDataset, cells: &CellMapping, fitted: &FittedContext, f: &[f64], i: usize) -> Prototype {
    Prototype {
        cell: cells.cells[i].label.clone(),
        features: cells.describe(ds, i).into_iter().collect(),
        f_star: f[i],
        p0: fitted.ctx.p0().mass(i),
    }
}

/// Extreme cells of `f*` among cells carrying group-0 mass; ties go to the
/// lexicographically smallest label.
pub fn find_prototypes(
    ds: &GroupedDataset,
    cells: &CellMapping,
    fitted: &FittedContext,
    f: &[f64],
) -> Option<Prototypes> {
    let candidates: Vec<usize> = (0..f.len()).filter(|&i| fitted.ctx.p0().mass(i) > 0.0).collect();
    let label = |i: usize| cells.cells[i].label.as_str();
    let pick = |key: &dyn Fn(usize) -> f64| {
        candidates
            .iter()
            .copied()
            .min_by(|&a, &b| key(a).total_cmp(&key(b)).then_with(|| label(a).cmp(label(b))))
    };
    let argmax = pick(&|i| -f[i])?;
    let argmin = pick(&|i| f[i])?;
    let closest = pick(&|i| f[i].abs())?;
    Some(Prototypes {
        argmax: prototype(ds, cells, fitted, f, argmax),
        argmin: prototype(ds, cells, fitted, f, argmin),
        closest_to_zero: prototype(ds, cells, fitted, f, closest),
    })
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Gaussian KDE of `f*` over group-0 records, one curve per stratum.
fn density_csv(strata: &[(String, Vec<f64>)], bandwidth: Bandwidth) -> (String, Vec<Stratum>) {
    let mut csv = String::from("stratum,kind,x,density\n");
    let mut info = Vec::with_capacity(strata.len());
    for (name, samples) in strata {
        let n = samples.len();
        let mean = (n > 0).then(|| samples.iter().sum::<f64>() / n as f64);
        let grid = padded_grid(samples, bandwidth, DENSITY_POINTS, DENSITY_PAD_BANDWIDTHS);
        let curve = grid
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|(g, h)| Ok((g.clone(), *h, kde_density(samples, g, bandwidth)?)));
        match curve {
            Ok((grid, h, density)) => {
                for (x, d) in grid.iter().zip(&density) {
                    let _ = writeln!(csv, "{name},kde,{x},{d}");
                }
                info.push(Stratum {
                    name: name.clone(),
                    n,
                    mean_f_star: mean,
                    bandwidth: Some(h),
                    spike: None,
                });
            }
            Err(CoreError::DegenerateSample(at)) => {
                let _ = writeln!(csv, "{name},spike,{at},");
                info.push(Stratum {
                    name: name.clone(),
                    n,
                    mean_f_star: mean,
                    bandwidth: None,
                    spike: Some(at),
                });
            }
            Err(_) => info.push(Stratum {
                name: name.clone(),
                n,
                mean_f_star: mean,
                bandwidth: None,
                spike: None,
            }),
        }
    }
    (csv, info)
}

fn densities(ds: &GroupedDataset, scores: &[f64], bandwidth: Bandwidth) -> (Vec<DensitySet>, Vec<(String, String)>) {
    let mut sets = Vec::new();
    let mut files = Vec::new();
    let group0: Vec<usize> = (0..ds.records.len()).filter(|&i| ds.records[i].s == 0).collect();
    for (fi, feature) in ds.features.iter().enumerate() {
        let stem = file_stem(feature.name());
        let by_bin: Vec<(String, Vec<f64>)> = feature
            .labels()
            .iter()
            .enumerate()
            .map(|(b, label)| {
                let samples = group0
                    .iter()
                    .filter(|&&i| ds.records[i].bins[fi] == b)
                    .map(|&i| scores[i])
                    .collect();
                (label.clone(), samples)
            })
            .collect();
        let file = format!("densities/{stem}.csv");
        let (csv, strata) = density_csv(&by_bin, bandwidth);
        files.push((file.clone(), csv));
        sets.push(DensitySet {
            feature: feature.name().to_string(),
            strata_by: "bins",
            file,
            strata,
        });

        if matches!(feature, Feature::Categorical { .. }) {
            continue;
        }
        let mut by_value: BTreeMap<i64, (f64, Vec<f64>)> = BTreeMap::new();
        for &i in &group0 {
            let v = ds.records[i].values[fi];
            // keyed by the bit pattern of a total order on f64
            let key = {
                let bits = v.to_bits() as i64;
                bits ^ (((bits >> 63) as u64) >> 1) as i64
            };
            by_value.entry(key).or_insert((v, Vec::new())).1.push(scores[i]);
        }
        if by_value.len() > MAX_VALUE_STRATA {
            continue;
        }
        let strata: Vec<(String, Vec<f64>)> = by_value.into_values().map(|(v, s)| (format_value(v), s)).collect();
        let file = format!("densities/{stem}_values.csv");
        let (csv, info) = density_csv(&strata, bandwidth);
        files.push((file.clone(), csv));
        sets.push(DensitySet {
            feature: feature.name().to_string(),
            strata_by: "values",
            file,
            strata: info,
        });
    }
    (sets, files)
}

fn fstar_csv(rows: &[CellRow]) -> String {
    let mut csv = String::from("cell,count_s0,count_s1,p0,p1,w1,f_star\n");
    for r in rows {
        let f = r.f_star.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "\"{}\",{},{},{},{},{},{}",
            r.cell, r.count_s0, r.count_s1, r.p0, r.p1, r.w1, f
        );
    }
    csv
}

/// Runs the full audit on discretized data.
pub fn run_audit(ds: &GroupedDataset, cells: &CellMapping, opts: &AuditOptions) -> Result<AuditOutput> {
    let fitted = empirical_context(ds, cells, &opts.context)?;
    let ctx = &fitted.ctx;
    let lam = opts.lam;
    if lam.l2() > 0.0 {
        let cells = ctx.continuity_violations();
        if !cells.is_empty() {
            return Err(Error::ContinuityViolations { cells });
        }
    }
    let correction = match correction_function(&lam, ctx) {
        Ok(res) => Some(res),
        Err(CoreError::DegenerateObjective(_)) => None,
        Err(e) => return Err(e.into()),
    };

    let mut warnings = Vec::new();
    for label in ctx.extreme_log_ratios(EXTREME_LOG_RATIO) {
        warnings.push(format!("|log p0/p1| above {EXTREME_LOG_RATIO} at {label}"));
    }
    for (name, model) in [
        ("channel", &fitted.channel_model),
        ("membership", &fitted.membership_model),
    ] {
        if let Some(m) = model {
            if !m.converged {
                warnings.push(format!(
                    "{name} model stopped before convergence (gradient norm {})",
                    m.gradient_norm
                ));
            }
        }
    }

    let f_star = correction.as_ref().map(|r| r.f_star.values().to_vec());
    let rows: Vec<CellRow> = cells
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| CellRow {
            cell: c.label.clone(),
            features: cells.describe(ds, i).into_iter().collect(),
            count_s0: c.counts[0],
            count_s1: c.counts[1],
            p0: ctx.p0().mass(i),
            p1: ctx.p1().mass(i),
            w1: ctx.channel().prob(i, 1),
            f_star: f_star.as_ref().map(|f| f[i]),
        })
        .collect();
    let prototypes = f_star.as_ref().and_then(|f| find_prototypes(ds, cells, &fitted, f));
    let record_scores = correction.as_ref().map(|r| score_records(cells, r)).transpose()?;

    let mut files = vec![("fstar_by_cell.csv".to_string(), fstar_csv(&rows))];
    let density_sets = match &record_scores {
        Some(scores) => {
            let (sets, density_files) = densities(ds, scores, opts.bandwidth);
            files.extend(density_files);
            sets
        }
        None => Vec::new(),
    };

    let report = AuditReport {
        dataset: ds.stats.clone(),
        cell_features: cells
            .features
            .iter()
            .map(|&f| ds.features[f].name().to_string())
            .collect(),
        cell_count: cells.cells.len(),
        options: ReportOptions {
            lambda: lam.as_array(),
            channel: opts.context.channel,
            groups: opts.context.groups,
            smoothing: opts.context.smoothing,
            encoding: match opts.context.encoding {
                ModelEncoding::Binned => "binned",
                ModelEncoding::Raw => "raw",
            },
            bandwidth: match opts.bandwidth {
                Bandwidth::Silverman => None,
                Bandwidth::Fixed(h) => Some(h),
            },
        },
        disparity: Disparity {
            e_y_s0: ctx.q0().mass(1),
            e_y_s1: ctx.q1().mass(1),
            kl_q0_q1: kl_divergence(ctx.q0(), ctx.q1())?,
            label_rate_s0: ds.outcome_rate(0),
            label_rate_s1: ds.outcome_rate(1),
        },
        delta_opt: correction.as_ref().map_or(0.0, |r| r.delta_opt),
        degenerate: correction.is_none(),
        correction: correction.as_ref().map(|r| {
            let k = &r.coefficients;
            CorrectionSummary {
                rho_m: k.rho_m,
                a1: k.a1,
                a2: k.a2,
                b1: k.b1,
                n_l: k.n_l,
                n_m: k.n_m,
                m1: k.m1(),
                m2: k.m2(),
            }
        }),
        prototypes,
        cells: rows,
        models: Models {
            channel: fitted.channel_model.clone(),
            membership: fitted.membership_model.clone(),
        },
        densities: density_sets,
        warnings,
    };
    Ok(AuditOutput {
        report,
        fitted,
        correction,
        record_scores,
        files,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
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

impl AuditOutput {
    pub fn report_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.report)?;
        text.push('\n');
        Ok(text)
    }

    /// Writes `report.json` and every CSV under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("report.json"), &self.report_json()?)?;
        for (name, contents) in &self.files {
            write_file(&dir.join(name), contents)?;
        }
        Ok(())
    }
}
