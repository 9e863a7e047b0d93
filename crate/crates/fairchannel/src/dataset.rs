//! CSV ingestion into group-labelled records.

use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schema::{DatasetSchema, Feature};

/// One retained row.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Raw numeric value per feature (category index for categorical features).
    pub values: Vec<f64>,
    /// Bin per feature.
    pub bins: Vec<usize>,
    pub s: u8,
    pub y: u8,
    /// 1-based line in the source file.
    pub line: u64,
}

/// Row accounting for one ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub rows_read: usize,
    /// Rows rejected by a schema filter.
    pub filtered: usize,
    /// Rows whose group value is not mapped to either group.
    pub excluded_group: usize,
    /// Rows with a missing or unparseable feature, outcome or group value.
    pub dropped_missing: usize,
    pub records: usize,
    /// Records per group `[S=0, S=1]`.
    pub group_counts: [usize; 2],
    /// Records with `Y = 1` per group.
    pub outcome_positives: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct GroupedDataset {
    pub features: Vec<Feature>,
    pub records: Vec<Record>,
    pub stats: IngestStats,
}

impl GroupedDataset {
    /// Empirical `P(Y=1|S=s)` of the outcome column.
    pub fn outcome_rate(&self, s: usize) -> f64 {
        self.stats.outcome_positives[s] as f64 / self.stats.group_counts[s] as f64
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name() == name)
    }
}

pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<GroupedDataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_reader(file, schema)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S")
        .ok()
        .or_else(|| {
            NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

enum Located {
    Single(usize),
    Pair(usize, usize),
}

pub fn load_reader<R: Read>(reader: R, schema: &DatasetSchema) -> Result<GroupedDataset> {
    let features = schema.validated_features()?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let outcome_col = column(&headers, &schema.outcome.column)?;
    let group_col = column(&headers, &schema.group.column)?;
    let located = features
        .iter()
        .map(|f| match f {
            Feature::DurationDays { from, to, .. } => Ok(Located::Pair(column(&headers, from)?, column(&headers, to)?)),
            Feature::Numeric { column: c, .. } | Feature::Categorical { column: c, .. } => {
                Ok(Located::Single(column(&headers, c)?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let filters = schema
        .filters
        .iter()
        .map(|f| Ok((column(&headers, &f.column)?, f)))
        .collect::<Result<Vec<_>>>()?;

    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    let mut row = csv::StringRecord::new();
    while csv.read_record(&mut row)? {
        stats.rows_read += 1;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).filter(|v| !schema.is_missing(v)).map(str::trim);
        if !filters.iter().all(|(i, f)| f.keeps(field(*i))) {
            stats.filtered += 1;
            continue;
        }
        let Some(group_raw) = field(group_col) else {
            stats.dropped_missing += 1;
            continue;
        };
        let Some(s) = schema.group.code(group_raw) else {
            stats.excluded_group += 1;
            continue;
        };
        let Some(outcome_raw) = field(outcome_col) else {
            stats.dropped_missing += 1;
            continue;
        };
        let y = schema
            .outcome
            .code(outcome_raw)
            .ok_or_else(|| Error::UnmappableCategory {
                column: schema.outcome.column.clone(),
                value: outcome_raw.to_string(),
            })?;

        let mut values = Vec::with_capacity(features.len());
        let mut complete = true;
        for (feature, loc) in features.iter().zip(&located) {
            let value = match (feature, loc) {
                (
                    Feature::Categorical {
                        column, values: cats, ..
                    },
                    Located::Single(i),
                ) => match field(*i) {
                    None => None,
                    Some(raw) => Some(
                        cats.iter()
                            .position(|c| c == raw)
                            .ok_or_else(|| Error::UnmappableCategory {
                                column: column.clone(),
                                value: raw.to_string(),
                            })? as f64,
                    ),
                },
                (Feature::DurationDays { .. }, Located::Pair(a, b)) => {
                    match (field(*a).and_then(parse_timestamp), field(*b).and_then(parse_timestamp)) {
                        (Some(start), Some(end)) => Some((end - start).num_seconds() as f64 / 86_400.0),
                        _ => None,
                    }
                }
                (_, Located::Single(i)) => field(*i)
                    .and_then(|raw| raw.parse::<f64>().ok())
                    .filter(|v| v.is_finite()),
                _ => unreachable!("feature kinds and column lookups are built together"),
            };
            match value {
                Some(v) => values.push(v),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            stats.dropped_missing += 1;
            continue;
        }
        let bins = features.iter().zip(&values).map(|(f, &v)| f.bin_of(v)).collect();
        stats.group_counts[s as usize] += 1;
        stats.outcome_positives[s as usize] += y as usize;
        records.push(Record {
            values,
            bins,
            s,
            y,
            line,
        });
    }
    stats.records = records.len();
    if records.is_empty() {
        return Err(Error::EmptyAfterFiltering { read: stats.rows_read });
    }
    Ok(GroupedDataset {
        features,
        records,
        stats,
    })
}
