//! Dataset schema: which CSV columns feed the audit and how raw values map to
//! cells, groups and outcomes. Loaded from TOML.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Numeric column cut at `edges`.
    #[default]
    Numeric,
    /// Difference in days between two timestamp columns, cut at `edges`.
    DurationDays,
    /// Finite set of raw values.
    Categorical,
}

/// How features enter the fitted logistic models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelEncoding {
    /// One indicator per bin, first bin of each feature dropped. Models are
    /// then exact functions of the cell.
    #[default]
    Binned,
    /// Raw numeric values (categorical features still one-hot); evaluated at
    /// per-bin mean values.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(default)]
    pub kind: FeatureKind,
    pub column: Option<String>,
    pub from: Option<String>,
    pub to: Option<String>,
    /// Strictly increasing cut points; bin `i` holds `edges[i-1] <= v < edges[i]`.
    pub edges: Option<Vec<f64>>,
    /// Raw values of a categorical feature, in code order.
    pub values: Option<Vec<String>>,
    /// Display label per bin or category.
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOp {
    Eq,
    Ne,
    In,
    NotIn,
    /// Inclusive numeric range; either bound may be omitted.
    Range,
}

/// Row filter; a row whose filter column is missing fails the filter.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    pub column: String,
    pub op: FilterOp,
    pub value: Option<String>,
    pub values: Option<Vec<String>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Filter {
    pub fn keeps(&self, raw: Option<&str>) -> bool {
        let Some(raw) = raw else { return false };
        match self.op {
            FilterOp::Eq => self.value.as_deref() == Some(raw),
            FilterOp::Ne => self.value.as_deref() != Some(raw),
            FilterOp::In => self.values.iter().flatten().any(|v| v == raw),
            FilterOp::NotIn => !self.values.iter().flatten().any(|v| v == raw),
            FilterOp::Range => match raw.trim().parse::<f64>() {
                Ok(v) => self.min.is_none_or(|lo| v >= lo) && self.max.is_none_or(|hi| v <= hi),
                Err(_) => false,
            },
        }
    }
}

/// Maps the raw values of a column onto `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryColumn {
    pub column: String,
    /// Raw values coded 0.
    pub zero: Vec<String>,
    /// Raw values coded 1.
    pub one: Vec<String>,
}

impl BinaryColumn {
    pub fn code(&self, raw: &str) -> Option<u8> {
        if self.zero.iter().any(|v| v == raw) {
            Some(0)
        } else if self.one.iter().any(|v| v == raw) {
            Some(1)
        } else {
            None
        }
    }
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "NA".into()]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub outcome: BinaryColumn,
    /// Rows whose group value is in neither list are excluded.
    pub group: BinaryColumn,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    /// Raw tokens treated as missing (after trimming).
    #[serde(default = "default_missing")]
    pub missing: Vec<String>,
    #[serde(default)]
    pub model_encoding: ModelEncoding,
}

/// A validated feature.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Numeric {
        name: String,
        column: String,
        edges: Vec<f64>,
        labels: Vec<String>,
    },
    DurationDays {
        name: String,
        from: String,
        to: String,
        edges: Vec<f64>,
        labels: Vec<String>,
    },
    Categorical {
        name: String,
        column: String,
        values: Vec<String>,
        labels: Vec<String>,
    },
}

impl Feature {
    pub fn name(&self) -> &str {
        match self {
            Feature::Numeric { name, .. } | Feature::DurationDays { name, .. } | Feature::Categorical { name, .. } => {
                name
            }
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Feature::Numeric { labels, .. }
            | Feature::DurationDays { labels, .. }
            | Feature::Categorical { labels, .. } => labels,
        }
    }

    pub fn bin_count(&self) -> usize {
        self.labels().len()
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Feature::Categorical { .. })
    }

    /// Bin of a raw numeric value: the number of edges at or below it.
    pub fn bin_of(&self, v: f64) -> usize {
        match self {
            Feature::Numeric { edges, .. } | Feature::DurationDays { edges, .. } => edges.partition_point(|&e| e <= v),
            Feature::Categorical { .. } => v as usize,
        }
    }

    /// Columns read by this feature.
    pub fn columns(&self) -> Vec<&str> {
        match self {
            Feature::Numeric { column, .. } | Feature::Categorical { column, .. } => vec![column],
            Feature::DurationDays { from, to, .. } => vec![from, to],
        }
    }
}

fn binned_labels(name: &str, edges: &[f64], labels: Option<Vec<String>>) -> Result<Vec<String>> {
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Schema(format!(
            "feature {name:?}: edges must be finite and strictly increasing"
        )));
    }
    match labels {
        Some(l) if l.len() == edges.len() + 1 => Ok(l),
        Some(l) => Err(Error::Schema(format!(
            "feature {name:?}: {} edges need {} labels, got {}",
            edges.len(),
            edges.len() + 1,
            l.len()
        ))),
        None => {
            let mut l = Vec::with_capacity(edges.len() + 1);
            for i in 0..=edges.len() {
                l.push(match (i.checked_sub(1).map(|j| edges[j]), edges.get(i)) {
                    (None, Some(hi)) => format!("<{hi}"),
                    (Some(lo), Some(hi)) => format!("[{lo},{hi})"),
                    (Some(lo), None) => format!(">={lo}"),
                    (None, None) => "all".into(),
                });
            }
            Ok(l)
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<Feature> {
        let name = self.name.clone();
        let need = |field: &Option<String>, key: &str| {
            field
                .clone()
                .ok_or_else(|| Error::Schema(format!("feature {name:?} needs `{key}`")))
        };
        match self.kind {
            FeatureKind::Numeric => {
                let edges = self.edges.clone().unwrap_or_default();
                Ok(Feature::Numeric {
                    column: need(&self.column, "column")?,
                    labels: binned_labels(&name, &edges, self.labels.clone())?,
                    edges,
                    name,
                })
            }
            FeatureKind::DurationDays => {
                let edges = self.edges.clone().unwrap_or_default();
                Ok(Feature::DurationDays {
                    from: need(&self.from, "from")?,
                    to: need(&self.to, "to")?,
                    labels: binned_labels(&name, &edges, self.labels.clone())?,
                    edges,
                    name,
                })
            }
            FeatureKind::Categorical => {
                let values = self
                    .values
                    .clone()
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| Error::Schema(format!("feature {name:?} needs nonempty `values`")))?;
                let labels = self.labels.clone().unwrap_or_else(|| values.clone());
                if labels.len() != values.len() {
                    return Err(Error::Schema(format!("feature {name:?}: one label per value required")));
                }
                Ok(Feature::Categorical {
                    column: need(&self.column, "column")?,
                    values,
                    labels,
                    name,
                })
            }
        }
    }
}

impl DatasetSchema {
    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: DatasetSchema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validated_features()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validated_features(&self) -> Result<Vec<Feature>> {
        if self.features.is_empty() {
            return Err(Error::Schema("at least one feature is required".into()));
        }
        let features = self
            .features
            .iter()
            .map(FeatureSpec::validate)
            .collect::<Result<Vec<_>>>()?;
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name() == f.name()) {
                return Err(Error::Schema(format!("duplicate feature name {:?}", f.name())));
            }
            if f.name().contains(['|', '=']) {
                return Err(Error::Schema(format!(
                    "feature name {:?} may not contain '|' or '='",
                    f.name()
                )));
            }
        }
        if self.group.column == self.outcome.column {
            return Err(Error::Schema("outcome and group must be different columns".into()));
        }
        for f in &self.filters {
            let ok = match f.op {
                FilterOp::Eq | FilterOp::Ne => f.value.is_some(),
                FilterOp::In | FilterOp::NotIn => f.values.is_some(),
                FilterOp::Range => f.min.is_some() || f.max.is_some(),
            };
            if !ok {
                return Err(Error::Schema(format!(
                    "filter on {:?} is missing its operand",
                    f.column
                )));
            }
        }
        Ok(features)
    }

    pub fn is_missing(&self, raw: &str) -> bool {
        let t = raw.trim();
        self.missing.iter().any(|m| m == t)
    }
}
