//! Discretization of records into cells, the finite input alphabet of the audit.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// `Feature=label` pairs joined by `|`.
    pub label: String,
    /// Bin per selected feature.
    pub bins: Vec<usize>,
    /// Records per group `[S=0, S=1]`.
    pub counts: [usize; 2],
    /// Records with `Y = 1` per group.
    pub positives: [usize; 2],
}

impl Cell {
    pub fn total(&self) -> usize {
        self.counts[0] + self.counts[1]
    }
}

/// Occupied cells, ordered by bin tuple, and the cell of every record.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMapping {
    /// Indices of the features spanning the cells.
    pub features: Vec<usize>,
    pub cells: Vec<Cell>,
    pub record_cell: Vec<usize>,
}

impl CellMapping {
    pub fn labels(&self) -> Vec<String> {
        self.cells.iter().map(|c| c.label.clone()).collect()
    }

    /// `(feature name, bin label)` pairs of a cell.
    pub fn describe(&self, ds: &GroupedDataset, cell: usize) -> Vec<(String, String)> {
        self.features
            .iter()
            .zip(&self.cells[cell].bins)
            .map(|(&f, &b)| {
                let feature = &ds.features[f];
                (feature.name().to_string(), feature.labels()[b].clone())
            })
            .collect()
    }
}

/// Resolves a comma-separated list of feature names; `None` selects all.
pub fn select_features(ds: &GroupedDataset, spec: Option<&str>) -> Result<Vec<usize>> {
    let Some(spec) = spec else {
        return Ok((0..ds.features.len()).collect());
    };
    let mut selected = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let i = ds
            .feature_index(name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
        if !selected.contains(&i) {
            selected.push(i);
        }
    }
    if selected.is_empty() {
        return Err(Error::Usage("cell specification selects no features".into()));
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Cartesian product of the selected features' bins, keeping occupied cells.
pub fn discretize(ds: &GroupedDataset, features: &[usize]) -> CellMapping {
    let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for r in &ds.records {
        let key: Vec<usize> = features.iter().map(|&f| r.bins[f]).collect();
        let next = index.len();
        index.entry(key).or_insert(next);
    }
    // renumber in bin-tuple order
    let order: BTreeMap<Vec<usize>, usize> = index.keys().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let mut cells: Vec<Cell> = order
        .keys()
        .map(|bins| Cell {
            label: features
                .iter()
                .zip(bins)
                .map(|(&f, &b)| format!("{}={}", ds.features[f].name(), ds.features[f].labels()[b]))
                .collect::<Vec<_>>()
                .join("|"),
            bins: bins.clone(),
            counts: [0; 2],
            positives: [0; 2],
        })
        .collect();
    let mut record_cell = Vec::with_capacity(ds.records.len());
    for r in &ds.records {
        let key: Vec<usize> = features.iter().map(|&f| r.bins[f]).collect();
        let c = order[&key];
        cells[c].counts[r.s as usize] += 1;
        cells[c].positives[r.s as usize] += r.y as usize;
        record_cell.push(c);
    }
    CellMapping {
        features: features.to_vec(),
        cells,
        record_cell,
    }
}
