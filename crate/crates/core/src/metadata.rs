//! Dataset profiling: structural counts, per-attribute statistics and the
//! class-distribution features used by search and overview pages.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{format_number, AttributeKind, Cell, Dataset};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetadataError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("empty input")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub name: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub stdev: Option<f64>,
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NominalStats {
    pub name: String,
    pub n_distinct_observed: usize,
    pub mode_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatureSet {
    pub n_instances: usize,
    pub n_attributes: usize,
    pub n_numeric: usize,
    pub n_nominal: usize,
    pub n_string: usize,
    pub n_missing_values: usize,
    pub pct_missing: f64,
    pub numeric_stats: Vec<NumericStats>,
    pub nominal_stats: Vec<NominalStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minority_class_fraction: Option<f64>,
}

/// Profiles `ds`. When `target` names a nominal attribute the class
/// distribution features are filled in as well.
pub fn compute_meta_features(ds: &Dataset, target: Option<&str>) -> Result<MetaFeatureSet, MetadataError> {
    let target_index = match target {
        Some(name) => Some(
            ds.attribute_index(name)
                .ok_or_else(|| MetadataError::UnknownAttribute(name.to_string()))?,
        ),
        None => None,
    };

    let mut numeric_stats = Vec::new();
    let mut nominal_stats = Vec::new();
    let mut n_missing_values = 0;
    for (col, attr) in ds.attributes.iter().enumerate() {
        let n_missing = ds.column(col).filter(|c| c.is_missing()).count();
        n_missing_values += n_missing;
        match &attr.kind {
            AttributeKind::Numeric => {
                let values: Vec<f64> = ds.column(col).filter_map(Cell::as_number).collect();
                let (mean, stdev) = match mean_and_population_stdev(&values) {
                    Some((m, s)) => (Some(m), Some(s)),
                    None => (None, None),
                };
                numeric_stats.push(NumericStats {
                    name: attr.name.clone(),
                    min: values.iter().copied().reduce(f64::min),
                    max: values.iter().copied().reduce(f64::max),
                    mean,
                    stdev,
                    n_missing,
                });
            }
            AttributeKind::Nominal(labels) => {
                let counts = category_counts(ds.column(col).filter_map(Cell::as_category), labels.len());
                nominal_stats.push(NominalStats {
                    name: attr.name.clone(),
                    n_distinct_observed: counts.iter().filter(|&&c| c > 0).count(),
                    mode_label: mode_label(&counts, labels),
                });
            }
            AttributeKind::String => {}
        }
    }

    let count_kind = |f: fn(&AttributeKind) -> bool| ds.attributes.iter().filter(|a| f(&a.kind)).count();
    let n_cells = ds.rows.len() * ds.attributes.len();
    let mut features = MetaFeatureSet {
        n_instances: ds.rows.len(),
        n_attributes: ds.attributes.len(),
        n_numeric: count_kind(|k| matches!(k, AttributeKind::Numeric)),
        n_nominal: count_kind(|k| matches!(k, AttributeKind::Nominal(_))),
        n_string: count_kind(|k| matches!(k, AttributeKind::String)),
        n_missing_values,
        pct_missing: if n_cells == 0 {
            0.0
        } else {
            n_missing_values as f64 / n_cells as f64
        },
        numeric_stats,
        nominal_stats,
        n_classes: None,
        class_entropy: None,
        default_accuracy: None,
        minority_class_fraction: None,
    };

    if let Some(col) = target_index {
        if let AttributeKind::Nominal(labels) = &ds.attributes[col].kind {
            let labels_seen: Vec<usize> = ds.column(col).filter_map(Cell::as_category).collect();
            features.n_classes = Some(labels.len());
            if !labels_seen.is_empty() {
                let counts = category_counts(labels_seen.iter().copied(), labels.len());
                let min_observed = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
                features.class_entropy = class_entropy(&labels_seen).ok();
                features.default_accuracy = default_accuracy(&labels_seen).ok();
                features.minority_class_fraction = Some(min_observed as f64 / labels_seen.len() as f64);
            }
        }
    }
    Ok(features)
}

fn category_counts(values: impl Iterator<Item = usize>, n_labels: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_labels];
    for v in values {
        counts[v] += 1;
    }
    counts
}

/// Most frequent label; ties go to the lexicographically smallest label.
fn mode_label(counts: &[usize], labels: &[String]) -> Option<String> {
    counts
        .iter()
        .zip(labels)
        .filter(|(&c, _)| c > 0)
        .max_by(|(ca, la), (cb, lb)| ca.cmp(cb).then_with(|| lb.cmp(la)))
        .map(|(_, l)| l.clone())
}

pub(crate) fn mean_and_population_stdev(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn label_counts<T: Ord>(labels: &[T]) -> BTreeMap<&T, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

/// Shannon entropy of the label distribution, in bits.
pub fn class_entropy<T: Ord>(labels: &[T]) -> Result<f64, MetadataError> {
    if labels.is_empty() {
        return Err(MetadataError::EmptyInput);
    }
    let n = labels.len() as f64;
    let h = label_counts(labels)
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    // a single class sums to -0.0
    Ok(h.max(0.0))
}

/// Majority-class rate: largest class count over the number of labels.
pub fn default_accuracy<T: Ord>(labels: &[T]) -> Result<f64, MetadataError> {
    if labels.is_empty() {
        return Err(MetadataError::EmptyInput);
    }
    let max = label_counts(labels).values().copied().max().unwrap_or(0);
    Ok(max as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSummary {
    pub name: String,
    pub kind: String,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub relation: String,
    pub shape: (usize, usize),
    pub attributes: Vec<AttributeSummary>,
    pub preview: Vec<String>,
}

pub const PREVIEW_ROWS: usize = 10;

pub fn dataset_summary(ds: &Dataset) -> DatasetSummary {
    let attributes = ds
        .attributes
        .iter()
        .enumerate()
        .map(|(col, a)| AttributeSummary {
            name: a.name.clone(),
            kind: a.kind.name().to_string(),
            missing: ds.column(col).filter(|c| c.is_missing()).count(),
        })
        .collect();
    let preview = ds
        .rows
        .iter()
        .take(PREVIEW_ROWS)
        .map(|row| {
            row.iter()
                .zip(&ds.attributes)
                .map(|(cell, attr)| render_cell(cell, &attr.kind))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect();
    DatasetSummary {
        relation: ds.relation.clone(),
        shape: (ds.rows.len(), ds.attributes.len()),
        attributes,
        preview,
    }
}

fn render_cell(cell: &Cell, kind: &AttributeKind) -> String {
    match cell {
        Cell::Missing => "?".into(),
        Cell::Number(v) => format_number(*v),
        Cell::Category(i) => kind.labels().map_or_else(String::new, |l| l[*i].clone()),
        Cell::Text(s) => s.clone(),
    }
}

impl DatasetSummary {
    /// Plain-text rendering used by the CLI.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "relation: {}", self.relation);
        let _ = writeln!(out, "shape: {} rows x {} attributes", self.shape.0, self.shape.1);
        let width = self.attributes.iter().map(|a| a.name.len()).max().unwrap_or(4).max(4);
        let _ = writeln!(out, "{:<width$}  {:<7}  missing", "name", "kind");
        for a in &self.attributes {
            let _ = writeln!(out, "{:<width$}  {:<7}  {}", a.name, a.kind, a.missing);
        }
        if !self.preview.is_empty() {
            let _ = writeln!(out, "first {} rows:", self.preview.len());
            for row in &self.preview {
                let _ = writeln!(out, "  {row}");
            }
        }
        out
    }
}
