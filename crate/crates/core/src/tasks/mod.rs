//! Task generation: a dataset plus a prediction goal becomes a fully
//! specified problem with deterministic cross-validation folds, required
//! measures and a fixed submission schema.

mod rng;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Measure;
use crate::formats::{AttributeKind, Cell, Dataset};

pub use self::rng::{mix, splitmix64_next, SplitMix64};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("target `{target}` must be a {expected} attribute")]
    TargetKindMismatch { target: String, expected: &'static str },
    #[error("{folds} folds requested but only {instances} labelled instances")]
    TooFewInstances { folds: u32, instances: usize },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid estimation procedure: {0}")]
    InvalidProcedure(String),
    #[error("measure `{0}` is not valid for this task type")]
    InvalidMeasure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    SupervisedClassification,
    SupervisedRegression,
}

impl TaskType {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::SupervisedClassification => "supervised_classification",
            TaskType::SupervisedRegression => "supervised_regression",
        }
    }

    pub fn default_measures(self) -> Vec<Measure> {
        match self {
            TaskType::SupervisedClassification => vec![
                Measure::PredictiveAccuracy,
                Measure::FMeasureMacro,
                Measure::AreaUnderRocCurve,
            ],
            TaskType::SupervisedRegression => vec![Measure::RootMeanSquaredError, Measure::MeanAbsoluteError],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcedureKind {
    Crossvalidation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimationProcedure {
    pub kind: ProcedureKind,
    pub folds: u32,
    pub repeats: u32,
    pub seed: u64,
    pub stratified: bool,
}

impl EstimationProcedure {
    /// 10-fold, single repeat; stratified for classification only.
    pub fn defaults(task_type: TaskType, seed: u64) -> Self {
        EstimationProcedure {
            kind: ProcedureKind::Crossvalidation,
            folds: 10,
            repeats: 1,
            seed,
            stratified: task_type == TaskType::SupervisedClassification,
        }
    }

    pub fn cross_validation(folds: u32, repeats: u32, seed: u64, stratified: bool) -> Self {
        EstimationProcedure {
            kind: ProcedureKind::Crossvalidation,
            folds,
            repeats,
            seed,
            stratified,
        }
    }
}

/// Fold id of every covered row, per repeat.
///
/// `rows` lists the dataset row indices taking part (ascending);
/// `folds[repeat][i]` is the fold of `rows[i]` in that repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub n_folds: u32,
    pub rows: Vec<usize>,
    pub folds: Vec<Vec<u32>>,
}

impl SplitAssignment {
    pub fn n_repeats(&self) -> usize {
        self.folds.len()
    }

    pub fn fold_of(&self, repeat: usize, row_index: usize) -> Option<u32> {
        let pos = self.rows.binary_search(&row_index).ok()?;
        self.folds.get(repeat).map(|f| f[pos])
    }

    /// Dataset row indices in the test part of `(repeat, fold)`, ascending.
    pub fn test_rows(&self, repeat: usize, fold: u32) -> Vec<usize> {
        match self.folds.get(repeat) {
            Some(assign) => self
                .rows
                .iter()
                .zip(assign)
                .filter(|(_, &f)| f == fold)
                .map(|(&r, _)| r)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn fold_sizes(&self, repeat: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds as usize];
        for &f in &self.folds[repeat] {
            sizes[f as usize] += 1;
        }
        sizes
    }
}

/// What the splitter partitions: class labels for a stratified split, or a
/// plain row count.
#[derive(Debug, Clone, Copy)]
pub enum SplitInput<'a> {
    Labels(&'a [usize]),
    Count(usize),
}

impl SplitInput<'_> {
    fn len(&self) -> usize {
        match self {
            SplitInput::Labels(l) => l.len(),
            SplitInput::Count(n) => *n,
        }
    }
}

/// Deterministic fold assignment.
///
/// For repeat `j` the stream seed is `mix(seed ^ j)`. Positions are
/// Fisher–Yates shuffled (per class, classes in ascending index order, when
/// stratified), concatenated, and dealt round-robin to folds `0..k`.
pub fn generate_splits(input: SplitInput<'_>, proc: &EstimationProcedure) -> Result<SplitAssignment, TaskError> {
    let n = input.len();
    if proc.folds < 2 {
        return Err(TaskError::InvalidProcedure("at least 2 folds are required".into()));
    }
    if proc.repeats < 1 {
        return Err(TaskError::InvalidProcedure("at least 1 repeat is required".into()));
    }
    if proc.folds as usize > n {
        return Err(TaskError::TooFewInstances {
            folds: proc.folds,
            instances: n,
        });
    }
    let strata: Vec<Vec<usize>> = match (input, proc.stratified) {
        (SplitInput::Labels(labels), true) => {
            let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (pos, &label) in labels.iter().enumerate() {
                by_class.entry(label).or_default().push(pos);
            }
            by_class.into_values().collect()
        }
        (SplitInput::Count(_), true) => {
            return Err(TaskError::InvalidProcedure("stratification needs class labels".into()))
        }
        (_, false) => vec![(0..n).collect()],
    };

    let k = proc.folds as usize;
    let folds = (0..proc.repeats as u64)
        .map(|j| {
            let mut rng = SplitMix64::new(mix(proc.seed ^ j));
            let mut assignment = vec![0u32; n];
            let mut dealt = 0usize;
            for stratum in &strata {
                let mut order = stratum.clone();
                rng.shuffle(&mut order);
                for pos in order {
                    assignment[pos] = (dealt % k) as u32;
                    dealt += 1;
                }
            }
            assignment
        })
        .collect();
    Ok(SplitAssignment {
        n_folds: proc.folds,
        rows: (0..n).collect(),
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub dtype: String,
}

impl SchemaColumn {
    fn new(name: impl Into<String>, dtype: &str) -> Self {
        SchemaColumn {
            name: name.into(),
            dtype: dtype.to_string(),
        }
    }
}

/// Column list a prediction upload must carry, in order.
pub fn submission_schema(task_type: TaskType, classes: &[String]) -> Vec<SchemaColumn> {
    let mut cols = vec![
        SchemaColumn::new("repeat", "int"),
        SchemaColumn::new("fold", "int"),
        SchemaColumn::new("row_index", "int"),
    ];
    match task_type {
        TaskType::SupervisedClassification => {
            cols.push(SchemaColumn::new("prediction", "label"));
            cols.extend(
                classes
                    .iter()
                    .map(|c| SchemaColumn::new(format!("confidence.{c}"), "float")),
            );
        }
        TaskType::SupervisedRegression => cols.push(SchemaColumn::new("prediction", "float")),
    }
    cols
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: u64,
    pub name: String,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub dataset_id: u64,
    pub dataset_url: String,
    pub target: String,
    /// Nominal labels of the target, empty for regression.
    pub classes: Vec<String>,
    pub input_features: Vec<String>,
    pub procedure: EstimationProcedure,
    pub splits: SplitAssignment,
    /// Rows left out of every split because their target is missing.
    pub excluded_rows: Vec<usize>,
    pub measures: Vec<Measure>,
    pub submission_schema: Vec<SchemaColumn>,
}

impl Task {
    pub fn primary_measure(&self) -> Measure {
        self.measures[0]
    }

    /// Replaces the measure list; the first entry becomes the primary measure.
    pub fn with_measures(mut self, measures: Vec<Measure>) -> Result<Self, TaskError> {
        if measures.is_empty() {
            return Err(TaskError::InvalidMeasure("<empty>".into()));
        }
        if let Some(bad) = measures.iter().find(|m| !m.supports(self.task_type)) {
            return Err(TaskError::InvalidMeasure(bad.id().to_string()));
        }
        self.measures = measures;
        Ok(self)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

pub fn dataset_url(dataset_id: u64) -> String {
    format!("/api/v1/datasets/{dataset_id}/file?format=arff")
}

/// Builds a task over `ds`. The returned task has `task_id` 0; the registry
/// assigns the real identifier.
pub fn create_task(
    ds: &Dataset,
    dataset_id: u64,
    target: &str,
    task_type: TaskType,
    proc: EstimationProcedure,
) -> Result<Task, TaskError> {
    let target_index = ds
        .attribute_index(target)
        .ok_or_else(|| TaskError::UnknownAttribute(target.to_string()))?;
    let classes = match (&ds.attributes[target_index].kind, task_type) {
        (AttributeKind::Nominal(labels), TaskType::SupervisedClassification) => labels.clone(),
        (AttributeKind::Numeric, TaskType::SupervisedRegression) => Vec::new(),
        (_, TaskType::SupervisedClassification) => {
            return Err(TaskError::TargetKindMismatch {
                target: target.to_string(),
                expected: "nominal",
            })
        }
        (_, TaskType::SupervisedRegression) => {
            return Err(TaskError::TargetKindMismatch {
                target: target.to_string(),
                expected: "numeric",
            })
        }
    };

    let mut labelled = Vec::new();
    let mut labels = Vec::new();
    let mut excluded_rows = Vec::new();
    for (row, cell) in ds.column(target_index).enumerate() {
        match cell {
            Cell::Missing => excluded_rows.push(row),
            Cell::Category(c) => {
                labelled.push(row);
                labels.push(*c);
            }
            _ => labelled.push(row),
        }
    }
    let input = if proc.stratified {
        SplitInput::Labels(&labels)
    } else {
        SplitInput::Count(labelled.len())
    };
    if proc.stratified && task_type == TaskType::SupervisedRegression {
        return Err(TaskError::InvalidProcedure(
            "stratification requires a classification task".into(),
        ));
    }
    let mut splits = generate_splits(input, &proc)?;
    splits.rows = labelled;

    Ok(Task {
        task_id: 0,
        name: format!("Predict `{target}` of {}", ds.relation),
        task_type,
        dataset_id,
        dataset_url: dataset_url(dataset_id),
        target: target.to_string(),
        input_features: ds
            .attributes
            .iter()
            .filter(|a| a.name != target)
            .map(|a| a.name.clone())
            .collect(),
        submission_schema: submission_schema(task_type, &classes),
        classes,
        procedure: proc,
        splits,
        excluded_rows,
        measures: task_type.default_measures(),
    })
}

/// Canonical JSON for a task: sorted keys, no insignificant whitespace.
pub fn task_document(task: &Task) -> Vec<u8> {
    let value = serde_json::to_value(task).expect("task serializes");
    serde_json::to_vec(&canonical_json(value)).expect("value serializes")
}

pub fn parse_task_document(bytes: &[u8]) -> Result<Task, serde_json::Error> {
    serde_json::from_slice(bytes)
}

pub(crate) fn canonical_json(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonical_json(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical_json).collect()),
        other => other,
    }
}
