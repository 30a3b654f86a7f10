use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::format_number;
use crate::tasks::{Task, TaskType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionValue {
    Value(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub repeat: u32,
    pub fold: u32,
    pub row_index: usize,
    pub prediction: PredictionValue,
    /// One entry per task class; empty when no confidences were given.
    #[serde(default)]
    pub confidences: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionSet {
    pub rows: Vec<PredictionRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictionParseError {
    #[error("header does not match the submission schema: expected `{expected}`, got `{got}`")]
    HeaderMismatch { expected: String, got: String },
    #[error("line {line}: {reason}")]
    BadRecord { line: u64, reason: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl PredictionSet {
    /// One row per (repeat, test row) of the task, in split order, with
    /// the prediction supplied by `predict(repeat, row_index)`.
    pub fn for_task(task: &Task, mut predict: impl FnMut(u32, usize) -> PredictionValue) -> Self {
        let mut rows = Vec::with_capacity(task.splits.rows.len() * task.splits.n_repeats());
        for repeat in 0..task.splits.n_repeats() {
            for &row in &task.splits.rows {
                let fold = task.splits.fold_of(repeat, row).expect("row belongs to the splits");
                rows.push(PredictionRow {
                    repeat: repeat as u32,
                    fold,
                    row_index: row,
                    prediction: predict(repeat as u32, row),
                    confidences: Vec::new(),
                });
            }
        }
        PredictionSet { rows }
    }

    /// Reads a prediction upload. The header must equal the task's
    /// submission schema exactly.
    pub fn from_csv(task: &Task, text: &str) -> Result<Self, PredictionParseError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let expected: Vec<&str> = task.submission_schema.iter().map(|c| c.name.as_str()).collect();
        let header = match records.next() {
            Some(r) => r.map_err(|e| PredictionParseError::Csv(e.to_string()))?,
            None => csv::StringRecord::new(),
        };
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(PredictionParseError::HeaderMismatch {
                expected: expected.join(","),
                got: header.iter().collect::<Vec<_>>().join(","),
            });
        }

        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(|e| PredictionParseError::Csv(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |reason: String| PredictionParseError::BadRecord { line, reason };
            let int = |i: usize, name: &str| -> Result<u64, PredictionParseError> {
                record[i]
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| bad(format!("`{name}` must be a non-negative integer")))
            };
            let repeat = u32::try_from(int(0, "repeat")?).map_err(|_| bad("`repeat` out of range".into()))?;
            let fold = u32::try_from(int(1, "fold")?).map_err(|_| bad("`fold` out of range".into()))?;
            let row_index =
                usize::try_from(int(2, "row_index")?).map_err(|_| bad("`row_index` out of range".into()))?;
            let prediction = match task.task_type {
                TaskType::SupervisedClassification => PredictionValue::Label(record[3].to_string()),
                TaskType::SupervisedRegression => PredictionValue::Value(
                    record[3]
                        .trim()
                        .parse()
                        .map_err(|_| bad("`prediction` must be a number".into()))?,
                ),
            };
            let mut confidences = (4..record.len())
                .map(|i| {
                    let field = record[i].trim();
                    if field.is_empty() {
                        Ok(None)
                    } else {
                        field
                            .parse::<f64>()
                            .map(Some)
                            .map_err(|_| bad(format!("`{}` must be a number", expected[i])))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            if confidences.iter().all(Option::is_none) {
                confidences.clear();
            }
            rows.push(PredictionRow {
                repeat,
                fold,
                row_index,
                prediction,
                confidences,
            });
        }
        Ok(PredictionSet { rows })
    }

    /// Writes the set in the task's submission format.
    pub fn to_csv(&self, task: &Task) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer
            .write_record(task.submission_schema.iter().map(|c| c.name.as_str()))
            .expect("writing to a Vec cannot fail");
        let n_conf = task.submission_schema.len() - 4;
        for row in &self.rows {
            let mut fields = vec![row.repeat.to_string(), row.fold.to_string(), row.row_index.to_string()];
            fields.push(match &row.prediction {
                PredictionValue::Label(l) => l.clone(),
                PredictionValue::Value(v) => format_number(*v),
            });
            for i in 0..n_conf {
                fields.push(
                    row.confidences
                        .get(i)
                        .copied()
                        .flatten()
                        .map(format_number)
                        .unwrap_or_default(),
                );
            }
            writer.write_record(&fields).expect("writing to a Vec cannot fail");
        }
        String::from_utf8(writer.into_inner().expect("flushing a Vec cannot fail")).expect("UTF-8 fields")
    }
}

/// One reason a prediction set does not satisfy its task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    MissingPrediction {
        repeat: u32,
        row: usize,
    },
    DuplicatePrediction {
        repeat: u32,
        row: usize,
    },
    FoldMismatch {
        repeat: u32,
        row: usize,
        expected: u32,
        got: u32,
    },
    UnknownRow {
        repeat: u32,
        row: usize,
    },
    UnknownLabel {
        repeat: u32,
        row: usize,
        label: String,
    },
    WrongPredictionType {
        repeat: u32,
        row: usize,
    },
    NonFinitePrediction {
        repeat: u32,
        row: usize,
    },
    IncompleteConfidences {
        repeat: u32,
        row: usize,
    },
    ConfidenceOutOfRange {
        repeat: u32,
        row: usize,
        class: String,
    },
    UnexpectedConfidences {
        repeat: u32,
        row: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingPrediction { repeat, row } => write!(f, "repeat {repeat}, row {row}: no prediction"),
            Violation::DuplicatePrediction { repeat, row } => {
                write!(f, "repeat {repeat}, row {row}: predicted more than once")
            }
            Violation::FoldMismatch {
                repeat,
                row,
                expected,
                got,
            } => {
                write!(
                    f,
                    "repeat {repeat}, row {row}: fold {got} given, task assigns fold {expected}"
                )
            }
            Violation::UnknownRow { repeat, row } => {
                write!(f, "repeat {repeat}, row {row}: not part of the task splits")
            }
            Violation::UnknownLabel { repeat, row, label } => {
                write!(f, "repeat {repeat}, row {row}: `{label}` is not a class of the target")
            }
            Violation::WrongPredictionType { repeat, row } => {
                write!(f, "repeat {repeat}, row {row}: prediction has the wrong type")
            }
            Violation::NonFinitePrediction { repeat, row } => {
                write!(f, "repeat {repeat}, row {row}: prediction is not finite")
            }
            Violation::IncompleteConfidences { repeat, row } => {
                write!(
                    f,
                    "repeat {repeat}, row {row}: confidences must be given for every class"
                )
            }
            Violation::ConfidenceOutOfRange { repeat, row, class } => {
                write!(f, "repeat {repeat}, row {row}: confidence for `{class}` outside [0, 1]")
            }
            Violation::UnexpectedConfidences { repeat, row } => {
                write!(
                    f,
                    "repeat {repeat}, row {row}: confidences are only allowed for classification"
                )
            }
        }
    }
}

/// Checks `p` against the task: every test row of every repeat predicted
/// exactly once under the right fold, with valid labels and confidences.
pub fn validate_predictions(task: &Task, p: &PredictionSet) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for row in &p.rows {
        let (repeat, idx) = (row.repeat, row.row_index);
        let expected = task.splits.fold_of(repeat as usize, idx);
        let Some(expected) = expected else {
            violations.push(Violation::UnknownRow { repeat, row: idx });
            continue;
        };
        if !seen.insert((repeat, idx)) {
            violations.push(Violation::DuplicatePrediction { repeat, row: idx });
            continue;
        }
        if row.fold != expected {
            violations.push(Violation::FoldMismatch {
                repeat,
                row: idx,
                expected,
                got: row.fold,
            });
        }
        match (task.task_type, &row.prediction) {
            (TaskType::SupervisedClassification, PredictionValue::Label(l)) => {
                if task.class_index(l).is_none() {
                    violations.push(Violation::UnknownLabel {
                        repeat,
                        row: idx,
                        label: l.clone(),
                    });
                }
            }
            (TaskType::SupervisedRegression, PredictionValue::Value(v)) => {
                if !v.is_finite() {
                    violations.push(Violation::NonFinitePrediction { repeat, row: idx });
                }
            }
            _ => violations.push(Violation::WrongPredictionType { repeat, row: idx }),
        }
        if row.confidences.is_empty() {
            continue;
        }
        if task.task_type == TaskType::SupervisedRegression {
            violations.push(Violation::UnexpectedConfidences { repeat, row: idx });
        } else if row.confidences.len() != task.classes.len() || row.confidences.iter().any(Option::is_none) {
            violations.push(Violation::IncompleteConfidences { repeat, row: idx });
        } else {
            for (class, c) in task.classes.iter().zip(&row.confidences) {
                let c = c.expect("checked complete");
                if !(0.0..=1.0).contains(&c) {
                    violations.push(Violation::ConfidenceOutOfRange {
                        repeat,
                        row: idx,
                        class: class.clone(),
                    });
                }
            }
        }
    }
    for repeat in 0..task.splits.n_repeats() as u32 {
        for &row in &task.splits.rows {
            if !seen.contains(&(repeat, row)) {
                violations.push(Violation::MissingPrediction { repeat, row });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
