//! Server-side evaluation of submitted predictions.
//!
//! Every measure is computed per `(repeat, fold)` on that fold's test rows
//! and then aggregated (mean and population standard deviation). The only
//! pooled quantity is the confusion matrix over all folds of repeat 0.

mod measures;
mod metrics;
mod predictions;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{Cell, Dataset};
use crate::metadata::mean_and_population_stdev;
use crate::tasks::{Task, TaskType};

pub use self::measures::{Direction, Measure, UnknownMeasure};
pub use self::metrics::{
    accuracy, auc_binary, confusion, mae, precision_recall_f1_macro, rmse, ConfusionMatrix, MacroScores, MetricError,
};
pub use self::predictions::{
    validate_predictions, PredictionParseError, PredictionRow, PredictionSet, PredictionValue, Violation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("predictions failed validation ({} violations)", .0.len())]
    ValidationFailed(Vec<Violation>),
    #[error("dataset does not match the task: {0}")]
    DatasetMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldValue {
    pub repeat: u32,
    pub fold: u32,
    /// `None` when the measure is undefined on this fold.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub folds: Vec<FoldValue>,
    pub mean: Option<f64>,
    pub stdev: Option<f64>,
    pub flags: Vec<String>,
}

impl MeasureResult {
    fn from_folds(folds: Vec<FoldValue>, flags: Vec<String>) -> Self {
        let values: Vec<f64> = folds.iter().filter_map(|f| f.value).collect();
        let (mean, stdev) = match mean_and_population_stdev(&values) {
            Some((m, s)) => (Some(m), Some(s)),
            None => (None, None),
        };
        MeasureResult {
            folds,
            mean,
            stdev,
            flags,
        }
    }
}

/// Scores of one run, keyed by measure id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    #[serde(flatten)]
    pub measures: BTreeMap<String, MeasureResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion_matrix: Option<ConfusionMatrix>,
}

impl EvaluationResult {
    pub fn get(&self, measure: Measure) -> Option<&MeasureResult> {
        self.measures.get(measure.id())
    }

    pub fn mean(&self, measure: Measure) -> Option<f64> {
        self.get(measure).and_then(|m| m.mean)
    }
}

enum Truth {
    Classes(Vec<Option<usize>>),
    Values(Vec<Option<f64>>),
}

fn truth_of(task: &Task, ds: &Dataset) -> Result<Truth, EvaluationError> {
    let col = ds
        .attribute_index(&task.target)
        .ok_or_else(|| EvaluationError::DatasetMismatch(format!("no attribute `{}`", task.target)))?;
    if ds.attributes[col].kind.labels().unwrap_or(&[]) != task.classes.as_slice() {
        return Err(EvaluationError::DatasetMismatch("target classes differ".into()));
    }
    Ok(match task.task_type {
        TaskType::SupervisedClassification => Truth::Classes(ds.column(col).map(Cell::as_category).collect()),
        TaskType::SupervisedRegression => Truth::Values(ds.column(col).map(Cell::as_number).collect()),
    })
}

/// Validates `p` against `task` and scores every measure the task requires.
pub fn evaluate_run(task: &Task, ds: &Dataset, p: &PredictionSet) -> Result<EvaluationResult, EvaluationError> {
    validate_predictions(task, p).map_err(EvaluationError::ValidationFailed)?;
    let truth = truth_of(task, ds)?;
    let by_row: HashMap<(u32, usize), &PredictionRow> = p.rows.iter().map(|r| ((r.repeat, r.row_index), r)).collect();

    let mut per_measure: BTreeMap<Measure, (Vec<FoldValue>, Vec<String>)> =
        task.measures.iter().map(|&m| (m, (Vec::new(), Vec::new()))).collect();
    let mut pooled = ConfusionMatrix::zeros(task.classes.clone());

    for repeat in 0..task.splits.n_repeats() as u32 {
        for fold in 0..task.splits.n_folds {
            let rows = task.splits.test_rows(repeat as usize, fold);
            let preds: Vec<&PredictionRow> = rows.iter().map(|r| by_row[&(repeat, *r)]).collect();
            let scores = match &truth {
                Truth::Classes(classes) => {
                    let y_true: Vec<usize> = rows.iter().map(|&r| classes[r].expect("labelled row")).collect();
                    let fold_scores = ClassificationFold::new(task, y_true, &preds);
                    if repeat == 0 {
                        pooled.add(&fold_scores.cm);
                    }
                    task.measures
                        .iter()
                        .map(|&m| (m, fold_scores.score(m)))
                        .collect::<Vec<_>>()
                }
                Truth::Values(values) => {
                    let y_true: Vec<f64> = rows.iter().map(|&r| values[r].expect("labelled row")).collect();
                    let y_pred: Vec<f64> = preds
                        .iter()
                        .map(|p| match p.prediction {
                            PredictionValue::Value(v) => v,
                            PredictionValue::Label(_) => unreachable!("validated"),
                        })
                        .collect();
                    task.measures
                        .iter()
                        .map(|&m| {
                            let v = match m {
                                Measure::RootMeanSquaredError => rmse(&y_true, &y_pred).ok(),
                                Measure::MeanAbsoluteError => mae(&y_true, &y_pred).ok(),
                                _ => None,
                            };
                            (m, v)
                        })
                        .collect()
                }
            };
            for (m, value) in scores {
                let (folds, flags) = per_measure.get_mut(&m).expect("measure listed");
                if value.is_none() {
                    flags.push(format!("repeat {repeat} fold {fold}: {m} undefined, fold skipped"));
                }
                folds.push(FoldValue { repeat, fold, value });
            }
        }
    }

    Ok(EvaluationResult {
        measures: per_measure
            .into_iter()
            .map(|(m, (folds, flags))| (m.id().to_string(), MeasureResult::from_folds(folds, flags)))
            .collect(),
        confusion_matrix: (task.task_type == TaskType::SupervisedClassification).then_some(pooled),
    })
}

/// Challenge solutions are evaluated exactly like runs; no flow is needed.
pub fn evaluate_solution(task: &Task, ds: &Dataset, p: &PredictionSet) -> Result<EvaluationResult, EvaluationError> {
    evaluate_run(task, ds, p)
}

struct ClassificationFold<'a> {
    y_true: Vec<usize>,
    y_pred: Vec<usize>,
    preds: &'a [&'a PredictionRow],
    n_classes: usize,
    cm: ConfusionMatrix,
}

impl<'a> ClassificationFold<'a> {
    fn new(task: &Task, y_true: Vec<usize>, preds: &'a [&'a PredictionRow]) -> Self {
        let y_pred: Vec<usize> = preds
            .iter()
            .map(|p| match &p.prediction {
                PredictionValue::Label(l) => task.class_index(l).expect("validated"),
                PredictionValue::Value(_) => unreachable!("validated"),
            })
            .collect();
        let mut cm = ConfusionMatrix::zeros(task.classes.clone());
        for (&t, &p) in y_true.iter().zip(&y_pred) {
            cm.counts[t][p] += 1;
        }
        ClassificationFold {
            y_true,
            y_pred,
            preds,
            n_classes: task.classes.len(),
            cm,
        }
    }

    fn score(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::PredictiveAccuracy => accuracy(&self.y_true, &self.y_pred).ok(),
            Measure::PrecisionMacro => Some(precision_recall_f1_macro(&self.cm).precision),
            Measure::RecallMacro => Some(precision_recall_f1_macro(&self.cm).recall),
            Measure::FMeasureMacro => Some(precision_recall_f1_macro(&self.cm).f1),
            Measure::AreaUnderRocCurve => self.auc_one_vs_rest(),
            Measure::RootMeanSquaredError | Measure::MeanAbsoluteError => None,
        }
    }

    /// Unweighted mean over classes of one-vs-rest AUC, skipping classes
    /// absent from (or covering all of) the fold. Rows without confidences
    /// score 1 for the predicted class and 0 otherwise.
    fn auc_one_vs_rest(&self) -> Option<f64> {
        let mut total = 0.0;
        let mut counted = 0usize;
        for class in 0..self.n_classes {
            let is_pos: Vec<bool> = self.y_true.iter().map(|&t| t == class).collect();
            let scores: Vec<f64> = self
                .preds
                .iter()
                .zip(&self.y_pred)
                .map(|(p, &pred)| match p.confidences.get(class) {
                    Some(Some(c)) => *c,
                    _ => f64::from(u8::from(pred == class)),
                })
                .collect();
            if let Ok(auc) = auc_binary(&is_pos, &scores) {
                total += auc;
                counted += 1;
            }
        }
        (counted > 0).then(|| total / counted as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::AttributeSpec;
    use crate::tasks::{create_task, EstimationProcedure};

    fn abab_task() -> (Task, Dataset) {
        let ds = Dataset::new(
            "abab",
            vec![AttributeSpec::numeric("x"), AttributeSpec::nominal("y", ["a", "b"])],
            [0, 0, 1, 1]
                .iter()
                .enumerate()
                .map(|(i, &c)| vec![Cell::Number(i as f64), Cell::Category(c)])
                .collect(),
        )
        .unwrap();
        let proc = EstimationProcedure::cross_validation(2, 1, 7, true);
        (
            create_task(&ds, 1, "y", TaskType::SupervisedClassification, proc).unwrap(),
            ds,
        )
    }

    fn predict(task: &Task, label: impl Fn(usize) -> String) -> PredictionSet {
        let mut rows = Vec::new();
        for repeat in 0..task.splits.n_repeats() {
            for &row in &task.splits.rows {
                rows.push(PredictionRow {
                    repeat: repeat as u32,
                    fold: task.splits.fold_of(repeat, row).unwrap(),
                    row_index: row,
                    prediction: PredictionValue::Label(label(row)),
                    confidences: Vec::new(),
                });
            }
        }
        PredictionSet { rows }
    }

    #[test]
    fn complete_submission_validates() {
        let (task, _) = abab_task();
        assert_eq!(validate_predictions(&task, &predict(&task, |_| "a".into())), Ok(()));
    }

    #[test]
    fn missing_row_and_wrong_fold() {
        let (task, _) = abab_task();
        let mut p = predict(&task, |_| "a".into());
        let dropped = p.rows.remove(0);
        let v = validate_predictions(&task, &p).unwrap_err();
        assert_eq!(
            v,
            [Violation::MissingPrediction {
                repeat: 0,
                row: dropped.row_index
            }]
        );

        let mut p = predict(&task, |_| "a".into());
        let expected = p.rows[1].fold;
        p.rows[1].fold = 1 - expected;
        let v = validate_predictions(&task, &p).unwrap_err();
        assert_eq!(
            v,
            [Violation::FoldMismatch {
                repeat: 0,
                row: p.rows[1].row_index,
                expected,
                got: 1 - expected
            }]
        );
    }

    #[test]
    fn label_and_confidence_violations() {
        let (task, _) = abab_task();
        let mut p = predict(&task, |_| "a".into());
        p.rows[0].prediction = PredictionValue::Label("c".into());
        p.rows[1].confidences = vec![Some(0.5), None];
        p.rows[2].confidences = vec![Some(1.5), Some(0.0)];
        p.rows.push(p.rows[3].clone());
        let v = validate_predictions(&task, &p).unwrap_err();
        assert_eq!(v.len(), 4);
        assert!(matches!(v[0], Violation::UnknownLabel { .. }));
        assert!(matches!(v[1], Violation::IncompleteConfidences { .. }));
        assert!(matches!(v[2], Violation::ConfidenceOutOfRange { .. }));
        assert!(matches!(v[3], Violation::DuplicatePrediction { .. }));
    }

    #[test]
    fn majority_class_on_stratified_folds() {
        let (task, ds) = abab_task();
        let result = evaluate_run(&task, &ds, &predict(&task, |_| "a".into())).unwrap();
        let acc = result.get(Measure::PredictiveAccuracy).unwrap();
        assert_eq!(
            acc.folds.iter().map(|f| f.value.unwrap()).collect::<Vec<_>>(),
            [0.5, 0.5]
        );
        assert_eq!(acc.mean, Some(0.5));
        assert_eq!(acc.stdev, Some(0.0));
        assert_eq!(result.mean(Measure::AreaUnderRocCurve), Some(0.5));
        let cm = result.confusion_matrix.unwrap();
        assert_eq!(cm.counts, [[2, 0], [2, 0]]);
    }

    #[test]
    fn perfect_predictions() {
        let (task, ds) = abab_task();
        let p = predict(&task, |r| if r < 2 { "a".into() } else { "b".into() });
        let result = evaluate_run(&task, &ds, &p).unwrap();
        for m in [
            Measure::PredictiveAccuracy,
            Measure::FMeasureMacro,
            Measure::AreaUnderRocCurve,
        ] {
            assert_eq!(result.mean(m), Some(1.0), "{m}");
            assert_eq!(result.get(m).unwrap().stdev, Some(0.0));
        }
        assert_eq!(evaluate_solution(&task, &ds, &p).unwrap(), result);
    }

    #[test]
    fn invalid_predictions_fail() {
        let (task, ds) = abab_task();
        let err = evaluate_run(&task, &ds, &PredictionSet::default()).unwrap_err();
        assert!(matches!(err, EvaluationError::ValidationFailed(v) if v.len() == 4));
    }

    #[test]
    fn single_class_fold_skips_auc() {
        let ds = Dataset::new(
            "skew",
            vec![AttributeSpec::nominal("y", ["a", "b"])],
            [0, 0, 0, 1].iter().map(|&c| vec![Cell::Category(c)]).collect(),
        )
        .unwrap();
        let proc = EstimationProcedure::cross_validation(2, 1, 1, true);
        let task = create_task(&ds, 1, "y", TaskType::SupervisedClassification, proc).unwrap();
        let result = evaluate_run(&task, &ds, &predict(&task, |_| "a".into())).unwrap();
        let auc = result.get(Measure::AreaUnderRocCurve).unwrap();
        assert_eq!(auc.folds.iter().filter(|f| f.value.is_none()).count(), 1);
        assert_eq!(auc.flags.len(), 1);
        assert_eq!(auc.mean, Some(0.5));
    }

    #[test]
    fn regression_run() {
        let ds = Dataset::new(
            "reg",
            vec![AttributeSpec::numeric("y")],
            (0..4).map(|i| vec![Cell::Number(i as f64)]).collect(),
        )
        .unwrap();
        let proc = EstimationProcedure::cross_validation(2, 1, 1, false);
        let task = create_task(&ds, 1, "y", TaskType::SupervisedRegression, proc).unwrap();
        let rows = task
            .splits
            .rows
            .iter()
            .map(|&r| PredictionRow {
                repeat: 0,
                fold: task.splits.fold_of(0, r).unwrap(),
                row_index: r,
                prediction: PredictionValue::Value(r as f64 + 1.0),
                confidences: Vec::new(),
            })
            .collect();
        let result = evaluate_run(&task, &ds, &PredictionSet { rows }).unwrap();
        assert_eq!(result.mean(Measure::RootMeanSquaredError), Some(1.0));
        assert_eq!(result.mean(Measure::MeanAbsoluteError), Some(1.0));
        assert!(result.confusion_matrix.is_none());
    }

    #[test]
    fn csv_round_trip_and_json_shape() {
        let (task, ds) = abab_task();
        let mut p = predict(&task, |_| "b".into());
        p.rows[0].confidences = vec![Some(0.25), Some(0.75)];
        let csv = p.to_csv(&task);
        assert!(csv.starts_with("repeat,fold,row_index,prediction,confidence.a,confidence.b\n"));
        assert_eq!(PredictionSet::from_csv(&task, &csv).unwrap(), p);
        let bad = csv.replacen("row_index", "row", 1);
        assert!(matches!(
            PredictionSet::from_csv(&task, &bad),
            Err(PredictionParseError::HeaderMismatch { .. })
        ));

        let result = evaluate_run(&task, &ds, &p).unwrap();
        let json = serde_json::to_value(&result).unwrap();
        let acc = &json["predictive_accuracy"];
        for key in ["folds", "mean", "stdev", "flags"] {
            assert!(acc.get(key).is_some(), "{key}");
        }
        let back: EvaluationResult = serde_json::from_value(json).unwrap();
        assert_eq!(back, result);
    }
}
