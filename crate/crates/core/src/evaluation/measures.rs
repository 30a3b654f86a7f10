use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tasks::TaskType;

/// Whether larger or smaller values of a measure are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::HigherIsBetter => a > b,
            Direction::LowerIsBetter => a < b,
        }
    }

    pub fn compare(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Direction::HigherIsBetter => b.total_cmp(&a),
            Direction::LowerIsBetter => a.total_cmp(&b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    PredictiveAccuracy,
    PrecisionMacro,
    RecallMacro,
    FMeasureMacro,
    AreaUnderRocCurve,
    RootMeanSquaredError,
    MeanAbsoluteError,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::PredictiveAccuracy,
        Measure::PrecisionMacro,
        Measure::RecallMacro,
        Measure::FMeasureMacro,
        Measure::AreaUnderRocCurve,
        Measure::RootMeanSquaredError,
        Measure::MeanAbsoluteError,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Measure::PredictiveAccuracy => "predictive_accuracy",
            Measure::PrecisionMacro => "precision_macro",
            Measure::RecallMacro => "recall_macro",
            Measure::FMeasureMacro => "f_measure_macro",
            Measure::AreaUnderRocCurve => "area_under_roc_curve",
            Measure::RootMeanSquaredError => "root_mean_squared_error",
            Measure::MeanAbsoluteError => "mean_absolute_error",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Measure::RootMeanSquaredError | Measure::MeanAbsoluteError => Direction::LowerIsBetter,
            _ => Direction::HigherIsBetter,
        }
    }

    pub fn supports(self, task_type: TaskType) -> bool {
        let regression = matches!(self, Measure::RootMeanSquaredError | Measure::MeanAbsoluteError);
        regression == (task_type == TaskType::SupervisedRegression)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown measure `{0}`")]
pub struct UnknownMeasure(pub String);

impl FromStr for Measure {
    type Err = UnknownMeasure;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| UnknownMeasure(s.to_string()))
    }
}
