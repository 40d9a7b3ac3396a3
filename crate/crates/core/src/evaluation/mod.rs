//! Accuracy, weighted F1, confusion matrices, fine-grained reports and
//! baseline comparison.

mod baseline;
mod metrics;
mod report;

pub use baseline::{compare_to_baseline, BaselineChoice, BaselineTable, DeltaRow, REFERENCE_ROW};
pub use metrics::{
    accuracy, confusion_matrix, f1_breakdown, weighted_f1, ClassScore, ConfusionMatrix, F1Breakdown,
};
pub use report::{
    coarse_report, fine_grained_report, CoarseReport, EvalMode, EvaluationReport, FineClassReport,
    FineReport, PredictionRecord, REPORT_SCHEMA_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction and gold lists differ in length ({pred} vs {gold})")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("empty evaluation population")]
    Empty,
    #[error("label {0} is not among the declared classes")]
    UnknownLabel(String),
    #[error("{} post(s) have no prediction: {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("metric {0:?} is not in the baseline table")]
    MetricMismatch(String),
    #[error("baseline table: {0}")]
    Baseline(String),
}
