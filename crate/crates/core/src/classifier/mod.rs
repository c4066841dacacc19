//! Interaction detection: labeled data, the baseline scorer, external
//! scorers, metrics and reports.

mod baseline;
pub mod convert;
pub mod features;
mod instances;
mod metrics;
pub mod report;
pub mod scorer;

pub use baseline::{train_baseline, BaselineModel, TrainConfig, MODEL_FORMAT};
pub use instances::{
    by_split, collapse_label, load_labeled_instances, parse_instances, write_instances, LabeledInstance, Split,
    SplitCount, SplitSummary,
};
pub use metrics::{evaluate_detection, f1_score, metrics_at, score_instances, DetectionMetrics};
pub use scorer::{HttpScorer, ProtocolError, Scorer, ScorerError, ScorerRequest, ScorerResponse, SubprocessScorer};

use crate::jsonl::JsonlError;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("io error: {0}")]
    Io(String),
    #[error("line {line}: {reason}")]
    Validation { line: usize, reason: String },
    #[error("training error: {0}")]
    Training(String),
    #[error("empty instance list")]
    EmptyInstances,
    #[error("model error: {0}")]
    Model(String),
    #[error("report error: {0}")]
    Report(String),
    #[error("conversion error: {0}")]
    Conversion(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}
