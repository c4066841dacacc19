//! Extraction, ranking and serving of supplement interaction evidence.
//!
//! The engine reads paper records, finds supplement and drug mentions
//! against a curated catalog, turns co-occurring mentions into masked
//! candidate pairs, scores them with an interaction detector, and
//! aggregates admitted sentences into ranked interaction records that
//! are persisted as snapshots and served over a JSON API.
//!
//! Module map:
//!
//! - [`corpus`]: paper records and study flags.
//! - [`catalog`]: supplement/drug entities, clusters, name resolution, mention dictionary.
//! - [`pipeline`]: sentence segmentation, mention detection, candidate pairs, masking.
//! - [`classifier`]: labeled data, the baseline detector, external scorers, metrics.
//! - [`evidence`]: admission, ranking, interaction records and snapshots.
//! - [`service`]: read-only query layer and HTTP router.

pub mod catalog;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod engine;
pub mod evidence;
pub mod jsonl;
pub mod pipeline;
pub mod service;
pub mod synth;

pub use catalog::{AgentEntity, AgentKind, Catalog, Cui, MatchKind, MentionDictionary};
pub use classifier::{BaselineModel, DetectionMetrics, LabeledInstance, Scorer, ScorerError, Split};
pub use corpus::{PaperRecord, StudyFlags};
pub use evidence::{AdmittedEvidence, EvidenceItem, EvidenceStore, InteractionId, InteractionRecord, SpanBlocklist};
pub use pipeline::{CandidatePair, Mention, Sentence};
pub use service::SearchService;

/// The two argument placeholders substituted for mention spans.
pub const ARG1_TOKEN: &str = "[Arg1]";
pub const ARG2_TOKEN: &str = "[Arg2]";
