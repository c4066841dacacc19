//! File-level stages shared by the CLI and end-to-end runs:
//! ingest (corpus to candidates), classify (candidates to evidence) and
//! build (evidence to snapshot).

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::catalog::{Catalog, CatalogError};
use crate::classifier::{ClassifierError, Scorer, ScorerError};
use crate::corpus::{load_corpus, CorpusError, PaperMeta, PaperRecord};
use crate::evidence::{
    admit_evidence, build_store, export_snapshot, AdmittedEvidence, BuildStats, EvidenceError, Manifest, Rejection,
    SpanBlocklist,
};
use crate::jsonl::{self, JsonlError};
use crate::pipeline::{process_corpus, read_candidates, write_candidates, CandidatePair, PipelineError};

/// Texts sent to a scorer per call.
const SCORE_CHUNK: usize = 2048;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub papers: usize,
    pub skipped_records: usize,
    pub candidates: usize,
}

/// Reads a corpus and writes its candidate pairs as JSON lines.
pub fn ingest(corpus: &Path, catalog: &Catalog, out: &Path) -> Result<IngestSummary, EngineError> {
    let (papers, skipped) = load_corpus(corpus)?;
    let pairs = process_corpus(&papers, catalog);
    let file = File::create(out).map_err(|e| EngineError::Io(format!("{}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    write_candidates(&mut w, &pairs)
        .and_then(|_| w.flush())
        .map_err(|e| EngineError::Io(format!("{}: {e}", out.display())))?;
    Ok(IngestSummary { papers: papers.len(), skipped_records: skipped, candidates: pairs.len() })
}

pub fn load_candidates(path: &Path, catalog: &Catalog) -> Result<Vec<CandidatePair>, EngineError> {
    read_candidates(path)?.into_iter().map(|r| r.into_pair(catalog).map_err(EngineError::from)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassifySummary {
    pub candidates: usize,
    pub admitted: usize,
    pub rejected: BTreeMap<Rejection, usize>,
}

/// Scores candidates and keeps those passing admission.
pub fn classify(
    candidates: &[CandidatePair],
    scorer: &mut dyn Scorer,
    tau: f64,
    blocklist: &SpanBlocklist,
    catalog: &Catalog,
) -> Result<(Vec<AdmittedEvidence>, ClassifySummary), ScorerError> {
    let mut summary = ClassifySummary { candidates: candidates.len(), ..Default::default() };
    let mut admitted = Vec::new();
    for chunk in candidates.chunks(SCORE_CHUNK) {
        let texts: Vec<String> = chunk.iter().map(|c| c.masked_text.clone()).collect();
        let scores = scorer.score_batch(&texts)?;
        if scores.len() != chunk.len() {
            return Err(ScorerError::Transport(format!(
                "scorer returned {} scores for {} texts",
                scores.len(),
                chunk.len()
            )));
        }
        for (cand, score) in chunk.iter().zip(scores) {
            match admit_evidence(cand, score, tau, blocklist, catalog) {
                Ok(ev) => admitted.push(ev),
                Err(r) => *summary.rejected.entry(r).or_default() += 1,
            }
        }
    }
    summary.admitted = admitted.len();
    Ok((admitted, summary))
}

pub fn write_evidence(path: &Path, evidence: &[AdmittedEvidence]) -> Result<(), EngineError> {
    Ok(jsonl::write_all(path, evidence)?)
}

pub fn read_evidence(path: &Path) -> Result<Vec<AdmittedEvidence>, EngineError> {
    Ok(jsonl::read_all(path)?)
}

pub fn paper_index(papers: &[PaperRecord]) -> HashMap<String, PaperMeta> {
    papers.iter().map(|p| (p.paper_id.clone(), p.meta())).collect()
}

/// Builds a store from an evidence file and its corpus, then writes the
/// snapshot directory.
pub fn build_snapshot(
    evidence: &Path,
    corpus: &Path,
    catalog: Catalog,
    tau: f64,
    blocklist: &SpanBlocklist,
    out: &Path,
) -> Result<(Manifest, BuildStats), EngineError> {
    let (papers, _) = load_corpus(corpus)?;
    let items = read_evidence(evidence)?;
    let (store, stats) = build_store(items, &paper_index(&papers), catalog, tau, blocklist)?;
    let manifest = export_snapshot(&store, out)?;
    Ok((manifest, stats))
}
