//! Evidence admission, aggregation into interaction records, ranking and
//! snapshots.

mod blocklist;
mod rank;
mod snapshot;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use blocklist::{SpanBlocklist, BUILTIN_BLOCKLIST};
pub use rank::{compare_evidence, rank_evidence};
pub use snapshot::{
    copy_snapshot, export_snapshot, load_snapshot, read_snapshot, Manifest, SnapshotCounts, FORMAT_VERSION,
};

use crate::catalog::{AgentKind, Catalog, CatalogError, Cui};
use crate::corpus::PaperMeta;
use crate::jsonl::JsonlError;
use crate::pipeline::{CandidatePair, Mention};

#[derive(Debug, thiserror::Error)]
pub enum EvidenceError {
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("blocklist line {line}: {reason}")]
    Blocklist { line: usize, reason: String },
    #[error("malformed interaction id {0:?}; expected Cxxxx-Cyyyy")]
    MalformedId(String),
    #[error("interaction id {given:?} is not ordered; use {expected:?}")]
    UnorderedId { given: String, expected: String },
    #[error("both sides of the pair canonicalize to {0}")]
    SelfPair(Cui),
    #[error("no paper metadata for {0:?}")]
    UnknownPaper(String),
    #[error("unsupported snapshot format version {found} (this build reads {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },
    #[error("checksum mismatch for {file}")]
    ChecksumMismatch { file: String },
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
}

/// Unordered pair of distinct canonical cuis, rendered `smaller-larger`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct InteractionId {
    a: Cui,
    b: Cui,
}

impl InteractionId {
    pub fn first(&self) -> &Cui {
        &self.a
    }

    pub fn second(&self) -> &Cui {
        &self.b
    }

    pub fn contains(&self, cui: &Cui) -> bool {
        &self.a == cui || &self.b == cui
    }

    pub fn partner(&self, cui: &Cui) -> Option<&Cui> {
        if &self.a == cui {
            Some(&self.b)
        } else if &self.b == cui {
            Some(&self.a)
        } else {
            None
        }
    }

    /// Parses the canonical `Cx-Cy` form, rejecting unordered ids.
    pub fn parse(s: &str) -> Result<Self, EvidenceError> {
        let malformed = || EvidenceError::MalformedId(s.to_string());
        let (x, y) = s.split_once('-').ok_or_else(malformed)?;
        let x = Cui::new(x).map_err(|_| malformed())?;
        let y = Cui::new(y).map_err(|_| malformed())?;
        let id = interaction_key(&x, &y)?;
        if id.a != x {
            return Err(EvidenceError::UnorderedId { given: s.to_string(), expected: id.to_string() });
        }
        Ok(id)
    }
}

impl fmt::Display for InteractionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

impl TryFrom<String> for InteractionId {
    type Error = EvidenceError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<InteractionId> for String {
    fn from(value: InteractionId) -> Self {
        value.to_string()
    }
}

/// Id for two canonical cuis, in either order.
pub fn interaction_key(x: &Cui, y: &Cui) -> Result<InteractionId, EvidenceError> {
    match x.cmp(y) {
        std::cmp::Ordering::Less => Ok(InteractionId { a: x.clone(), b: y.clone() }),
        std::cmp::Ordering::Greater => Ok(InteractionId { a: y.clone(), b: x.clone() }),
        std::cmp::Ordering::Equal => Err(EvidenceError::SelfPair(x.clone())),
    }
}

/// Canonical cui of `cui`, or `cui` itself when the catalog lacks it.
pub fn canonical_or_self(catalog: &Catalog, cui: &Cui) -> Cui {
    catalog.canonical_cui(cui.as_str()).cloned().unwrap_or_else(|_| cui.clone())
}

/// Canonicalizes both cuis before keying.
pub fn canonical_interaction_key(catalog: &Catalog, x: &Cui, y: &Cui) -> Result<InteractionId, EvidenceError> {
    interaction_key(&canonical_or_self(catalog, x), &canonical_or_self(catalog, y))
}

/// One argument span of an evidence sentence, in char offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub cui: Cui,
    pub canonical: Cui,
}

impl EvidenceSpan {
    pub(crate) fn sort_key(&self) -> (usize, usize, &Cui, &str) {
        (self.start, self.end, &self.cui, &self.surface)
    }
}

/// A candidate pair that passed admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittedEvidence {
    pub paper_id: String,
    pub sentence_index: usize,
    pub text: String,
    pub interaction_id: InteractionId,
    pub arg1: EvidenceSpan,
    pub arg2: EvidenceSpan,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    BelowThreshold,
    Blocklisted,
    SelfPair,
    NoSupplement,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::BelowThreshold => "below-threshold",
            Rejection::Blocklisted => "blocklisted",
            Rejection::SelfPair => "self-pair",
            Rejection::NoSupplement => "no-supplement",
        })
    }
}

fn span_of(m: &Mention, catalog: &Catalog) -> EvidenceSpan {
    EvidenceSpan {
        start: m.start,
        end: m.end,
        surface: m.surface.clone(),
        cui: m.cui.clone(),
        canonical: canonical_or_self(catalog, &m.cui),
    }
}

fn check(
    arg1: &EvidenceSpan,
    arg2: &EvidenceSpan,
    score: f64,
    tau: f64,
    blocklist: &SpanBlocklist,
    catalog: &Catalog,
) -> Result<InteractionId, Rejection> {
    if score.is_nan() || score < tau {
        return Err(Rejection::BelowThreshold);
    }
    let blocked =
        |s: &EvidenceSpan| blocklist.contains(&s.surface, &s.cui) || blocklist.contains(&s.surface, &s.canonical);
    if blocked(arg1) || blocked(arg2) {
        return Err(Rejection::Blocklisted);
    }
    let id = interaction_key(&arg1.canonical, &arg2.canonical).map_err(|_| Rejection::SelfPair)?;
    let supplement = |c: &Cui| catalog.classify_agent(c.as_str()) == Some(AgentKind::Supplement);
    if !supplement(id.first()) && !supplement(id.second()) {
        return Err(Rejection::NoSupplement);
    }
    Ok(id)
}

/// Admits a scored candidate when the score reaches `tau`, neither span
/// is blocklisted, and the canonical pair is distinct with a supplement.
pub fn admit_evidence(
    candidate: &CandidatePair,
    score: f64,
    tau: f64,
    blocklist: &SpanBlocklist,
    catalog: &Catalog,
) -> Result<AdmittedEvidence, Rejection> {
    let arg1 = span_of(&candidate.arg1, catalog);
    let arg2 = span_of(&candidate.arg2, catalog);
    let interaction_id = check(&arg1, &arg2, score, tau, blocklist, catalog)?;
    Ok(AdmittedEvidence {
        paper_id: candidate.paper_id.clone(),
        sentence_index: candidate.sentence_index,
        text: candidate.text.clone(),
        interaction_id,
        arg1,
        arg2,
        score,
    })
}

/// Re-runs admission on stored evidence against a catalog and threshold.
pub fn readmit(
    mut evidence: AdmittedEvidence,
    tau: f64,
    blocklist: &SpanBlocklist,
    catalog: &Catalog,
) -> Result<AdmittedEvidence, Rejection> {
    evidence.arg1.canonical = canonical_or_self(catalog, &evidence.arg1.cui);
    evidence.arg2.canonical = canonical_or_self(catalog, &evidence.arg2.cui);
    evidence.interaction_id = check(&evidence.arg1, &evidence.arg2, evidence.score, tau, blocklist, catalog)?;
    Ok(evidence)
}

/// Admitted evidence joined with its paper's metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    #[serde(flatten)]
    pub evidence: AdmittedEvidence,
    pub paper: PaperMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub interaction_id: InteractionId,
    pub cui_a: Cui,
    pub cui_b: Cui,
    pub evidence_count: usize,
    pub evidence: Vec<EvidenceItem>,
}

/// One entry of an agent's interaction list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInteraction {
    pub interaction_id: InteractionId,
    pub partner: Cui,
    pub evidence_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub input: usize,
    pub rejected: BTreeMap<Rejection, usize>,
    pub duplicates: usize,
    pub admitted: usize,
}

/// Frozen interaction records over a catalog.
#[derive(Debug, Clone)]
pub struct EvidenceStore {
    built_at: String,
    tau: f64,
    catalog: Catalog,
    records: Vec<InteractionRecord>,
    index: HashMap<InteractionId, usize>,
    by_agent: HashMap<Cui, Vec<AgentInteraction>>,
}

impl PartialEq for EvidenceStore {
    fn eq(&self, other: &Self) -> bool {
        self.built_at == other.built_at
            && self.tau == other.tau
            && self.catalog == other.catalog
            && self.records == other.records
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl EvidenceStore {
    pub(crate) fn assemble(built_at: String, tau: f64, catalog: Catalog, records: Vec<InteractionRecord>) -> Self {
        let index = records.iter().enumerate().map(|(i, r)| (r.interaction_id.clone(), i)).collect();
        let mut by_agent: HashMap<Cui, Vec<AgentInteraction>> = HashMap::new();
        for r in &records {
            for (me, partner) in [(&r.cui_a, &r.cui_b), (&r.cui_b, &r.cui_a)] {
                by_agent.entry(me.clone()).or_default().push(AgentInteraction {
                    interaction_id: r.interaction_id.clone(),
                    partner: partner.clone(),
                    evidence_count: r.evidence_count,
                });
            }
        }
        for list in by_agent.values_mut() {
            list.sort_by(|x, y| y.evidence_count.cmp(&x.evidence_count).then_with(|| x.partner.cmp(&y.partner)));
        }
        Self { built_at, tau, catalog, records, index, by_agent }
    }

    pub fn built_at(&self) -> &str {
        &self.built_at
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Records in interaction id order.
    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn record(&self, id: &InteractionId) -> Option<&InteractionRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    /// Interactions of a canonical cui, most evidence first.
    pub fn interactions_of(&self, cui: &Cui) -> &[AgentInteraction] {
        self.by_agent.get(cui).map_or(&[], Vec::as_slice)
    }

    pub fn interactions_count(&self, cui: &Cui) -> usize {
        self.interactions_of(cui).len()
    }

    pub fn evidence_count(&self) -> usize {
        self.records.iter().map(|r| r.evidence_count).sum()
    }

    pub fn paper_count(&self) -> usize {
        let mut ids: Vec<&str> =
            self.records.iter().flat_map(|r| r.evidence.iter().map(|e| e.evidence.paper_id.as_str())).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn with_built_at(mut self, built_at: impl Into<String>) -> Self {
        self.built_at = built_at.into();
        self
    }
}

fn span_order(e: &AdmittedEvidence) -> impl Ord + '_ {
    (e.arg1.sort_key(), e.arg2.sort_key())
}

/// Aggregates admitted evidence into interaction records.
///
/// Each item is re-admitted against `catalog`, `tau` and `blocklist`.
/// Repeated `(paper_id, sentence_index, interaction_id)` keys keep the
/// highest score, then the earliest spans.
pub fn build_store<I>(
    evidence: I,
    papers: &HashMap<String, PaperMeta>,
    catalog: Catalog,
    tau: f64,
    blocklist: &SpanBlocklist,
) -> Result<(EvidenceStore, BuildStats), EvidenceError>
where
    I: IntoIterator<Item = AdmittedEvidence>,
{
    let mut stats = BuildStats::default();
    let mut kept: HashMap<(String, usize, InteractionId), AdmittedEvidence> = HashMap::new();
    for ev in evidence {
        stats.input += 1;
        let ev = match readmit(ev, tau, blocklist, &catalog) {
            Ok(ev) => ev,
            Err(r) => {
                *stats.rejected.entry(r).or_default() += 1;
                continue;
            }
        };
        if !papers.contains_key(&ev.paper_id) {
            return Err(EvidenceError::UnknownPaper(ev.paper_id));
        }
        let key = (ev.paper_id.clone(), ev.sentence_index, ev.interaction_id.clone());
        match kept.get_mut(&key) {
            None => {
                kept.insert(key, ev);
            }
            Some(cur) => {
                stats.duplicates += 1;
                let better = ev.score > cur.score || (ev.score == cur.score && span_order(&ev) < span_order(cur));
                if better {
                    *cur = ev;
                }
            }
        }
    }
    stats.admitted = kept.len();

    let mut grouped: BTreeMap<InteractionId, Vec<EvidenceItem>> = BTreeMap::new();
    for ev in kept.into_values() {
        let paper = papers[&ev.paper_id].clone();
        grouped.entry(ev.interaction_id.clone()).or_default().push(EvidenceItem { evidence: ev, paper });
    }
    let records = grouped
        .into_iter()
        .map(|(id, items)| {
            let evidence = rank_evidence(items);
            InteractionRecord {
                cui_a: id.first().clone(),
                cui_b: id.second().clone(),
                interaction_id: id,
                evidence_count: evidence.len(),
                evidence,
            }
        })
        .collect();
    Ok((EvidenceStore::assemble(timestamp(), tau, catalog, records), stats))
}
