//! Candidate evidence generation.
//!
//! Abstract → sentences → dictionary mentions → masked candidate pairs.
//! Every step is a pure function of its inputs and the read-only catalog,
//! so documents can be processed in any order or in parallel.

mod pairs;
mod segment;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pairs::{
    generate_candidate_pairs, mask_pair, pairwise_combinations, unmask, validate_masked, MAX_PAIRWISE_COMBINATIONS,
};
pub use segment::segment_sentences;

use crate::catalog::{AgentKind, Catalog, Cui, MentionDictionary};
use crate::corpus::PaperRecord;
use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("overlapping spans {first:?} and {second:?}")]
    OverlappingSpans { first: (usize, usize), second: (usize, usize) },
    #[error("span {start}..{end} outside text of {len} chars")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("text already contains an argument placeholder")]
    MaskTokenInText,
    #[error("expected one [Arg1] and one [Arg2], found {arg1} and {arg2}")]
    MaskCount { arg1: usize, arg2: usize },
    #[error("cui {0} is not in the catalog")]
    UnknownCui(Cui),
    #[error("masked_text does not match text and spans")]
    MaskMismatch,
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub paper_id: String,
    pub sentence_index: usize,
    pub text: String,
    /// Char offset of the sentence within its abstract.
    pub char_offset: usize,
}

/// A linked entity span, in char offsets within its sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub cui: Cui,
    pub kind: AgentKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidatePair {
    pub paper_id: String,
    pub sentence_index: usize,
    pub text: String,
    pub arg1: Mention,
    pub arg2: Mention,
    pub masked_text: String,
}

pub fn detect_mentions(sentence: &Sentence, dictionary: &MentionDictionary) -> Vec<Mention> {
    let chars: Vec<char> = sentence.text.chars().collect();
    dictionary
        .find(&sentence.text)
        .into_iter()
        .map(|m| {
            let (cui, kind) = dictionary.preferred(m.surface_id);
            Mention {
                start: m.start,
                end: m.end,
                surface: chars[m.start..m.end].iter().collect(),
                cui: cui.clone(),
                kind,
            }
        })
        .collect()
}

/// Runs segmentation, mention detection and pair generation over one paper.
pub fn process_paper(paper: &PaperRecord, catalog: &Catalog) -> Vec<CandidatePair> {
    segment_sentences(&paper.r#abstract, &paper.paper_id)
        .iter()
        .flat_map(|sentence| {
            let mentions = detect_mentions(sentence, catalog.dictionary());
            if mentions.len() < 2 {
                return Vec::new();
            }
            generate_candidate_pairs(sentence, &mentions, catalog)
        })
        .collect()
}

/// Parallel [`process_paper`] over a corpus; output follows input order.
pub fn process_corpus(papers: &[PaperRecord], catalog: &Catalog) -> Vec<CandidatePair> {
    papers.par_iter().map(|p| process_paper(p, catalog)).collect::<Vec<_>>().into_iter().flatten().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpan {
    pub start: usize,
    pub end: usize,
    pub cui: Cui,
}

/// Wire form of a candidate pair in the intermediate dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub paper_id: String,
    pub sentence_index: usize,
    pub text: String,
    pub arg1: ArgSpan,
    pub arg2: ArgSpan,
    pub masked_text: String,
}

impl From<&CandidatePair> for CandidateRecord {
    fn from(pair: &CandidatePair) -> Self {
        let span = |m: &Mention| ArgSpan { start: m.start, end: m.end, cui: m.cui.clone() };
        Self {
            paper_id: pair.paper_id.clone(),
            sentence_index: pair.sentence_index,
            text: pair.text.clone(),
            arg1: span(&pair.arg1),
            arg2: span(&pair.arg2),
            masked_text: pair.masked_text.clone(),
        }
    }
}

impl CandidateRecord {
    /// Rebuilds the in-memory pair, recovering surfaces from the text and
    /// kinds from the catalog, and checks the mask against the spans.
    pub fn into_pair(self, catalog: &Catalog) -> Result<CandidatePair, PipelineError> {
        let chars: Vec<char> = self.text.chars().collect();
        let mention = |a: &ArgSpan| -> Result<Mention, PipelineError> {
            if a.start >= a.end || a.end > chars.len() {
                return Err(PipelineError::SpanOutOfRange { start: a.start, end: a.end, len: chars.len() });
            }
            let kind =
                catalog.classify_agent(a.cui.as_str()).ok_or_else(|| PipelineError::UnknownCui(a.cui.clone()))?;
            Ok(Mention {
                start: a.start,
                end: a.end,
                surface: chars[a.start..a.end].iter().collect(),
                cui: a.cui.clone(),
                kind,
            })
        };
        let arg1 = mention(&self.arg1)?;
        let arg2 = mention(&self.arg2)?;
        let expected = mask_pair(&self.text, (arg1.start, arg1.end), (arg2.start, arg2.end))?;
        if expected != self.masked_text || arg1.start > arg2.start {
            return Err(PipelineError::MaskMismatch);
        }
        Ok(CandidatePair {
            paper_id: self.paper_id,
            sentence_index: self.sentence_index,
            text: self.text,
            arg1,
            arg2,
            masked_text: self.masked_text,
        })
    }
}

pub fn write_candidates<W: Write>(writer: &mut W, pairs: &[CandidatePair]) -> std::io::Result<()> {
    for pair in pairs {
        jsonl::write_line(writer, &CandidateRecord::from(pair))?;
    }
    Ok(())
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateRecord>, PipelineError> {
    Ok(jsonl::read_all(path)?)
}
