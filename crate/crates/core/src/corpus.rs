//! Corpus records and the study flags derived from their MeSH descriptors
//! and publication types.
//!
//! Corpus files are newline-delimited JSON, one paper per line. Lines that
//! fail to parse or validate are skipped and counted; only an unreadable
//! file is fatal.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub const MIN_YEAR: i32 = 1800;
pub const MAX_YEAR: i32 = 2100;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: invalid record: {reason}")]
    Validation { line: usize, reason: String },
}

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub r#abstract: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub mesh: Vec<String>,
    #[serde(default)]
    pub pub_types: Vec<String>,
}

impl PaperRecord {
    pub fn study_flags(&self) -> StudyFlags {
        derive_study_flags(&self.mesh, &self.pub_types)
    }

    /// Metadata carried alongside every evidence sentence from this paper.
    pub fn meta(&self) -> PaperMeta {
        PaperMeta {
            paper_id: self.paper_id.clone(),
            title: self.title.clone(),
            authors: self.authors.clone(),
            venue: self.venue.clone(),
            year: self.year,
            flags: self.study_flags(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StudyFlags {
    pub retracted: bool,
    pub clinical_trial: bool,
    pub case_report: bool,
    pub human: bool,
    pub animal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperMeta {
    pub paper_id: String,
    pub title: String,
    pub authors: Vec<String>,
    pub venue: String,
    pub year: Option<i32>,
    pub flags: StudyFlags,
}

/// Maps Medline publication types and MeSH descriptors onto study flags.
///
/// Unknown descriptors are ignored. "Humans" suppresses the animal flag.
pub fn derive_study_flags<S: AsRef<str>>(mesh: &[S], pub_types: &[S]) -> StudyFlags {
    let has_type = |t: &str| pub_types.iter().any(|p| p.as_ref() == t);
    let has_mesh = |m: &str| mesh.iter().any(|d| d.as_ref() == m);
    let human = has_mesh("Humans");
    StudyFlags {
        retracted: has_type("Retracted Publication"),
        clinical_trial: pub_types.iter().any(|p| {
            let p = p.as_ref();
            p.starts_with("Clinical Trial") || p == "Randomized Controlled Trial"
        }),
        case_report: has_type("Case Reports"),
        human,
        animal: has_mesh("Animals") && !human,
    }
}

/// Parses one corpus line. `line_no` is 1-based and only used for errors.
pub fn parse_paper_record(line: &str, line_no: usize) -> Result<PaperRecord, CorpusError> {
    #[derive(Deserialize)]
    struct Raw {
        paper_id: Option<String>,
        #[serde(default)]
        title: Option<String>,
        #[serde(default)]
        r#abstract: Option<String>,
        #[serde(default)]
        authors: Option<Vec<String>>,
        #[serde(default)]
        venue: Option<String>,
        #[serde(default)]
        year: Option<i32>,
        #[serde(default)]
        mesh: Option<Vec<String>>,
        #[serde(default)]
        pub_types: Option<Vec<String>>,
    }

    let raw: Raw = serde_json::from_str(line).map_err(|source| CorpusError::Parse { line: line_no, source })?;
    let invalid = |reason: &str| CorpusError::Validation { line: line_no, reason: reason.to_string() };
    let paper_id = raw.paper_id.ok_or_else(|| invalid("missing paper_id"))?;
    if paper_id.trim().is_empty() {
        return Err(invalid("empty paper_id"));
    }
    if let Some(year) = raw.year {
        if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            return Err(invalid(&format!("year {year} outside [{MIN_YEAR}, {MAX_YEAR}]")));
        }
    }
    Ok(PaperRecord {
        paper_id,
        title: raw.title.unwrap_or_default(),
        r#abstract: raw.r#abstract.unwrap_or_default(),
        authors: raw.authors.unwrap_or_default(),
        venue: raw.venue.unwrap_or_default(),
        year: raw.year,
        mesh: raw.mesh.unwrap_or_default(),
        pub_types: raw.pub_types.unwrap_or_default(),
    })
}

/// Shared count of skipped records; safe to bump from many workers.
#[derive(Debug, Clone, Default)]
pub struct SkipCounter(Arc<AtomicUsize>);

impl SkipCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

/// Streaming reader over a corpus file.
///
/// Yields valid records in file order. Bad lines and repeated paper ids are
/// logged, recorded in [`CorpusStream::issues`], and skipped. Only a read
/// failure surfaces as `Err`, after which the stream ends.
pub struct CorpusStream<R> {
    lines: io::Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
    skipped: SkipCounter,
    issues: Vec<CorpusError>,
    failed: bool,
}

pub fn stream_corpus(path: &Path) -> Result<CorpusStream<BufReader<File>>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    Ok(CorpusStream::new(BufReader::new(file)))
}

impl<R: BufRead> CorpusStream<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            seen: HashSet::new(),
            skipped: SkipCounter::default(),
            issues: Vec::new(),
            failed: false,
        }
    }

    pub fn skipped(&self) -> usize {
        self.skipped.get()
    }

    pub fn skip_counter(&self) -> SkipCounter {
        self.skipped.clone()
    }

    pub fn issues(&self) -> &[CorpusError] {
        &self.issues
    }

    fn skip(&mut self, err: CorpusError) {
        tracing::warn!("skipping corpus record: {err}");
        self.skipped.bump();
        self.issues.push(err);
    }
}

impl<R: BufRead> Iterator for CorpusStream<R> {
    type Item = Result<PaperRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    self.failed = true;
                    return Some(Err(CorpusError::Io { path: format!("<line {}>", self.line_no + 1), source }));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_paper_record(&line, self.line_no) {
                Ok(record) => {
                    if !self.seen.insert(record.paper_id.clone()) {
                        let err = CorpusError::Validation {
                            line: self.line_no,
                            reason: format!("duplicate paper_id {:?}", record.paper_id),
                        };
                        self.skip(err);
                        continue;
                    }
                    return Some(Ok(record));
                }
                Err(err) => self.skip(err),
            }
        }
    }
}

/// Reads a whole corpus into memory, returning the records and the skip count.
pub fn load_corpus(path: &Path) -> Result<(Vec<PaperRecord>, usize), CorpusError> {
    let mut stream = stream_corpus(path)?;
    let mut records = Vec::new();
    for record in stream.by_ref() {
        records.push(record?);
    }
    Ok((records, stream.skipped()))
}
