//! Conversion from DDI-style XML corpora to normalized instances.
//!
//! Input documents follow the DDI-2013 schema: `<document>` holds
//! `<sentence text=..>` elements, each with `<entity charOffset="a-b">`
//! (inclusive end, `;`-separated fragments) and `<pair e1 e2 ddi type>`.
//! The released train/test division is kept; a dev set is carved from
//! train by seeded instance sampling.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use walkdir::WalkDir;

use super::{collapse_label, ClassifierError, LabeledInstance, Split, SplitSummary};
use crate::pipeline::{mask_pair, pairwise_combinations, PipelineError, MAX_PAIRWISE_COMBINATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Ddi2013,
    NlmDailyMed,
}

impl Preset {
    pub fn dev_size(self) -> usize {
        match self {
            Preset::Ddi2013 => 2069,
            Preset::NlmDailyMed => 1255,
        }
    }

    pub fn default_source(self) -> &'static str {
        match self {
            Preset::Ddi2013 => "ddi2013",
            Preset::NlmDailyMed => "nlm-dailymed",
        }
    }

    /// Source tag for a document id.
    pub fn source_for(self, document_id: &str) -> &'static str {
        let lower = document_id.to_ascii_lowercase();
        if lower.starts_with("ddi-drugbank") {
            "ddi2013-drugbank"
        } else if lower.starts_with("ddi-medline") {
            "ddi2013-medline"
        } else {
            self.default_source()
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ddi2013" | "ddi-2013" => Ok(Preset::Ddi2013),
            "nlm-dailymed" | "nlm" | "dailymed" => Ok(Preset::NlmDailyMed),
            other => Err(format!("unknown preset {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertOptions {
    pub preset: Preset,
    pub seed: u64,
    /// Overrides the preset dev size.
    pub dev_size: Option<usize>,
}

impl ConvertOptions {
    pub fn new(preset: Preset) -> Self {
        Self { preset, seed: 2013, dev_size: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConversionReport {
    pub documents: usize,
    pub sentences: usize,
    /// Sentences dropped for exceeding the pairwise cap.
    pub sentences_over_cap: usize,
    pub pairs_over_cap: usize,
    pub pairs_overlapping: usize,
    pub pairs_unmaskable: usize,
    pub splits: SplitSummary,
    pub by_source: BTreeMap<String, SplitSummary>,
}

#[derive(Debug, Clone)]
struct RawPair {
    id: String,
    masked: String,
    label: u8,
    source: &'static str,
}

#[derive(Debug, Default)]
struct Tally {
    documents: usize,
    sentences: usize,
    sentences_over_cap: usize,
    pairs_over_cap: usize,
    pairs_overlapping: usize,
    pairs_unmaskable: usize,
}

/// Parses `"a-b"` or `"a-b;c-d"` (inclusive ends) into the covering
/// half-open char range.
pub fn parse_char_offset(spec: &str) -> Result<(usize, usize), String> {
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    for frag in spec.split([';', ',']) {
        let frag = frag.trim();
        if frag.is_empty() {
            continue;
        }
        let (a, b) = frag.split_once('-').ok_or_else(|| format!("bad charOffset {spec:?}"))?;
        let a: usize = a.trim().parse().map_err(|_| format!("bad charOffset {spec:?}"))?;
        let b: usize = b.trim().parse().map_err(|_| format!("bad charOffset {spec:?}"))?;
        if b < a {
            return Err(format!("bad charOffset {spec:?}"));
        }
        lo = lo.min(a);
        hi = hi.max(b + 1);
    }
    if lo == usize::MAX {
        return Err(format!("empty charOffset {spec:?}"));
    }
    Ok((lo, hi))
}

/// Detection label of a `<pair>` element.
pub fn pair_label(ddi: Option<&str>, interaction_type: Option<&str>) -> u8 {
    match ddi.map(|d| d.trim().to_ascii_lowercase()) {
        Some(d) if d == "false" || d == "0" || d == "no" => 0,
        _ => interaction_type.map_or(1, collapse_label),
    }
}

fn parse_document(xml: &str, preset: Preset, tally: &mut Tally, out: &mut Vec<RawPair>) -> Result<(), String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| e.to_string())?;
    for document in doc.descendants().filter(|n| n.has_tag_name("document")) {
        tally.documents += 1;
        let doc_id = document.attribute("id").unwrap_or_default();
        let source = preset.source_for(doc_id);
        for sentence in document.children().filter(|n| n.has_tag_name("sentence")) {
            tally.sentences += 1;
            let sid = sentence.attribute("id").unwrap_or_default();
            let text = sentence.attribute("text").ok_or_else(|| format!("sentence {sid} lacks text"))?;
            let mut entities = HashMap::new();
            for e in sentence.children().filter(|n| n.has_tag_name("entity")) {
                let eid = e.attribute("id").ok_or_else(|| format!("entity in {sid} lacks id"))?;
                let off = e.attribute("charOffset").ok_or_else(|| format!("entity {eid} lacks charOffset"))?;
                entities.insert(eid.to_string(), parse_char_offset(off)?);
            }
            let pairs: Vec<_> = sentence.children().filter(|n| n.has_tag_name("pair")).collect();
            if pairwise_combinations(entities.len()) > MAX_PAIRWISE_COMBINATIONS {
                tally.sentences_over_cap += 1;
                tally.pairs_over_cap += pairs.len();
                continue;
            }
            for p in pairs {
                let pid = p.attribute("id").ok_or_else(|| format!("pair in {sid} lacks id"))?;
                let span = |attr: &str| {
                    p.attribute(attr)
                        .and_then(|id| entities.get(id).copied())
                        .ok_or_else(|| format!("pair {pid} references unknown {attr}"))
                };
                let (a, b) = (span("e1")?, span("e2")?);
                match mask_pair(text, a, b) {
                    Ok(masked) => out.push(RawPair {
                        id: pid.to_string(),
                        masked,
                        label: pair_label(p.attribute("ddi"), p.attribute("type")),
                        source,
                    }),
                    Err(PipelineError::OverlappingSpans { .. }) => tally.pairs_overlapping += 1,
                    Err(PipelineError::MaskTokenInText) => tally.pairs_unmaskable += 1,
                    Err(e) => return Err(format!("pair {pid}: {e}")),
                }
            }
        }
    }
    Ok(())
}

fn parse_files(files: &[PathBuf], preset: Preset, tally: &mut Tally) -> Result<Vec<RawPair>, ClassifierError> {
    let mut out = Vec::new();
    for path in files {
        let xml = fs::read_to_string(path).map_err(|e| ClassifierError::Io(format!("{}: {e}", path.display())))?;
        parse_document(&xml, preset, tally, &mut out)
            .map_err(|e| ClassifierError::Conversion(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

fn to_instances(raw: Vec<RawPair>, split: Split) -> Vec<LabeledInstance> {
    raw.into_iter()
        .map(|r| LabeledInstance {
            instance_id: r.id,
            masked_text: r.masked,
            label: r.label,
            source: r.source.to_string(),
            split,
        })
        .collect()
}

/// Converts explicit train and test file lists.
pub fn convert_files(
    train_files: &[PathBuf],
    test_files: &[PathBuf],
    options: &ConvertOptions,
) -> Result<(Vec<LabeledInstance>, ConversionReport), ClassifierError> {
    let mut tally = Tally::default();
    let mut train = parse_files(train_files, options.preset, &mut tally)?;
    let test = parse_files(test_files, options.preset, &mut tally)?;

    let dev_size = options.dev_size.unwrap_or_else(|| options.preset.dev_size());
    if dev_size >= train.len() && !train.is_empty() {
        return Err(ClassifierError::Conversion(format!(
            "dev size {dev_size} leaves no training instances out of {}",
            train.len()
        )));
    }
    train.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    train.shuffle(&mut rng);
    let rest = train.split_off(dev_size.min(train.len()));
    let mut dev = train;
    let mut train = rest;
    train.sort_by(|a, b| a.id.cmp(&b.id));
    dev.sort_by(|a, b| a.id.cmp(&b.id));

    let mut instances = to_instances(train, Split::Train);
    instances.extend(to_instances(dev, Split::Dev));
    instances.extend(to_instances(test, Split::Test));

    let mut ids = std::collections::HashSet::new();
    if let Some(dup) = instances.iter().find(|i| !ids.insert(i.instance_id.as_str())) {
        return Err(ClassifierError::Conversion(format!("duplicate pair id {}", dup.instance_id)));
    }

    let mut by_source: BTreeMap<String, Vec<LabeledInstance>> = BTreeMap::new();
    for inst in &instances {
        by_source.entry(inst.source.clone()).or_default().push(inst.clone());
    }
    let report = ConversionReport {
        documents: tally.documents,
        sentences: tally.sentences,
        sentences_over_cap: tally.sentences_over_cap,
        pairs_over_cap: tally.pairs_over_cap,
        pairs_overlapping: tally.pairs_overlapping,
        pairs_unmaskable: tally.pairs_unmaskable,
        splits: SplitSummary::of(&instances),
        by_source: by_source.into_iter().map(|(k, v)| (k, SplitSummary::of(&v))).collect(),
    };
    Ok((instances, report))
}

fn xml_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("xml")))
        .collect();
    files.sort();
    files
}

fn component_matches(path: &Path, root: &Path, needle: &str) -> bool {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .any(|c| c.as_os_str().to_string_lossy().to_ascii_lowercase().starts_with(needle))
}

/// Converts a corpus directory, assigning files under a `train*`
/// component to train and files under a `test*` component to test.
pub fn convert_dir(
    root: &Path,
    options: &ConvertOptions,
) -> Result<(Vec<LabeledInstance>, ConversionReport), ClassifierError> {
    if !root.is_dir() {
        return Err(ClassifierError::Io(format!("{} is not a directory", root.display())));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for f in xml_files(root) {
        if component_matches(&f, root, "test") {
            test.push(f);
        } else if component_matches(&f, root, "train") {
            train.push(f);
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(ClassifierError::Conversion(format!(
            "{}: expected XML under train and test directories",
            root.display()
        )));
    }
    convert_files(&train, &test, options)
}
