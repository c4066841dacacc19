//! Seeded synthetic corpora in the DDI-2013 XML schema.
//!
//! Each sentence is a chain of clauses. Two-entity interaction clauses
//! carry the positive pairs, neutral and single-entity clauses fill the
//! rest, and a matched number of label flips adds noise without moving
//! the positive count. Oversized and near-empty sentences are mixed in so
//! the converter's filters see realistic input.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::pipeline::pairwise_combinations;

pub const INTERACTION_TEMPLATES: &[&str] = &[
    "{A} increases the plasma concentration of {B}",
    "{A} may potentiate the anticoagulant effect of {B}",
    "coadministration of {A} reduced the clearance of {B}",
    "{A} should not be combined with {B}",
    "{A} inhibits the hepatic metabolism of {B}",
    "concomitant use of {A} with {B} is contraindicated",
    "{A} decreased the oral absorption of {B}",
    "caution is advised when {A} is given with {B}",
    "{A} enhances the toxicity of {B}",
    "the bleeding risk rises when {A} is added to {B}",
];

pub const NEUTRAL_TEMPLATES: &[&str] = &[
    "{A} and {B} were administered on separate days",
    "{A} and {B} belong to the same therapeutic class",
    "patients received {A} or {B} as monotherapy",
    "{A} was compared with {B} in a randomized trial",
    "the pharmacokinetics of {A} resemble those of {B}",
    "{A} is structurally related to {B}",
];

pub const SINGLE_TEMPLATES: &[&str] = &[
    "{A} is extensively bound to plasma proteins",
    "{A} was well tolerated",
    "the half-life of {A} is about 12 hours",
    "{A} is metabolized in the liver",
    "no dose adjustment of {A} is required",
    "{A} is available as oral tablets",
];

const JOINERS: &[&str] = &["; ", ", while ", ", and ", "; in addition, "];

const INTERACTION_TYPES: &[&str] = &["mechanism", "effect", "advise", "int"];

const ONSETS: &[&str] = &[
    "cl", "am", "ben", "car", "dor", "fen", "gal", "hy", "lor", "mer", "nor", "pra", "ris", "sul", "tel", "ven", "zol",
    "ket", "met", "pro",
];
const MIDDLES: &[&str] = &["a", "i", "o", "e", "u", "ala", "ido", "ero", "ami", "oxa"];
const CODAS: &[&str] = &[
    "zepam", "prazole", "mycin", "olol", "pril", "statin", "dipine", "oxacin", "tidine", "mab", "azole", "vir",
    "parin", "fenac", "triptan",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSpec {
    /// Directory below the corpus root, e.g. `Train/DrugBank`.
    pub dir: String,
    /// Document id prefix, e.g. `DDI-DrugBank`.
    pub doc_prefix: String,
    pub pairs: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub buckets: Vec<BucketSpec>,
    /// Fraction of positives whose label is swapped with a negative.
    pub label_noise: f64,
    /// Sentences per bucket with more than the pairwise cap of entity combinations.
    pub oversize_sentences: usize,
    /// Sentences per bucket with fewer than two entities.
    pub sparse_sentences: usize,
    pub sentences_per_document: usize,
}

fn bucket(dir: &str, prefix: &str, pairs: usize, positives: usize) -> BucketSpec {
    BucketSpec { dir: dir.into(), doc_prefix: prefix.into(), pairs, positives }
}

impl SynthSpec {
    /// Pair and positive counts shaped like the DDI-2013 release after
    /// the pairwise cap.
    pub fn ddi2013() -> Self {
        Self {
            buckets: vec![
                bucket("Train/DrugBank", "DDI-DrugBank", 18650, 3240),
                bucket("Train/MedLine", "DDI-MedLine", 1781, 274),
                bucket("Test/DrugBank", "DDI-DrugBank", 5251, 910),
                bucket("Test/MedLine", "DDI-MedLine", 437, 68),
            ],
            label_noise: 0.08,
            oversize_sentences: 12,
            sparse_sentences: 200,
            sentences_per_document: 8,
        }
    }

    /// Pair and positive counts shaped like the NLM-DailyMed release.
    pub fn nlm_dailymed() -> Self {
        Self {
            buckets: vec![bucket("Train", "NLM-DailyMed", 12627, 2867), bucket("Test", "NLM-DailyMed", 927, 210)],
            label_noise: 0.08,
            oversize_sentences: 6,
            sparse_sentences: 120,
            sentences_per_document: 8,
        }
    }

    pub fn total_pairs(&self) -> usize {
        self.buckets.iter().map(|b| b.pairs).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SynthSummary {
    pub files: Vec<PathBuf>,
    pub documents: usize,
    pub sentences: usize,
    pub kept_pairs: usize,
    pub kept_positives: usize,
    pub oversize_pairs: usize,
}

/// Pronounceable drug-like names, distinct and sorted.
pub fn synthetic_names(count: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut names = std::collections::BTreeSet::new();
    while names.len() < count {
        let name = format!(
            "{}{}{}",
            ONSETS.choose(rng).expect("non-empty"),
            MIDDLES.choose(rng).expect("non-empty"),
            CODAS.choose(rng).expect("non-empty")
        );
        names.insert(name);
        if names.len() == ONSETS.len() * MIDDLES.len() * CODAS.len() {
            break;
        }
    }
    names.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Clause {
    Single,
    Pair { interacting: bool },
}

struct SentencePlan {
    clauses: Vec<Clause>,
}

impl SentencePlan {
    fn entities(&self) -> usize {
        self.clauses.iter().map(|c| if matches!(c, Clause::Single) { 1 } else { 2 }).sum()
    }
}

fn entity_count(rng: &mut impl Rng, remaining: usize) -> usize {
    let weights = [(2, 35), (3, 25), (4, 20), (5, 10), (6, 6), (7, 4)];
    let fitting: Vec<(usize, u32)> =
        weights.iter().copied().filter(|&(n, _)| pairwise_combinations(n) <= remaining).collect();
    let total: u32 = fitting.iter().map(|&(_, w)| w).sum();
    let mut pick = rng.gen_range(0..total);
    for (n, w) in fitting {
        if pick < w {
            return n;
        }
        pick -= w;
    }
    2
}

fn clause_layout(n: usize, rng: &mut impl Rng) -> Vec<Clause> {
    let mut clauses = Vec::new();
    let mut left = n;
    while left > 0 {
        if left >= 2 && rng.gen_bool(0.9) {
            clauses.push(Clause::Pair { interacting: false });
            left -= 2;
        } else {
            clauses.push(Clause::Single);
            left -= 1;
        }
    }
    clauses.shuffle(rng);
    clauses
}

struct RenderedSentence {
    text: String,
    /// Half-open char spans.
    spans: Vec<(usize, usize)>,
    /// Entity index pairs that are interacting clause partners.
    interacting: Vec<(usize, usize)>,
}

fn fill(template: &str, names: &[&str], out: &mut String, spans: &mut Vec<(usize, usize)>) {
    let mut rest = template;
    let mut next = 0;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let start = out.chars().count();
        out.push_str(names[next]);
        spans.push((start, start + names[next].chars().count()));
        next += 1;
        rest = &rest[pos + 3..];
    }
    out.push_str(rest);
}

fn render(plan: &SentencePlan, lexicon: &[String], rng: &mut impl Rng) -> RenderedSentence {
    let picked: Vec<&str> = lexicon.choose_multiple(rng, plan.entities()).map(String::as_str).collect();
    let mut text = String::new();
    let mut spans = Vec::new();
    let mut interacting = Vec::new();
    let mut cursor = 0;
    for (ci, clause) in plan.clauses.iter().enumerate() {
        if ci > 0 {
            text.push_str(JOINERS.choose(rng).expect("non-empty"));
        }
        match clause {
            Clause::Single => {
                fill(
                    SINGLE_TEMPLATES.choose(rng).expect("non-empty"),
                    &picked[cursor..cursor + 1],
                    &mut text,
                    &mut spans,
                );
                cursor += 1;
            }
            Clause::Pair { interacting: is_int } => {
                let pool = if *is_int { INTERACTION_TEMPLATES } else { NEUTRAL_TEMPLATES };
                fill(pool.choose(rng).expect("non-empty"), &picked[cursor..cursor + 2], &mut text, &mut spans);
                if *is_int {
                    interacting.push((cursor, cursor + 1));
                }
                cursor += 2;
            }
        }
    }
    let mut chars = text.chars();
    let first = chars.next().map(|c| c.to_uppercase().collect::<String>()).unwrap_or_default();
    let text = format!("{first}{}.", chars.as_str());
    RenderedSentence { text, spans, interacting }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct XmlSentence {
    rendered: RenderedSentence,
    labels: Vec<((usize, usize), Option<&'static str>)>,
}

fn plans_for(bucket: &BucketSpec, rng: &mut impl Rng) -> io::Result<Vec<SentencePlan>> {
    let mut plans = Vec::new();
    let mut remaining = bucket.pairs;
    while remaining > 0 {
        let n = entity_count(rng, remaining);
        remaining -= pairwise_combinations(n);
        plans.push(SentencePlan { clauses: clause_layout(n, rng) });
    }
    let mut slots: Vec<(usize, usize)> = plans
        .iter()
        .enumerate()
        .flat_map(|(si, p)| {
            p.clauses.iter().enumerate().filter(|(_, c)| matches!(c, Clause::Pair { .. })).map(move |(ci, _)| (si, ci))
        })
        .collect();
    if slots.len() < bucket.positives {
        return Err(io::Error::other(format!(
            "{}: {} positives requested but only {} clause slots",
            bucket.dir,
            bucket.positives,
            slots.len()
        )));
    }
    slots.shuffle(rng);
    for &(si, ci) in &slots[..bucket.positives] {
        plans[si].clauses[ci] = Clause::Pair { interacting: true };
    }
    Ok(plans)
}

fn label_sentences(rendered: Vec<RenderedSentence>, noise: f64, rng: &mut impl Rng) -> Vec<XmlSentence> {
    let mut sentences: Vec<XmlSentence> = rendered
        .into_iter()
        .map(|r| {
            let n = r.spans.len();
            let mut labels = Vec::with_capacity(pairwise_combinations(n));
            for i in 0..n {
                for j in i + 1..n {
                    let pos = r.interacting.contains(&(i, j));
                    let ty = pos.then(|| *INTERACTION_TYPES.choose(rng).expect("non-empty"));
                    labels.push(((i, j), ty));
                }
            }
            XmlSentence { rendered: r, labels }
        })
        .collect();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (si, s) in sentences.iter().enumerate() {
        for (pi, (_, ty)) in s.labels.iter().enumerate() {
            if ty.is_some() {
                positives.push((si, pi));
            } else {
                negatives.push((si, pi));
            }
        }
    }
    let flips = ((positives.len() as f64) * noise).round() as usize;
    let flips = flips.min(negatives.len());
    positives.shuffle(rng);
    negatives.shuffle(rng);
    for k in 0..flips {
        let (si, pi) = positives[k];
        sentences[si].labels[pi].1 = None;
        let (si, pi) = negatives[k];
        sentences[si].labels[pi].1 = Some(INTERACTION_TYPES.choose(rng).expect("non-empty"));
    }
    sentences
}

fn oversize_sentence(lexicon: &[String], rng: &mut impl Rng) -> XmlSentence {
    let n = rng.gen_range(15..=17);
    let plan = SentencePlan { clauses: vec![Clause::Single; n] };
    let rendered = render(&plan, lexicon, rng);
    let mut labels = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            labels.push(((i, j), rng.gen_bool(0.1).then_some("effect")));
        }
    }
    XmlSentence { rendered, labels }
}

fn sparse_sentence(lexicon: &[String], rng: &mut impl Rng) -> XmlSentence {
    let clauses = if rng.gen_bool(0.5) { vec![Clause::Single] } else { Vec::new() };
    let rendered = if clauses.is_empty() {
        RenderedSentence {
            text: "Clinical monitoring is recommended during treatment.".into(),
            spans: Vec::new(),
            interacting: Vec::new(),
        }
    } else {
        render(&SentencePlan { clauses }, lexicon, rng)
    };
    XmlSentence { rendered, labels: Vec::new() }
}

fn write_document(out: &mut String, doc_id: &str, sentences: &[XmlSentence]) {
    let _ = writeln!(out, "<document id=\"{doc_id}\">");
    for (si, s) in sentences.iter().enumerate() {
        let sid = format!("{doc_id}.s{si}");
        let _ = writeln!(out, "  <sentence id=\"{sid}\" text=\"{}\">", escape(&s.rendered.text));
        let chars: Vec<char> = s.rendered.text.chars().collect();
        for (ei, &(a, b)) in s.rendered.spans.iter().enumerate() {
            let surface: String = chars[a..b].iter().collect();
            let _ = writeln!(
                out,
                "    <entity id=\"{sid}.e{ei}\" charOffset=\"{a}-{}\" type=\"drug\" text=\"{}\"/>",
                b - 1,
                escape(&surface)
            );
        }
        for (pi, ((i, j), ty)) in s.labels.iter().enumerate() {
            match ty {
                Some(t) => {
                    let _ = writeln!(
                        out,
                        "    <pair id=\"{sid}.p{pi}\" e1=\"{sid}.e{i}\" e2=\"{sid}.e{j}\" ddi=\"true\" type=\"{t}\"/>"
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "    <pair id=\"{sid}.p{pi}\" e1=\"{sid}.e{i}\" e2=\"{sid}.e{j}\" ddi=\"false\"/>"
                    );
                }
            }
        }
        out.push_str("  </sentence>\n");
    }
    out.push_str("</document>\n");
}

/// Writes one XML file per document below `root` and reports the pair
/// counts the converter should see.
pub fn write_synthetic_corpus(root: &Path, spec: &SynthSpec, seed: u64) -> io::Result<SynthSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lexicon = synthetic_names(600, &mut rng);
    let mut summary = SynthSummary::default();
    let mut doc_counter: std::collections::BTreeMap<String, usize> = Default::default();
    for bucket in &spec.buckets {
        let plans = plans_for(bucket, &mut rng)?;
        let rendered: Vec<RenderedSentence> = plans.iter().map(|p| render(p, &lexicon, &mut rng)).collect();
        let mut sentences = label_sentences(rendered, spec.label_noise, &mut rng);
        summary.kept_pairs += sentences.iter().map(|s| s.labels.len()).sum::<usize>();
        summary.kept_positives += sentences.iter().flat_map(|s| &s.labels).filter(|(_, t)| t.is_some()).count();
        for _ in 0..spec.oversize_sentences {
            let s = oversize_sentence(&lexicon, &mut rng);
            summary.oversize_pairs += s.labels.len();
            sentences.push(s);
        }
        for _ in 0..spec.sparse_sentences {
            sentences.push(sparse_sentence(&lexicon, &mut rng));
        }
        sentences.shuffle(&mut rng);

        let dir = root.join(&bucket.dir);
        fs::create_dir_all(&dir)?;
        for chunk in sentences.chunks(spec.sentences_per_document.max(1)) {
            let k = doc_counter.entry(bucket.doc_prefix.clone()).or_default();
            let doc_id = format!("{}.d{}", bucket.doc_prefix, *k);
            *k += 1;
            let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
            write_document(&mut xml, &doc_id, chunk);
            let path = dir.join(format!("{doc_id}.xml"));
            fs::write(&path, xml)?;
            summary.files.push(path);
            summary.documents += 1;
            summary.sentences += chunk.len();
        }
    }
    Ok(summary)
}
