//! Seeded workloads shared by the benchmarks in `benches/`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdi_core::catalog::{AgentEntity, AgentKind, Catalog, Cui};
use sdi_core::classifier::{LabeledInstance, Split};
use sdi_core::corpus::{PaperMeta, PaperRecord, StudyFlags};
use sdi_core::evidence::{AdmittedEvidence, EvidenceItem, EvidenceSpan, InteractionId};
use sdi_core::synth::{synthetic_names, INTERACTION_TEMPLATES, NEUTRAL_TEMPLATES, SINGLE_TEMPLATES};

pub struct Workload {
    pub catalog: Catalog,
    pub names: Vec<String>,
    pub papers: Vec<PaperRecord>,
}

/// A catalog of `agents` entities (every third a supplement) and
/// `papers` abstracts of eight template sentences each.
pub fn workload(agents: usize, papers: usize, seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = synthetic_names(agents, &mut rng);
    let entities = names
        .iter()
        .enumerate()
        .map(|(i, name)| AgentEntity {
            cui: Cui::new(format!("C{:07}", 1_000_000 + i)).unwrap(),
            name: name.clone(),
            synonyms: vec![format!("{name} extract")],
            trade_names: Vec::new(),
            kind: if i % 3 == 0 { AgentKind::Supplement } else { AgentKind::Drug },
            definition: None,
        })
        .collect();
    let catalog = Catalog::from_parts(entities, &[]).unwrap();
    let papers = (0..papers)
        .map(|p| {
            let text: Vec<String> = (0..8).map(|_| sentence(&names, &mut rng)).collect();
            PaperRecord {
                paper_id: format!("b{p:05}"),
                title: format!("Study {p}"),
                r#abstract: text.join(" "),
                authors: vec!["Author B".into()],
                venue: "Bench J".into(),
                year: Some(2000 + (p % 20) as i32),
                mesh: vec!["Humans".into()],
                pub_types: Vec::new(),
            }
        })
        .collect();
    Workload { catalog, names, papers }
}

fn fill(template: &str, a: &str, b: &str) -> String {
    template.replace("{A}", a).replace("{B}", b)
}

fn sentence(names: &[String], rng: &mut impl Rng) -> String {
    let a = names.choose(rng).unwrap();
    let b = names.choose(rng).unwrap();
    let t = match rng.gen_range(0..3) {
        0 => INTERACTION_TEMPLATES.choose(rng).unwrap(),
        1 => NEUTRAL_TEMPLATES.choose(rng).unwrap(),
        _ => SINGLE_TEMPLATES.choose(rng).unwrap(),
    };
    let mut s = fill(t, a, b);
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

/// Labeled masked instances drawn from the interaction/neutral templates.
pub fn instances(n: usize, seed: u64) -> Vec<LabeledInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let positive = rng.gen_bool(0.2);
            let pool = if positive { INTERACTION_TEMPLATES } else { NEUTRAL_TEMPLATES };
            let split = match i % 10 {
                0 => Split::Dev,
                1 => Split::Test,
                _ => Split::Train,
            };
            LabeledInstance {
                instance_id: format!("i{i}"),
                masked_text: fill(pool.choose(&mut rng).unwrap(), "[Arg1]", "[Arg2]"),
                label: u8::from(positive),
                source: "bench".into(),
                split,
            }
        })
        .collect()
}

/// `n` evidence items for one interaction with random study metadata.
pub fn evidence_items(n: usize, seed: u64) -> Vec<EvidenceItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cui = |s: &str| Cui::new(s).unwrap();
    let id = InteractionId::parse("C1000000-C1000001").unwrap();
    (0..n)
        .map(|i| {
            let paper_id = format!("p{}", rng.gen_range(0..n.max(1)));
            let flags = StudyFlags {
                retracted: rng.gen_bool(0.05),
                clinical_trial: rng.gen_bool(0.3),
                case_report: rng.gen_bool(0.1),
                human: rng.gen_bool(0.6),
                animal: rng.gen_bool(0.2),
            };
            let year = rng.gen_bool(0.9).then(|| rng.gen_range(1990..2020));
            EvidenceItem {
                evidence: AdmittedEvidence {
                    paper_id: paper_id.clone(),
                    sentence_index: i % 12,
                    text: format!("sentence {i}"),
                    interaction_id: id.clone(),
                    arg1: EvidenceSpan {
                        start: 0,
                        end: 4,
                        surface: "a".into(),
                        cui: cui("C1000000"),
                        canonical: cui("C1000000"),
                    },
                    arg2: EvidenceSpan {
                        start: 8,
                        end: 12,
                        surface: "b".into(),
                        cui: cui("C1000001"),
                        canonical: cui("C1000001"),
                    },
                    score: rng.gen_range(0.5..1.0),
                },
                paper: PaperMeta {
                    paper_id,
                    title: String::new(),
                    authors: Vec::new(),
                    venue: String::new(),
                    year,
                    flags,
                },
            }
        })
        .collect()
}
