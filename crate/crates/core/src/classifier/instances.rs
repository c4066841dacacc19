//! Normalized labeled instances and label collapsing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::jsonl;
use crate::pipeline::validate_masked;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub instance_id: String,
    pub masked_text: String,
    /// 1 when an interaction of any type is present.
    pub label: u8,
    pub source: String,
    pub split: Split,
}

/// Interaction-type strings that mean "no interaction".
const NEGATIVE_LABELS: &[&str] = &["none", "false", "negative", "no", "0", ""];

/// Collapses a multi-class interaction type onto detection labels.
pub fn collapse_label(interaction_type: &str) -> u8 {
    let t = interaction_type.trim().to_ascii_lowercase();
    u8::from(!NEGATIVE_LABELS.contains(&t.as_str()))
}

impl LabeledInstance {
    pub fn validate(&self) -> Result<(), String> {
        if self.instance_id.is_empty() {
            return Err("empty instance_id".into());
        }
        if self.label > 1 {
            return Err(format!("label {} is not 0 or 1", self.label));
        }
        validate_masked(&self.masked_text).map_err(|e| e.to_string())
    }
}

pub fn parse_instances<R: BufRead>(reader: R) -> Result<Vec<LabeledInstance>, ClassifierError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ClassifierError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: LabeledInstance = serde_json::from_str(&line)
            .map_err(|e| ClassifierError::Validation { line: line_no, reason: format!("malformed record: {e}") })?;
        inst.validate().map_err(|reason| ClassifierError::Validation { line: line_no, reason })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn load_labeled_instances(path: &Path) -> Result<Vec<LabeledInstance>, ClassifierError> {
    let reader = jsonl::open(path)?;
    parse_instances(reader)
}

pub fn write_instances(path: &Path, instances: &[LabeledInstance]) -> Result<(), ClassifierError> {
    Ok(jsonl::write_all(path, instances)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitCount {
    pub total: usize,
    pub positive: usize,
}

/// Per-split instance and positive counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitSummary {
    pub splits: BTreeMap<Split, SplitCount>,
}

impl SplitSummary {
    pub fn of(instances: &[LabeledInstance]) -> Self {
        let mut splits = BTreeMap::new();
        for inst in instances {
            let c: &mut SplitCount = splits.entry(inst.split).or_default();
            c.total += 1;
            c.positive += usize::from(inst.label);
        }
        Self { splits }
    }

    pub fn count(&self, split: Split) -> usize {
        self.splits.get(&split).map_or(0, |c| c.total)
    }

    pub fn total(&self) -> usize {
        self.splits.values().map(|c| c.total).sum()
    }

    /// Positive fraction over every split.
    pub fn positive_rate(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.splits.values().map(|c| c.positive).sum::<usize>() as f64 / total as f64
    }
}

pub fn by_split(instances: &[LabeledInstance], split: Split) -> Vec<LabeledInstance> {
    instances.iter().filter(|i| i.split == split).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_interaction_types() {
        for t in ["mechanism", "effect", "advise", "int", "Pharmacokinetic"] {
            assert_eq!(collapse_label(t), 1, "{t}");
        }
        for t in ["none", "false", "NONE", " negative "] {
            assert_eq!(collapse_label(t), 0, "{t}");
        }
    }

    #[test]
    fn collapse_is_surjective_over_ddi_vocabulary() {
        let vocab = ["mechanism", "effect", "advise", "int", "false"];
        let labels: std::collections::HashSet<u8> = vocab.iter().map(|t| collapse_label(t)).collect();
        assert_eq!(labels.len(), 2);
    }

    #[test]
    fn parses_and_validates() {
        let good = r#"{"instance_id":"i1","masked_text":"[Arg1] inhibits [Arg2].","label":1,"source":"ddi2013-drugbank","split":"train"}"#;
        let insts = parse_instances(good.as_bytes()).unwrap();
        assert_eq!(insts[0].split, Split::Train);
        assert_eq!(insts[0].label, 1);

        let no_arg2 =
            r#"{"instance_id":"i1","masked_text":"[Arg1] inhibits it.","label":1,"source":"s","split":"dev"}"#;
        let err = parse_instances(format!("{good}\n{no_arg2}").as_bytes()).unwrap_err();
        assert!(matches!(err, ClassifierError::Validation { line: 2, .. }), "{err}");

        let bad_label = r#"{"instance_id":"i1","masked_text":"[Arg1] [Arg2]","label":2,"source":"s","split":"dev"}"#;
        assert!(parse_instances(bad_label.as_bytes()).is_err());
        assert!(matches!(parse_instances("{oops".as_bytes()), Err(ClassifierError::Validation { line: 1, .. })));
    }

    #[test]
    fn summary_counts() {
        let mk = |id: &str, label, split| LabeledInstance {
            instance_id: id.into(),
            masked_text: "[Arg1] [Arg2]".into(),
            label,
            source: "s".into(),
            split,
        };
        let s = SplitSummary::of(&[
            mk("a", 1, Split::Train),
            mk("b", 0, Split::Train),
            mk("c", 0, Split::Test),
            mk("d", 1, Split::Dev),
        ]);
        assert_eq!(s.count(Split::Train), 2);
        assert_eq!(s.count(Split::Test), 1);
        assert!((s.positive_rate() - 0.5).abs() < 1e-12);
    }
}
