//! Built-in baseline detector: logistic regression over hashed features,
//! trained with per-feature adaptive SGD and early stopping on dev F1.
//!
//! Training sorts its input by instance id before anything else, so the
//! learned weights depend only on the instance set and the seed.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureHasher, DEFAULT_HASH_BITS, DEFAULT_HASH_SEED};
use super::metrics::DetectionMetrics;
use super::{ClassifierError, LabeledInstance, Scorer, ScorerError};
use crate::pipeline::validate_masked;

pub const MODEL_FORMAT: &str = "sdi-baseline/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub threshold: f64,
    pub hash_bits: u32,
    pub hash_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 13,
            max_epochs: 25,
            patience: 4,
            learning_rate: 0.2,
            l2: 1e-6,
            threshold: 0.5,
            hash_bits: DEFAULT_HASH_BITS,
            hash_seed: DEFAULT_HASH_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    hasher: FeatureHasher,
    weights: Vec<f64>,
    bias: f64,
    pub threshold: f64,
    /// Dev F1 of the selected epoch, when a dev set was given.
    pub dev_f1: Option<f64>,
    /// Epoch whose weights were kept.
    pub epochs: usize,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    format: String,
    hash_bits: u32,
    hash_seed: u64,
    bias: f64,
    threshold: f64,
    dev_f1: Option<f64>,
    epochs: usize,
    weights: Vec<(u32, f64)>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl BaselineModel {
    fn logit(&self, features: &[u32]) -> f64 {
        self.bias + features.iter().map(|&f| self.weights[f as usize]).sum::<f64>()
    }

    /// Probability that the masked sentence states an interaction.
    pub fn score_text(&self, masked: &str) -> Result<f64, ScorerError> {
        validate_masked(masked).map_err(|e| ScorerError::InvalidInput(e.to_string()))?;
        Ok(sigmoid(self.logit(&self.hasher.features(masked))))
    }

    pub fn predict(&self, masked: &str) -> Result<bool, ScorerError> {
        Ok(self.score_text(masked)? >= self.threshold)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let weights =
            self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(i, w)| (i as u32, *w)).collect();
        let stored = StoredModel {
            format: MODEL_FORMAT.to_string(),
            hash_bits: self.hasher.bits(),
            hash_seed: self.hasher.seed(),
            bias: self.bias,
            threshold: self.threshold,
            dev_f1: self.dev_f1,
            epochs: self.epochs,
            weights,
        };
        let json = serde_json::to_string(&stored).map_err(|e| ClassifierError::Model(e.to_string()))?;
        fs::write(path, json).map_err(|e| ClassifierError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let text = fs::read_to_string(path).map_err(|e| ClassifierError::Io(format!("{}: {e}", path.display())))?;
        let stored: StoredModel = serde_json::from_str(&text).map_err(|e| ClassifierError::Model(e.to_string()))?;
        if stored.format != MODEL_FORMAT {
            return Err(ClassifierError::Model(format!("unsupported model format {:?}", stored.format)));
        }
        if !(1..=30).contains(&stored.hash_bits) {
            return Err(ClassifierError::Model(format!("hash_bits {} out of range", stored.hash_bits)));
        }
        let hasher = FeatureHasher::new(stored.hash_bits, stored.hash_seed);
        let mut weights = vec![0.0; hasher.dim()];
        for (i, w) in stored.weights {
            let slot = weights
                .get_mut(i as usize)
                .ok_or_else(|| ClassifierError::Model(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        Ok(Self {
            hasher,
            weights,
            bias: stored.bias,
            threshold: stored.threshold,
            dev_f1: stored.dev_f1,
            epochs: stored.epochs,
        })
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

impl Scorer for BaselineModel {
    fn score_batch(&mut self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        texts.iter().map(|t| self.score_text(t)).collect()
    }
}

struct Encoded {
    features: Vec<u32>,
    label: f64,
}

fn dev_f1(model: &BaselineModel, dev: &[Encoded]) -> f64 {
    let gold: Vec<u8> = dev.iter().map(|e| e.label as u8).collect();
    let predicted: Vec<bool> = dev.iter().map(|e| sigmoid(model.logit(&e.features)) >= model.threshold).collect();
    DetectionMetrics::from_predictions(&gold, &predicted).f1
}

fn encode(hasher: &FeatureHasher, instances: &[LabeledInstance]) -> Result<Vec<Encoded>, ClassifierError> {
    let mut sorted: Vec<&LabeledInstance> = instances.iter().collect();
    sorted.sort_by(|a, b| (&a.instance_id, &a.masked_text, a.label).cmp(&(&b.instance_id, &b.masked_text, b.label)));
    sorted
        .into_iter()
        .map(|inst| {
            validate_masked(&inst.masked_text)
                .map_err(|e| ClassifierError::Training(format!("{}: {e}", inst.instance_id)))?;
            Ok(Encoded { features: hasher.features(&inst.masked_text), label: f64::from(inst.label) })
        })
        .collect()
}

pub fn train_baseline(
    train: &[LabeledInstance],
    dev: &[LabeledInstance],
    config: &TrainConfig,
) -> Result<BaselineModel, ClassifierError> {
    if train.is_empty() {
        return Err(ClassifierError::Training("empty training set".into()));
    }
    let positives = train.iter().filter(|i| i.label == 1).count();
    if positives == 0 || positives == train.len() {
        return Err(ClassifierError::Training("training data must contain both classes".into()));
    }
    if config.max_epochs == 0 {
        return Err(ClassifierError::Training("max_epochs must be positive".into()));
    }
    let hasher = FeatureHasher::new(config.hash_bits, config.hash_seed);
    let train = encode(&hasher, train)?;
    let dev = encode(&hasher, dev)?;

    let mut model = BaselineModel {
        hasher,
        weights: vec![0.0; hasher.dim()],
        bias: 0.0,
        threshold: config.threshold,
        dev_f1: None,
        epochs: 0,
    };
    let mut grad_sq = vec![0.0f64; hasher.dim()];
    let mut bias_sq = 0.0f64;
    let mut best: Option<(f64, Vec<f64>, f64, usize)> = None;
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    const EPS: f64 = 1e-8;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let ex = &train[idx];
            let g = sigmoid(model.logit(&ex.features)) - ex.label;
            for &f in &ex.features {
                let f = f as usize;
                let grad = g + config.l2 * model.weights[f];
                grad_sq[f] += grad * grad;
                model.weights[f] -= config.learning_rate * grad / (grad_sq[f].sqrt() + EPS);
            }
            bias_sq += g * g;
            model.bias -= config.learning_rate * g / (bias_sq.sqrt() + EPS);
        }
        model.epochs = epoch;
        if dev.is_empty() {
            continue;
        }
        let f1 = dev_f1(&model, &dev);
        if best.as_ref().is_none_or(|(b, ..)| f1 > *b) {
            best = Some((f1, model.weights.clone(), model.bias, epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    if let Some((f1, weights, bias, epoch)) = best {
        model.weights = weights;
        model.bias = bias;
        model.epochs = epoch;
        model.dev_f1 = Some(f1);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Split;

    /// Positives say "increases ... of"; negatives say "and ... were compared".
    pub(crate) fn separable(n: usize, split: Split) -> Vec<LabeledInstance> {
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let masked_text = if label == 1 {
                    format!("[Arg1] increases the plasma concentration of [Arg2] in study {i}.")
                } else {
                    format!("[Arg1] and [Arg2] were compared in study {i}.")
                };
                LabeledInstance {
                    instance_id: format!("{split}-{i:03}"),
                    masked_text,
                    label,
                    source: "fixture".into(),
                    split,
                }
            })
            .collect()
    }

    #[test]
    fn separable_fixture_reaches_perfect_dev_f1() {
        let train = separable(40, Split::Train);
        let dev = separable(10, Split::Dev);
        let model = train_baseline(&train, &dev, &TrainConfig::default()).unwrap();
        assert_eq!(model.dev_f1, Some(1.0));
        let pos = &train.iter().find(|i| i.label == 1).unwrap().masked_text;
        assert!(model.score_text(pos).unwrap() > 0.5);
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let train = separable(40, Split::Train);
        let dev = separable(10, Split::Dev);
        let cfg = TrainConfig::default();
        let a = train_baseline(&train, &dev, &cfg).unwrap();
        let b = train_baseline(&train, &dev, &cfg).unwrap();
        assert_eq!(a, b);
        let mut shuffled = train.clone();
        shuffled.reverse();
        shuffled.swap(0, 7);
        assert_eq!(train_baseline(&shuffled, &dev, &cfg).unwrap(), a);
    }

    #[test]
    fn training_errors() {
        let cfg = TrainConfig::default();
        assert!(matches!(train_baseline(&[], &[], &cfg), Err(ClassifierError::Training(_))));
        let one_class: Vec<_> = separable(10, Split::Train).into_iter().filter(|i| i.label == 1).collect();
        assert!(matches!(train_baseline(&one_class, &[], &cfg), Err(ClassifierError::Training(_))));
    }

    #[test]
    fn batch_scores_match_single_and_ignore_order() {
        let train = separable(40, Split::Train);
        let mut model = train_baseline(&train, &[], &TrainConfig::default()).unwrap();
        assert_eq!(model.dev_f1, None);
        let texts: Vec<String> = train.iter().take(6).map(|i| i.masked_text.clone()).collect();
        let scores = model.score_batch(&texts).unwrap();
        let mut rev = texts.clone();
        rev.reverse();
        let mut rev_scores = model.score_batch(&rev).unwrap();
        rev_scores.reverse();
        assert_eq!(scores, rev_scores);
        assert!(matches!(model.score_text("no placeholders"), Err(ScorerError::InvalidInput(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let train = separable(40, Split::Train);
        let model = train_baseline(&train, &[], &TrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = BaselineModel::load(&path).unwrap();
        assert_eq!(loaded, model);
    }
}
