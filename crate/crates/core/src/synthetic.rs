//! Synthetic pair corpora whose labels depend only on the execution feature.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CodeFragment, CorpusManifest, FragmentKind, PairExample};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainConfig;
use crate::outfeature::{FeatureMap, OutputFeature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_pairs: usize,
    /// Exact share of label-1 pairs (rounded to the nearest count).
    pub positive_fraction: f64,
    /// Distinct identifier words used to fill fragments.
    pub words: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_pairs: 400,
            positive_fraction: 0.4,
            words: 40,
            min_tokens: 4,
            max_tokens: 20,
            seed: 0,
        }
    }
}

/// Builds `num_pairs` pairs of random-token fragments. Pair `k` is a clone
/// exactly when its feature exceeds 0.5: positives draw the feature from
/// `(0.5, 1]`, negatives from `[0, 0.5]`. Token content carries no signal.
pub fn synthetic_corpus(spec: &SyntheticSpec) -> Result<(CorpusManifest, FeatureMap)> {
    if spec.num_pairs == 0 || spec.words == 0 || spec.min_tokens == 0 || spec.min_tokens > spec.max_tokens {
        return Err(Error::Config(format!("invalid synthetic spec {spec:?}")));
    }
    if !(0.0..=1.0).contains(&spec.positive_fraction) {
        return Err(Error::Config("positive_fraction must lie in [0,1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_pos = (spec.num_pairs as f64 * spec.positive_fraction).round() as usize;
    let mut labels: Vec<u8> = (0..spec.num_pairs).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);

    let len_dist = Uniform::new_inclusive(spec.min_tokens, spec.max_tokens);
    let word_dist = Uniform::new(0, spec.words);
    let fragment = |id: String, kind: FragmentKind, rng: &mut ChaCha8Rng| {
        let n = len_dist.sample(rng);
        let source = (0..n)
            .map(|_| format!("w{}", word_dist.sample(rng)))
            .collect::<Vec<_>>()
            .join(" ");
        CodeFragment {
            path: id.clone().into(),
            id,
            source,
            task: "synthetic".into(),
            kind,
        }
    };

    let mut fragments = Vec::with_capacity(2 * spec.num_pairs);
    let mut pairs = Vec::with_capacity(spec.num_pairs);
    let mut features = FeatureMap::new();
    for (k, &label) in labels.iter().enumerate() {
        let kind_b = if label == 1 {
            FragmentKind::Plagiarized
        } else {
            FragmentKind::NonPlagiarized
        };
        let a = fragment(format!("pair{k:04}/a"), FragmentKind::Original, &mut rng);
        let b = fragment(format!("pair{k:04}/b"), kind_b, &mut rng);
        let value: f64 = if label == 1 {
            1.0 - rng.gen::<f64>() * 0.5
        } else {
            rng.gen::<f64>() * 0.5
        };
        let pair = PairExample::new(a.id.clone(), b.id.clone(), label);
        features.insert(
            pair.key(),
            OutputFeature {
                value: vec![value],
                available: true,
            },
        );
        fragments.push(a);
        fragments.push(b);
        pairs.push(pair);
    }
    Ok((CorpusManifest::new(fragments, pairs)?, features))
}

/// Encoder sized for the synthetic task.
pub fn synthetic_model_config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        hidden_size: 16,
        num_layers: 1,
        num_heads: 2,
        ffn_size: 32,
        max_len: 48,
        feature_dim: 1,
        dropout_p: 0.1,
        ..Default::default()
    }
}

/// Optimizer settings for the synthetic task.
pub fn synthetic_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 20,
        batch_size: 16,
        learning_rate: 0.02,
        num_runs: 10,
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_feature_threshold() {
        let (m, f) = synthetic_corpus(&SyntheticSpec {
            num_pairs: 50,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(m.pairs.len(), 50);
        assert_eq!(m.pairs.iter().filter(|p| p.label == 1).count(), 20);
        for p in &m.pairs {
            let v = f[&p.key()].value[0];
            assert_eq!(p.label == 1, v > 0.5, "{} -> {v}", p.key());
        }
    }
}
