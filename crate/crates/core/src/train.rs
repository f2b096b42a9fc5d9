//! Mini-batch Adam training with validation-based epoch selection, and the
//! multi-run experiment protocol.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codeparse::{encode_pair, lex_manifest, EncodedPair, TokenSequence, Vocabulary};
use crate::corpus::{split_pairs, CorpusManifest, PairExample, SplitSpec};
use crate::error::{Error, Result};
use crate::evalx::{compute_metrics, Metrics, ScoredPair};
use crate::model::{backward_into, cross_entropy, forward, DropoutMask, Mode, ModelConfig, Parameters};
use crate::outfeature::{attach_features, FeatureMap, DEFAULT_FALLBACK};
use crate::scalar::Scalar;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled (AdamW-style) weight decay.
    pub weight_decay: f64,
    pub seed: u64,
    pub num_runs: usize,
    /// When false every pair is fed `fallback_feature` instead of its own feature.
    pub use_feature: bool,
    pub fallback_feature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            seed: 0,
            num_runs: 10,
            use_feature: true,
            fallback_feature: DEFAULT_FALLBACK,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.num_runs == 0 {
            return fail("num_runs must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return fail("adam betas must lie in [0,1) and eps must be positive");
        }
        if self.weight_decay < 0.0 {
            return fail("weight_decay must be non-negative");
        }
        Ok(())
    }
}

/// One model input with its execution feature and gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub encoded: EncodedPair,
    pub feature: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleSplits {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

/// Encodes pairs using pre-lexed fragments keyed by id.
pub fn prepare_examples(
    pairs: &[PairExample],
    tokens: &HashMap<String, TokenSequence>,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<Example>> {
    pairs
        .iter()
        .map(|p| {
            let get = |id: &String| tokens.get(id).ok_or_else(|| Error::UnknownFragment(id.clone()));
            Ok(Example {
                encoded: encode_pair(get(&p.id_a)?, get(&p.id_b)?, vocab, max_len)?,
                feature: p.out_feature.clone(),
                label: p.label,
            })
        })
        .collect()
}

/// Adam with bias correction; moments are kept flat in canonical parameter order.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
}

impl<S: Scalar> Adam<S> {
    pub fn new(params: &Parameters<S>) -> Self {
        let n = params.num_scalars();
        Adam {
            m: vec![S::zero(); n],
            v: vec![S::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut Parameters<S>, grads: &Parameters<S>, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (S::of(cfg.beta1), S::of(cfg.beta2));
        let lr = S::of(cfg.learning_rate);
        let eps = S::of(cfg.eps);
        let wd = S::of(cfg.weight_decay);
        let c1 = S::one() - b1.powi(self.t);
        let c2 = S::one() - b2.powi(self.t);
        let g = grads.flatten();
        let (m, v) = (&mut self.m, &mut self.v);
        let mut i = 0;
        params.for_each_mut(|_, t| {
            for w in &mut t.data {
                m[i] = b1 * m[i] + (S::one() - b1) * g[i];
                v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *w -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *w);
                i += 1;
            }
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` when no training happened.
    pub selected_epoch: Option<usize>,
    pub test: Option<Metrics>,
}

pub struct TrainOutput<S> {
    pub params: Parameters<S>,
    pub history: RunHistory,
}

fn feature_for<'a>(ex: &'a Example, cfg: &TrainConfig, ablated: &'a [f64]) -> &'a [f64] {
    if cfg.use_feature {
        &ex.feature
    } else {
        ablated
    }
}

/// Eval-mode clone probabilities, in input order.
pub fn evaluate<S: Scalar>(
    params: &Parameters<S>,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    examples: &[Example],
) -> Result<Vec<ScoredPair>> {
    let ablated = vec![train_cfg.fallback_feature; model_cfg.feature_dim];
    examples
        .par_iter()
        .map(|ex| {
            let out = forward(params, model_cfg, &ex.encoded, feature_for(ex, train_cfg, &ablated), Mode::Eval, false)?;
            Ok(ScoredPair {
                prob: out.prob.as_f64(),
                label: ex.label,
            })
        })
        .collect()
}

/// Trains from `model_cfg.seed` initial weights and returns the parameters of
/// the epoch with the best validation f-measure (earliest on ties). Without a
/// validation split the epoch with the lowest training loss is kept instead.
pub fn train_model<S: Scalar>(
    splits: &ExampleSplits,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutput<S>> {
    train_cfg.validate()?;
    model_cfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::Training("training split is empty".into()));
    }
    let ablated = vec![train_cfg.fallback_feature; model_cfg.feature_dim];
    let mut params: Parameters<S> = Parameters::init(model_cfg)?;
    let mut adam = Adam::new(&params);
    let mut best: Option<(usize, f64, Parameters<S>)> = None;
    let mut records = Vec::with_capacity(train_cfg.epochs);
    let mut order: Vec<usize> = (0..splits.train.len()).collect();

    for epoch in 1..=train_cfg.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(train_cfg.seed, "shuffle", epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);
        let dropout_base = derive_seed(train_cfg.seed, "dropout", epoch as u64);

        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(train_cfg.batch_size).enumerate() {
            let per_example: Vec<(S, Parameters<S>)> = batch
                .par_iter()
                .enumerate()
                .map(|(j, &idx)| {
                    let ex = &splits.train[idx];
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        dropout_base,
                        "example",
                        (b * train_cfg.batch_size + j) as u64,
                    ));
                    let mask = DropoutMask::sample(&mut rng, 2 * model_cfg.hidden_size, model_cfg.dropout_p);
                    let out = forward(
                        &params,
                        model_cfg,
                        &ex.encoded,
                        feature_for(ex, train_cfg, &ablated),
                        Mode::Train(&mask),
                        true,
                    )?;
                    let loss = cross_entropy(&out.logits, ex.label)?;
                    let trace = out.trace.as_ref().expect("trace requested");
                    let mut g = params.zeros_like();
                    backward_into(&params, model_cfg, trace, ex.label, &mut g)?;
                    Ok((loss, g))
                })
                .collect::<Result<_>>()?;

            // Fixed-order reduction keeps updates bit-reproducible.
            let mut grad = params.zeros_like();
            for (loss, g) in &per_example {
                if !loss.is_finite() {
                    return Err(Error::Training(format!("non-finite loss at epoch {epoch}, batch {b}")));
                }
                loss_sum += loss.as_f64();
                grad.add_assign(g);
            }
            grad.scale(S::one() / S::of(batch.len() as f64));
            adam.step(&mut params, &grad, train_cfg);
            if !params.all_finite() {
                return Err(Error::Training(format!("parameters diverged at epoch {epoch}, batch {b}")));
            }
        }
        let train_loss = loss_sum / splits.train.len() as f64;

        let val = if splits.val.is_empty() {
            None
        } else {
            Some(compute_metrics(&evaluate(&params, model_cfg, train_cfg, &splits.val)?)?)
        };
        let better = match (&best, &val) {
            (None, _) => true,
            (Some((_, score, _)), Some(m)) => m.f_measure > *score,
            (Some((_, score, _)), None) => -train_loss > *score,
        };
        if better {
            let score = val.map_or(-train_loss, |m| m.f_measure);
            best = Some((epoch, score, params.clone()));
        }
        records.push(EpochRecord {
            epoch,
            train_loss,
            val,
        });
    }

    let (selected_epoch, params) = match best {
        Some((e, _, p)) => (Some(e), p),
        None => (None, params),
    };
    let test = if splits.test.is_empty() {
        None
    } else {
        Some(compute_metrics(&evaluate(&params, model_cfg, train_cfg, &splits.test)?)?)
    };
    Ok(TrainOutput {
        params,
        history: RunHistory {
            epochs: records,
            selected_epoch,
            test,
        },
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricSummary,
    /// Population standard deviation across runs.
    pub std: MetricSummary,
}

/// Arithmetic mean and population standard deviation of each metric.
pub fn aggregate(metrics: &[Metrics]) -> Result<Aggregate> {
    if metrics.is_empty() {
        return Err(Error::Empty("no runs to aggregate".into()));
    }
    let n = metrics.len() as f64;
    let stat = |get: fn(&Metrics) -> f64| {
        let mean = metrics.iter().map(get).sum::<f64>() / n;
        let var = metrics.iter().map(|m| (get(m) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (pm, ps) = stat(|m| m.precision);
    let (rm, rs) = stat(|m| m.recall);
    let (fm, fs) = stat(|m| m.f_measure);
    Ok(Aggregate {
        mean: MetricSummary {
            precision: pm,
            recall: rm,
            f_measure: fm,
        },
        std: MetricSummary {
            precision: ps,
            recall: rs,
            f_measure: fs,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub split_sizes: [usize; 3],
    pub history: RunHistory,
    pub test: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
}

pub struct ExperimentOutcome<S> {
    pub result: ExperimentResult,
    /// Selected parameters of each run, in run order.
    pub params: Vec<Parameters<S>>,
}

/// Runs `train_cfg.num_runs` independent trainings. Run `i` reseeds the split,
/// the initialization, the shuffling and the dropout masks with `base_seed + i`.
pub fn run_experiment<S: Scalar>(
    manifest: &CorpusManifest,
    features: &FeatureMap,
    vocab: &Vocabulary,
    split: &SplitSpec,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    base_seed: u64,
) -> Result<ExperimentOutcome<S>> {
    train_cfg.validate()?;
    model_cfg.validate()?;
    split.validate()?;
    if vocab.len() > model_cfg.vocab_size {
        return Err(Error::Config(format!(
            "vocabulary has {} entries but model vocab_size is {}",
            vocab.len(),
            model_cfg.vocab_size
        )));
    }
    let streams = lex_manifest(manifest)?;
    let tokens: HashMap<String, TokenSequence> = manifest
        .fragments
        .iter()
        .map(|f| f.id.clone())
        .zip(streams)
        .collect();
    let mut pairs = manifest.pairs.clone();
    attach_features(&mut pairs, features, model_cfg.feature_dim, train_cfg.fallback_feature);

    let runs: Vec<(RunResult, Parameters<S>)> = (0..train_cfg.num_runs)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let split_i = SplitSpec { seed, ..*split };
            let s = split_pairs(&pairs, &split_i)?;
            let examples = ExampleSplits {
                train: prepare_examples(&s.train, &tokens, vocab, model_cfg.max_len)?,
                val: prepare_examples(&s.val, &tokens, vocab, model_cfg.max_len)?,
                test: prepare_examples(&s.test, &tokens, vocab, model_cfg.max_len)?,
            };
            let mcfg = ModelConfig {
                seed,
                ..model_cfg.clone()
            };
            let tcfg = TrainConfig {
                seed,
                ..train_cfg.clone()
            };
            let out = train_model::<S>(&examples, &mcfg, &tcfg)?;
            let test = out
                .history
                .test
                .ok_or_else(|| Error::Split("test split is empty".into()))?;
            Ok((
                RunResult {
                    run: i,
                    seed,
                    split_sizes: [s.train.len(), s.val.len(), s.test.len()],
                    history: out.history,
                    test,
                },
                out.params,
            ))
        })
        .collect::<Result<_>>()?;

    let (runs, params): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let metrics: Vec<Metrics> = runs.iter().map(|r| r.test).collect();
    Ok(ExperimentOutcome {
        result: ExperimentResult {
            aggregate: aggregate(&metrics)?,
            runs,
        },
        params,
    })
}
