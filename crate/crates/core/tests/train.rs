use std::collections::HashMap;

use clonefuse::codeparse::{build_vocab, lex_manifest, TokenSequence};
use clonefuse::corpus::{split_pairs, CorpusManifest, SplitSpec};
use clonefuse::model::{ModelConfig, Parameters};
use clonefuse::outfeature::attach_features;
use clonefuse::synthetic::*;
use clonefuse::train::*;

fn synthetic_splits(num_pairs: usize, seed: u64) -> (ExampleSplits, ModelConfig, TrainConfig) {
    let (m, feats) = synthetic_corpus(&SyntheticSpec {
        num_pairs,
        ..Default::default()
    })
    .unwrap();
    let vocab = build_vocab(&m, 1024).unwrap();
    let mcfg = ModelConfig {
        seed,
        ..synthetic_model_config(vocab.len())
    };
    let tcfg = TrainConfig {
        seed,
        ..synthetic_train_config()
    };
    let tokens = tokens_by_id(&m);
    let mut pairs = m.pairs.clone();
    attach_features(&mut pairs, &feats, 1, 0.5);
    let s = split_pairs(&pairs, &SplitSpec { seed, ..Default::default() }).unwrap();
    let prep = |p| prepare_examples(p, &tokens, &vocab, mcfg.max_len).unwrap();
    let splits = ExampleSplits {
        train: prep(&s.train),
        val: prep(&s.val),
        test: prep(&s.test),
    };
    (splits, mcfg, tcfg)
}

fn tokens_by_id(m: &CorpusManifest) -> HashMap<String, TokenSequence> {
    m.fragments.iter().map(|f| f.id.clone()).zip(lex_manifest(m).unwrap()).collect()
}

#[test]
fn zero_epochs_returns_initial_parameters() {
    let (splits, mcfg, tcfg) = synthetic_splits(40, 1);
    let out = train_model::<f64>(&splits, &mcfg, &TrainConfig { epochs: 0, ..tcfg }).unwrap();
    assert_eq!(out.params, Parameters::init(&mcfg).unwrap());
    assert!(out.history.epochs.is_empty());
    assert_eq!(out.history.selected_epoch, None);
}

#[test]
fn training_is_deterministic() {
    let (splits, mcfg, tcfg) = synthetic_splits(60, 2);
    let tcfg = TrainConfig { epochs: 3, ..tcfg };
    let a = train_model::<f64>(&splits, &mcfg, &tcfg).unwrap();
    let b = train_model::<f64>(&splits, &mcfg, &tcfg).unwrap();
    assert_eq!(a.history, b.history);
    let bits = |p: &Parameters<f64>| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.params), bits(&b.params));
}

#[test]
fn feature_path_fits_separable_task() {
    let (splits, mcfg, tcfg) = synthetic_splits(400, 0);
    assert_eq!(tcfg.epochs, 20);
    let out = train_model::<f64>(&splits, &mcfg, &tcfg).unwrap();
    let last = out.history.epochs.last().unwrap();
    assert!(last.train_loss < 0.1, "train loss {}", last.train_loss);
}

#[test]
fn selected_epoch_has_best_validation_f() {
    let (splits, mcfg, tcfg) = synthetic_splits(120, 3);
    let out = train_model::<f64>(&splits, &mcfg, &TrainConfig { epochs: 6, ..tcfg }).unwrap();
    let fs: Vec<f64> = out.history.epochs.iter().map(|e| e.val.unwrap().f_measure).collect();
    let best = fs.iter().cloned().fold(f64::MIN, f64::max);
    let first_best = fs.iter().position(|&f| f == best).unwrap() + 1;
    assert_eq!(out.history.selected_epoch, Some(first_best));
    let test = compute_test(&out.params, &mcfg, &tcfg, &splits);
    assert_eq!(out.history.test.unwrap(), test);
}

fn compute_test(p: &Parameters<f64>, mcfg: &ModelConfig, tcfg: &TrainConfig, s: &ExampleSplits) -> clonefuse::evalx::Metrics {
    clonefuse::evalx::compute_metrics(&evaluate(p, mcfg, tcfg, &s.test).unwrap()).unwrap()
}

#[test]
fn ablation_ignores_pair_features() {
    let (mut splits, mcfg, tcfg) = synthetic_splits(40, 4);
    let tcfg = TrainConfig {
        use_feature: false,
        epochs: 2,
        ..tcfg
    };
    let a = train_model::<f64>(&splits, &mcfg, &tcfg).unwrap();
    for ex in splits.train.iter_mut().chain(&mut splits.val).chain(&mut splits.test) {
        ex.feature = vec![1.0 - ex.feature[0]];
    }
    let b = train_model::<f64>(&splits, &mcfg, &tcfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.params.num_scalars(), Parameters::<f64>::init(&mcfg).unwrap().num_scalars());
}

#[test]
fn single_run_has_zero_spread() {
    let (m, feats) = synthetic_corpus(&SyntheticSpec {
        num_pairs: 40,
        ..Default::default()
    })
    .unwrap();
    let vocab = build_vocab(&m, 1024).unwrap();
    let tcfg = TrainConfig {
        num_runs: 1,
        epochs: 2,
        ..synthetic_train_config()
    };
    let out = run_experiment::<f64>(&m, &feats, &vocab, &SplitSpec::default(), &synthetic_model_config(vocab.len()), &tcfg, 9).unwrap();
    let r = &out.result;
    assert_eq!(r.runs.len(), 1);
    assert_eq!(r.runs[0].seed, 9);
    assert_eq!(r.runs[0].split_sizes, [28, 6, 6]);
    assert_eq!(r.aggregate.mean.f_measure, r.runs[0].test.f_measure);
    assert_eq!(r.aggregate.std.f_measure, 0.0);
    assert_eq!(r.aggregate.std.precision, 0.0);
}

#[test]
fn vocabulary_larger_than_model_is_rejected() {
    let (m, feats) = synthetic_corpus(&SyntheticSpec {
        num_pairs: 10,
        ..Default::default()
    })
    .unwrap();
    let vocab = build_vocab(&m, 1024).unwrap();
    let res = run_experiment::<f64>(&m, &feats, &vocab, &SplitSpec::default(), &synthetic_model_config(5), &synthetic_train_config(), 0);
    assert!(res.is_err());
}
