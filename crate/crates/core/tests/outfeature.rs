use std::path::{Path, PathBuf};
use std::time::Instant;

use clonefuse::corpus::{CodeFragment, CorpusManifest, FragmentKind, PairExample};
use clonefuse::outfeature::*;
use proptest::prelude::*;

fn fragment(id: &str, path: PathBuf) -> CodeFragment {
    CodeFragment {
        id: id.into(),
        path,
        source: "int x;".into(),
        task: "t".into(),
        kind: FragmentKind::Original,
    }
}

fn script(dir: &Path, name: &str, body: &str) -> CodeFragment {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    fragment(name, path)
}

fn two_fragment_manifest() -> (CorpusManifest, PairExample) {
    let frags = vec![fragment("a", "a".into()), fragment("b", "b".into())];
    let pair = PairExample::new("a", "b", 1);
    (CorpusManifest::new(frags, vec![pair.clone()]).unwrap(), pair)
}

#[test]
fn subprocess_echo() {
    let dir = tempfile::tempdir().unwrap();
    let f = script(dir.path(), "hello.sh", "echo hello\n");
    let r = execute_fragment(&f, &ExecutorConfig::subprocess("sh {file}", 5.0)).unwrap();
    assert_eq!(r.status, ExecStatus::Ok);
    assert_eq!(r.stdout, "hello\n");
    assert!(r.duration > 0.0);
}

#[test]
fn subprocess_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let f = script(dir.path(), "slow.sh", "echo early\nsleep 5\n");
    let start = Instant::now();
    let r = execute_fragment(&f, &ExecutorConfig::subprocess("sh {file}", 1.0)).unwrap();
    assert_eq!(r.status, ExecStatus::Timeout);
    assert_eq!(r.stdout, "");
    assert!(r.duration >= 1.0);
    assert!(start.elapsed().as_secs_f64() < 4.0);
}

#[test]
fn subprocess_failure_and_missing_program() {
    let dir = tempfile::tempdir().unwrap();
    let f = script(dir.path(), "fail.sh", "echo partial\nexit 3\n");
    let r = execute_fragment(&f, &ExecutorConfig::subprocess("sh {file}", 5.0)).unwrap();
    assert_eq!(r.status, ExecStatus::RuntimeError);
    assert_eq!(r.stdout, "partial\n");
    let cfg = ExecutorConfig::subprocess("definitely-not-a-program-xyz {file}", 5.0);
    assert_eq!(execute_fragment(&f, &cfg).unwrap().status, ExecStatus::RuntimeError);
}

#[test]
fn subprocess_stdout_is_capped() {
    let dir = tempfile::tempdir().unwrap();
    let f = script(dir.path(), "big.sh", "head -c 3000000 /dev/zero | tr '\\0' 'x'\n");
    let r = execute_fragment(&f, &ExecutorConfig::subprocess("sh {file}", 10.0)).unwrap();
    assert_eq!(r.status, ExecStatus::Ok);
    assert_eq!(r.stdout.len(), STDOUT_CAP);
}

#[test]
fn template_without_placeholder_is_config_error() {
    let f = fragment("a", "a".into());
    let cfg = ExecutorConfig::subprocess("sh run.sh", 1.0);
    assert!(matches!(execute_fragment(&f, &cfg), Err(clonefuse::Error::Config(_))));
}

#[test]
fn scripted_fixture() {
    let cfg = ExecutorConfig::scripted([("f1", "42\n")]);
    let r = execute_fragment(&fragment("f1", "f1".into()), &cfg).unwrap();
    assert_eq!((r.status, r.stdout.as_str()), (ExecStatus::Ok, "42\n"));
}

#[test]
fn pair_feature_examples() {
    let (m, pair) = two_fragment_manifest();
    let same = ExecutorConfig::scripted([("a", "7 8"), ("b", "7 8")]);
    assert_eq!(
        compute_pair_feature(&pair, &m, &same).unwrap(),
        OutputFeature {
            value: vec![1.0],
            available: true
        }
    );

    let near = ExecutorConfig::scripted([("a", "1 2 3"), ("b", "1 2 4")]);
    let v = compute_pair_feature(&pair, &m, &near).unwrap().value[0];
    // dot 2 over sqrt(3)·sqrt(3)
    assert!((v - 2.0 / 3.0).abs() < 1e-15);

    let mut timed_out = ExecutorConfig::scripted([("a", "1")]);
    timed_out.fixtures.insert(
        "b".into(),
        ScriptedOutput::Detailed {
            status: ExecStatus::Timeout,
            stdout: String::new(),
        },
    );
    assert_eq!(
        compute_pair_feature(&pair, &m, &timed_out).unwrap(),
        OutputFeature {
            value: vec![0.5],
            available: false
        }
    );

    let mut wide = same.clone();
    wide.feature_dim = 3;
    assert_eq!(compute_pair_feature(&pair, &m, &wide).unwrap().value, vec![1.0, 0.5, 0.5]);

    let stranger = PairExample::new("a", "zzz", 0);
    assert!(compute_pair_feature(&stranger, &m, &same).is_err());
}

#[test]
fn pair_feature_from_subprocess() {
    let dir = tempfile::tempdir().unwrap();
    let a = script(dir.path(), "a.sh", "echo 1 2 3\n");
    let b = script(dir.path(), "b.sh", "sleep 5\n");
    let c = script(dir.path(), "c.sh", "echo 1 2 4\n");
    let m = CorpusManifest::new(
        vec![a, b, c],
        vec![PairExample::new("a.sh", "b.sh", 0), PairExample::new("a.sh", "c.sh", 1)],
    )
    .unwrap();
    let cfg = ExecutorConfig::subprocess("sh {file}", 1.0);
    let feats = compute_features(&m, &cfg, &FeatureMap::new()).unwrap();
    assert_eq!(feats["a.sh|b.sh"], OutputFeature::fallback(1, 0.5));
    assert!((feats["a.sh|c.sh"].value[0] - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn cache_entries_are_reused_and_files_round_trip() {
    let (m, pair) = two_fragment_manifest();
    let cfg = ExecutorConfig::scripted([("a", "x"), ("b", "y")]);
    let mut cache = FeatureMap::new();
    cache.insert(
        pair.key(),
        OutputFeature {
            value: vec![0.25],
            available: true,
        },
    );
    let feats = compute_features(&m, &cfg, &cache).unwrap();
    assert_eq!(feats, cache);
    assert_eq!(compute_features(&m, &cfg, &FeatureMap::new()).unwrap()[&pair.key()].value, vec![0.0]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.json");
    save_features(&path, &feats).unwrap();
    assert_eq!(load_features(&path).unwrap(), feats);
}

#[test]
fn attach_fills_missing_with_fallback() {
    let mut pairs = vec![PairExample::new("a", "b", 1), PairExample::new("a", "c", 0)];
    let mut feats = FeatureMap::new();
    feats.insert(
        "a|b".into(),
        OutputFeature {
            value: vec![0.9],
            available: true,
        },
    );
    attach_features(&mut pairs, &feats, 1, 0.5);
    assert_eq!((pairs[0].out_feature.clone(), pairs[0].available), (vec![0.9], true));
    assert_eq!((pairs[1].out_feature.clone(), pairs[1].available), (vec![0.5], false));
}

#[test]
fn scripted_features_are_bit_identical() {
    let (m, _) = two_fragment_manifest();
    let cfg = ExecutorConfig::scripted([("a", "3 1 4 1 5"), ("b", "2 7 1 8")]);
    let x = compute_features(&m, &cfg, &FeatureMap::new()).unwrap();
    let y = compute_features(&m, &cfg, &FeatureMap::new()).unwrap();
    assert_eq!(x["a|b"].value[0].to_bits(), y["a|b"].value[0].to_bits());
}

fn output_text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof!["[a-cA-C]{1,2}", "[0-9]{1,2}", Just(" ".to_owned()), Just("\n".to_owned())], 0..20)
        .prop_map(|v| v.join(" "))
}

proptest! {
    #[test]
    fn similarity_symmetric_and_bounded(a in output_text(), b in output_text()) {
        let s = output_similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s.to_bits(), output_similarity(&b, &a).to_bits());
    }

    #[test]
    fn similarity_identity(a in output_text()) {
        prop_assert_eq!(output_similarity(&a, &a), 1.0);
        prop_assert_eq!(output_similarity(&a, &a.to_uppercase()), 1.0);
    }
}
