use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clonefuse::codeparse::{build_vocab, lex, lex_manifest, TokenKind};
use clonefuse::corpus::*;
use clonefuse::Error;
use serde::Deserialize;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn mini() -> CorpusManifest {
    ingest_irplag(&fixture("irplag_mini")).unwrap()
}

// Hand counts of each fixture file after lexing.
const TOKEN_COUNTS: [(&str, usize); 8] = [
    ("task1/original/Main.java", 51),
    ("task1/plagiarized/p1/Main.java", 51),
    ("task1/plagiarized/p2/Main.java", 53),
    ("task1/non-plagiarized/n1/Main.java", 51),
    ("task2/original/Main.java", 87),
    ("task2/plagiarized/p1/Main.java", 87),
    ("task2/plagiarized/p2/Main.java", 104),
    ("task2/non-plagiarized/n1/Main.java", 60),
];

#[test]
fn fixture_counts() {
    let m = mini();
    assert_eq!(m.fragments.len(), 8);
    assert_eq!(m.pairs.len(), 6);
    assert_eq!(m.pairs.iter().filter(|p| p.label == 1).count(), 4);
    assert_eq!(m.schema_version, MANIFEST_SCHEMA_VERSION);
    for p in &m.pairs {
        let a = m.fragment(&p.id_a).unwrap();
        let b = m.fragment(&p.id_b).unwrap();
        assert_eq!(a.kind, FragmentKind::Original);
        assert_eq!(a.task, b.task, "pairs never cross tasks");
        assert_eq!(p.label == 1, b.kind == FragmentKind::Plagiarized);
    }
    let unordered: BTreeSet<_> = m
        .pairs
        .iter()
        .map(|p| {
            let mut k = [p.id_a.clone(), p.id_b.clone()];
            k.sort();
            k
        })
        .collect();
    assert_eq!(unordered.len(), m.pairs.len());
}

#[test]
fn fixture_token_counts_and_stats() {
    let m = mini();
    let streams = lex_manifest(&m).unwrap();
    for (id, n) in TOKEN_COUNTS {
        let i = m.fragments.iter().position(|f| f.id == id).unwrap();
        assert_eq!(streams[i].len(), n, "{id}");
    }
    let total: usize = TOKEN_COUNTS.iter().map(|c| c.1).sum();
    let stats = corpus_stats(&m).unwrap();
    assert_eq!(stats.total_tokens, total);
    assert_eq!(stats.total_tokens, 544);
    assert_eq!(stats.unique_tokens, 66);
    assert_eq!(stats.min_tokens, 51);
    assert_eq!(stats.max_tokens, 104);
    assert!((stats.avg_tokens - total as f64 / 8.0).abs() < 1e-12);
    assert_eq!(stats, m.stats);
}

#[derive(Deserialize)]
struct GoldenToken {
    kind: TokenKind,
    text: String,
}

#[test]
fn golden_tokens() {
    let golden: Vec<GoldenToken> =
        serde_json::from_str(&std::fs::read_to_string(fixture("golden_tokens_task1_original.json")).unwrap()).unwrap();
    let src = std::fs::read_to_string(fixture("irplag_mini/task1/original/Main.java")).unwrap();
    let toks = lex(&src).unwrap();
    assert_eq!(toks.len(), golden.len());
    for (i, (t, g)) in toks.tokens().iter().zip(&golden).enumerate() {
        assert_eq!((t.kind, t.text.as_str(), t.index), (g.kind, g.text.as_str(), i));
    }
}

#[derive(Deserialize)]
struct GoldenSplit {
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
}

#[test]
fn golden_split() {
    let m = mini();
    let spec = SplitSpec {
        train_frac: 0.5,
        val_frac: 0.25,
        test_frac: 0.25,
        seed: 42,
    };
    let s = split_dataset(&m, &spec).unwrap();
    let keys = |v: &[PairExample]| v.iter().map(PairExample::key).collect::<Vec<_>>();
    let golden: GoldenSplit =
        serde_json::from_str(&std::fs::read_to_string(fixture("golden_split_seed42.json")).unwrap()).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (3, 1, 2));
    assert_eq!(keys(&s.train), golden.train);
    assert_eq!(keys(&s.val), golden.val);
    assert_eq!(keys(&s.test), golden.test);
    assert_eq!(split_dataset(&m, &spec).unwrap(), s);
}

#[test]
fn manifest_round_trip() {
    let m = mini();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    m.save(&path).unwrap();
    assert_eq!(CorpusManifest::load(&path).unwrap(), m);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for key in ["schema_version", "fragments", "pairs", "stats"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn vocabulary_of_fixture() {
    let m = mini();
    let v = build_vocab(&m, 1024).unwrap();
    assert_eq!(v.len(), 66 + 4);
    assert_eq!(build_vocab(&m, 1024).unwrap(), v);
    let small = build_vocab(&m, 10).unwrap();
    assert_eq!(small.len(), 10);
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(ingest_irplag(dir.path()), Err(Error::Ingest { .. })));
}

#[test]
fn lex_failure_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let orig = dir.path().join("t/original");
    let plag = dir.path().join("t/plagiarized/p1");
    std::fs::create_dir_all(&orig).unwrap();
    std::fs::create_dir_all(&plag).unwrap();
    std::fs::write(orig.join("A.java"), "int x = 1;").unwrap();
    std::fs::write(plag.join("B.java"), "String s = \"open;").unwrap();
    let err = ingest_irplag(dir.path()).unwrap_err().to_string();
    assert!(err.contains("B.java"), "{err}");
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn pairs_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.c"), "int x;").unwrap();
    std::fs::write(dir.path().join("b.c"), "int y = 2;").unwrap();
    std::fs::write(dir.path().join("c.c"), "return 0;").unwrap();
    let csv = dir.path().join("pairs.csv");
    std::fs::write(&csv, "path_a,path_b,label\na.c,b.c,1\na.c,c.c,0\n").unwrap();
    let m = ingest_pairs_csv(&csv).unwrap();
    assert_eq!(m.fragments.len(), 3);
    assert_eq!(m.pairs.len(), 2);
    assert_eq!(m.pairs[0].key(), "a.c|b.c");
    assert_eq!(m.stats.total_tokens, 3 + 5 + 3);

    std::fs::write(&csv, "path_a,path_b,label\n").unwrap();
    assert!(ingest_pairs_csv(&csv).is_err());
}
