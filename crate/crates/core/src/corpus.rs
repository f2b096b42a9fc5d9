//! Dataset ingestion, pairing and seeded splitting.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::codeparse::lex_manifest;
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentKind {
    Original,
    Plagiarized,
    NonPlagiarized,
}

impl FragmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FragmentKind::Original => "original",
            FragmentKind::Plagiarized => "plagiarized",
            FragmentKind::NonPlagiarized => "non-plagiarized",
        }
    }

    fn from_dir_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "original" => Some(FragmentKind::Original),
            "plagiarized" => Some(FragmentKind::Plagiarized),
            "non-plagiarized" => Some(FragmentKind::NonPlagiarized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeFragment {
    pub id: String,
    pub path: PathBuf,
    pub source: String,
    pub task: String,
    pub kind: FragmentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExample {
    pub id_a: String,
    pub id_b: String,
    /// 1 = clone (plagiarized), 0 otherwise.
    pub label: u8,
    #[serde(default)]
    pub out_feature: Vec<f64>,
    #[serde(default)]
    pub available: bool,
}

impl PairExample {
    pub fn new(id_a: impl Into<String>, id_b: impl Into<String>, label: u8) -> Self {
        PairExample {
            id_a: id_a.into(),
            id_b: id_b.into(),
            label,
            out_feature: Vec::new(),
            available: false,
        }
    }

    /// Stable key used by the feature cache.
    pub fn key(&self) -> String {
        format!("{}|{}", self.id_a, self.id_b)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_fragments: usize,
    pub num_pairs: usize,
    pub num_positive_pairs: usize,
    pub total_tokens: usize,
    pub unique_tokens: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub avg_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub fragments: Vec<CodeFragment>,
    pub pairs: Vec<PairExample>,
    pub stats: CorpusStats,
}

impl CorpusManifest {
    /// Builds a manifest, checking invariants and filling in `stats`.
    pub fn new(fragments: Vec<CodeFragment>, pairs: Vec<PairExample>) -> Result<Self> {
        let mut m = CorpusManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            fragments,
            pairs,
            stats: CorpusStats::default(),
        };
        m.validate()?;
        m.stats = corpus_stats(&m)?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for f in &self.fragments {
            if !ids.insert(f.id.as_str()) {
                return Err(Error::Config(format!("duplicate fragment id `{}`", f.id)));
            }
            if f.source.is_empty() {
                return Err(Error::Ingest {
                    path: f.path.clone(),
                    reason: "empty source file".into(),
                });
            }
        }
        for p in &self.pairs {
            for id in [&p.id_a, &p.id_b] {
                if !ids.contains(id.as_str()) {
                    return Err(Error::UnknownFragment(id.clone()));
                }
            }
            if p.id_a == p.id_b {
                return Err(Error::Config(format!("pair pairs `{}` with itself", p.id_a)));
            }
            if p.label > 1 {
                return Err(Error::Config(format!("pair {} has label {}", p.key(), p.label)));
            }
            if p.out_feature.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config(format!("pair {} has a feature outside [0,1]", p.key())));
            }
        }
        Ok(())
    }

    pub fn fragment(&self, id: &str) -> Option<&CodeFragment> {
        self.fragments.iter().find(|f| f.id == id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: CorpusManifest = serde_json::from_str(&text)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Format {
                path: path.to_owned(),
                reason: format!("unsupported schema_version {}", m.schema_version),
            });
        }
        m.validate()?;
        Ok(m)
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn is_hidden(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.'))
}

fn read_source(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Ingest {
        path: path.to_owned(),
        reason: "file is not valid UTF-8".into(),
    })?;
    // Strip a UTF-8 byte-order mark.
    Ok(text.trim_start_matches('\u{feff}').to_owned())
}

/// Reads an IR-Plag style tree:
///
/// ```text
/// root/<task>/original/<file>
/// root/<task>/plagiarized/**/<file>
/// root/<task>/non-plagiarized/**/<file>
/// ```
///
/// Every variant is paired with every original of its own task.
pub fn ingest_irplag(root: &Path) -> Result<CorpusManifest> {
    if !root.is_dir() {
        return Err(Error::Ingest {
            path: root.to_owned(),
            reason: "dataset root does not exist or is not a directory".into(),
        });
    }
    let mut fragments = Vec::new();
    let mut pairs = Vec::new();

    for task_dir in sorted_entries(root)? {
        if !task_dir.is_dir() || is_hidden(&task_dir) {
            continue;
        }
        let task = task_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut originals = Vec::new();
        let mut variants = Vec::new();

        for kind_dir in sorted_entries(&task_dir)? {
            let Some(kind) = kind_dir
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(FragmentKind::from_dir_name)
            else {
                continue;
            };
            if !kind_dir.is_dir() {
                continue;
            }
            let walker = WalkDir::new(&kind_dir).sort_by_file_name();
            for entry in walker {
                let entry = entry.map_err(|e| Error::Ingest {
                    path: kind_dir.clone(),
                    reason: e.to_string(),
                })?;
                let path = entry.path();
                if !entry.file_type().is_file() || is_hidden(path) {
                    continue;
                }
                let rel = path
                    .strip_prefix(&kind_dir)
                    .expect("walkdir yields children of its root")
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                let frag = CodeFragment {
                    id: format!("{task}/{}/{rel}", kind.as_str()),
                    path: path.to_owned(),
                    source: read_source(path)?,
                    task: task.clone(),
                    kind,
                };
                if kind == FragmentKind::Original {
                    originals.push(frag.id.clone());
                } else {
                    variants.push((frag.id.clone(), kind));
                }
                fragments.push(frag);
            }
        }

        if originals.is_empty() {
            if variants.is_empty() {
                continue;
            }
            return Err(Error::Ingest {
                path: task_dir.clone(),
                reason: "task folder has no original file".into(),
            });
        }
        for orig in &originals {
            for (var, kind) in &variants {
                let label = u8::from(*kind == FragmentKind::Plagiarized);
                pairs.push(PairExample::new(orig.clone(), var.clone(), label));
            }
        }
    }

    if fragments.is_empty() {
        return Err(Error::Ingest {
            path: root.to_owned(),
            reason: "no code files found".into(),
        });
    }
    CorpusManifest::new(fragments, pairs)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    path_a: PathBuf,
    path_b: PathBuf,
    label: u8,
}

/// Reads a `path_a,path_b,label` CSV. Relative paths resolve against the CSV's
/// directory; each distinct path becomes one fragment.
pub fn ingest_pairs_csv(csv_path: &Path) -> Result<CorpusManifest> {
    let base = csv_path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| Error::Ingest {
        path: csv_path.to_owned(),
        reason: e.to_string(),
    })?;
    let mut fragments: Vec<CodeFragment> = Vec::new();
    let mut pairs = Vec::new();

    let intern = |rel: &Path, kind: FragmentKind, fragments: &mut Vec<CodeFragment>| -> Result<String> {
        let id = rel.to_string_lossy().replace('\\', "/");
        if !fragments.iter().any(|f| f.id == id) {
            let path = base.join(rel);
            fragments.push(CodeFragment {
                id: id.clone(),
                source: read_source(&path)?,
                path,
                task: "csv".into(),
                kind,
            });
        }
        Ok(id)
    };

    for row in reader.deserialize() {
        let row: CsvRow = row.map_err(|e| Error::Ingest {
            path: csv_path.to_owned(),
            reason: e.to_string(),
        })?;
        let kind_b = if row.label == 1 {
            FragmentKind::Plagiarized
        } else {
            FragmentKind::NonPlagiarized
        };
        let a = intern(&row.path_a, FragmentKind::Original, &mut fragments)?;
        let b = intern(&row.path_b, kind_b, &mut fragments)?;
        pairs.push(PairExample::new(a, b, row.label));
    }
    if pairs.is_empty() {
        return Err(Error::Ingest {
            path: csv_path.to_owned(),
            reason: "no pairs listed".into(),
        });
    }
    CorpusManifest::new(fragments, pairs)
}

/// Token statistics over the lexed fragments (comments excluded).
pub fn corpus_stats(manifest: &CorpusManifest) -> Result<CorpusStats> {
    let streams = lex_manifest(manifest)?;
    let lens: Vec<usize> = streams.iter().map(|s| s.len()).collect();
    let unique: HashSet<&str> = streams.iter().flat_map(|s| s.texts()).collect();
    let total: usize = lens.iter().sum();
    Ok(CorpusStats {
        num_fragments: manifest.fragments.len(),
        num_pairs: manifest.pairs.len(),
        num_positive_pairs: manifest.pairs.iter().filter(|p| p.label == 1).count(),
        total_tokens: total,
        unique_tokens: unique.len(),
        min_tokens: lens.iter().copied().min().unwrap_or(0),
        max_tokens: lens.iter().copied().max().unwrap_or(0),
        avg_tokens: if lens.is_empty() {
            0.0
        } else {
            total as f64 / lens.len() as f64
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.7,
            val_frac: 0.15,
            test_frac: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::Split(format!("fractions must be positive, got {fr:?}")));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items: floor, floor, remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (self.train_frac * n as f64).floor() as usize;
        let val = ((self.val_frac * n as f64).floor() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<PairExample>,
    pub val: Vec<PairExample>,
    pub test: Vec<PairExample>,
}

pub fn split_dataset(manifest: &CorpusManifest, spec: &SplitSpec) -> Result<Splits> {
    split_pairs(&manifest.pairs, spec)
}

pub fn split_pairs(pairs: &[PairExample], spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let n = pairs.len();
    if n < 3 {
        return Err(Error::Split(format!("need at least 3 pairs, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (n_train, n_val, _) = spec.sizes(n);
    let take = |idx: &[usize]| idx.iter().map(|&i| pairs[i].clone()).collect::<Vec<_>>();
    Ok(Splits {
        train: take(&order[..n_train]),
        val: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frag(id: &str, src: &str) -> CodeFragment {
        CodeFragment {
            id: id.into(),
            path: PathBuf::from(id),
            source: src.into(),
            task: "t".into(),
            kind: FragmentKind::Original,
        }
    }

    fn manifest_with_pairs(n: usize) -> CorpusManifest {
        let frags: Vec<_> = (0..=n).map(|i| frag(&format!("f{i}"), "int x;")).collect();
        let pairs = (1..=n)
            .map(|i| PairExample::new("f0", format!("f{i}"), (i % 2) as u8))
            .collect();
        CorpusManifest::new(frags, pairs).unwrap()
    }

    #[test]
    fn stats_single_fragment() {
        let m = CorpusManifest::new(vec![frag("a", "int x;")], vec![]).unwrap();
        let s = &m.stats;
        assert_eq!((s.total_tokens, s.unique_tokens, s.min_tokens, s.max_tokens), (3, 3, 3, 3));
        assert_eq!(s.avg_tokens, 3.0);
    }

    #[test]
    fn split_sizes_floor_floor_remainder() {
        let m = manifest_with_pairs(10);
        let s = split_dataset(&m, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
    }

    #[test]
    fn split_rejects_bad_input() {
        let m = manifest_with_pairs(2);
        assert!(matches!(split_dataset(&m, &SplitSpec::default()), Err(Error::Split(_))));
        let m = manifest_with_pairs(5);
        let bad = SplitSpec {
            train_frac: 0.5,
            val_frac: 0.3,
            test_frac: 0.3,
            seed: 1,
        };
        assert!(matches!(split_dataset(&m, &bad), Err(Error::Split(_))));
        let zero = SplitSpec {
            train_frac: 1.0,
            val_frac: 0.0,
            test_frac: 0.0,
            seed: 1,
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn invalid_manifests() {
        let dup = CorpusManifest::new(vec![frag("a", "x"), frag("a", "y")], vec![]);
        assert!(dup.is_err());
        let empty = CorpusManifest::new(vec![frag("a", "")], vec![]);
        assert!(matches!(empty, Err(Error::Ingest { .. })));
        let dangling = CorpusManifest::new(vec![frag("a", "x")], vec![PairExample::new("a", "b", 1)]);
        assert!(matches!(dangling, Err(Error::UnknownFragment(_))));
        let self_pair = CorpusManifest::new(vec![frag("a", "x")], vec![PairExample::new("a", "a", 1)]);
        assert!(self_pair.is_err());
    }

    #[test]
    fn missing_root() {
        let err = ingest_irplag(Path::new("/definitely/not/here")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here"));
    }
}
