//! Execution-derived pair feature: run both fragments, compare their stdout.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CodeFragment, CorpusManifest, PairExample};
use crate::error::{Error, Result};

/// Captured stdout is truncated beyond this many bytes.
pub const STDOUT_CAP: usize = 1 << 20;

pub const DEFAULT_FALLBACK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    CompileError,
    RuntimeError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub stdout: String,
    /// Wall-clock seconds.
    pub duration: f64,
}

impl ExecutionResult {
    fn failed(status: ExecStatus) -> Self {
        ExecutionResult {
            status,
            stdout: String::new(),
            duration: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Scripted,
    Subprocess,
}

/// A scripted fixture: either a bare stdout string or an explicit status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedOutput {
    Stdout(String),
    Detailed {
        status: ExecStatus,
        #[serde(default)]
        stdout: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    pub mode: ExecMode,
    /// Command line with a `{file}` placeholder, e.g. `python3 {file}`.
    #[serde(default)]
    pub command_template: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default)]
    pub fixtures: BTreeMap<String, ScriptedOutput>,
    #[serde(default = "default_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_fallback")]
    pub fallback: f64,
}

fn default_timeout() -> f64 {
    5.0
}

fn default_dim() -> usize {
    1
}

fn default_fallback() -> f64 {
    DEFAULT_FALLBACK
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            mode: ExecMode::Scripted,
            command_template: None,
            timeout: default_timeout(),
            fixtures: BTreeMap::new(),
            feature_dim: default_dim(),
            fallback: default_fallback(),
        }
    }
}

impl ExecutorConfig {
    pub fn scripted<I, K, V>(fixtures: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        ExecutorConfig {
            fixtures: fixtures
                .into_iter()
                .map(|(k, v)| (k.into(), ScriptedOutput::Stdout(v.into())))
                .collect(),
            ..Default::default()
        }
    }

    pub fn subprocess(template: impl Into<String>, timeout: f64) -> Self {
        ExecutorConfig {
            mode: ExecMode::Subprocess,
            command_template: Some(template.into()),
            timeout,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Error::Config(format!("timeout must be positive, got {}", self.timeout)));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fallback) {
            return Err(Error::Config(format!("fallback {} outside [0,1]", self.fallback)));
        }
        if self.mode == ExecMode::Subprocess {
            match &self.command_template {
                None => return Err(Error::Config("subprocess mode requires command_template".into())),
                Some(t) if !t.contains("{file}") => {
                    return Err(Error::Config(format!("command_template `{t}` lacks {{file}}")))
                }
                Some(t) if shlex::split(t).is_none_or(|v| v.is_empty()) => {
                    return Err(Error::Config(format!("cannot parse command_template `{t}`")))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

pub fn execute_fragment(fragment: &CodeFragment, cfg: &ExecutorConfig) -> Result<ExecutionResult> {
    cfg.validate()?;
    match cfg.mode {
        ExecMode::Scripted => Ok(match cfg.fixtures.get(&fragment.id) {
            None => ExecutionResult::failed(ExecStatus::RuntimeError),
            Some(ScriptedOutput::Stdout(s)) => ExecutionResult {
                status: ExecStatus::Ok,
                stdout: s.clone(),
                duration: 0.0,
            },
            Some(ScriptedOutput::Detailed { status, stdout }) => ExecutionResult {
                status: *status,
                stdout: match status {
                    ExecStatus::Ok | ExecStatus::RuntimeError => stdout.clone(),
                    _ => String::new(),
                },
                duration: 0.0,
            },
        }),
        ExecMode::Subprocess => {
            let template = cfg.command_template.as_deref().unwrap_or_default();
            run_subprocess(template, &fragment.path, Duration::from_secs_f64(cfg.timeout))
        }
    }
}

fn run_subprocess(template: &str, file: &Path, timeout: Duration) -> Result<ExecutionResult> {
    let file = file.to_string_lossy();
    let argv: Vec<String> = shlex::split(template)
        .unwrap_or_default()
        .into_iter()
        .map(|arg| arg.replace("{file}", &file))
        .collect();
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::Config("empty command_template".into()))?;

    let start = Instant::now();
    let mut child = match Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
    {
        Ok(c) => c,
        Err(_) => return Ok(ExecutionResult::failed(ExecStatus::RuntimeError)),
    };

    let mut pipe = child.stdout.take().expect("stdout is piped");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match pipe.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = STDOUT_CAP.saturating_sub(buf.len());
                    buf.extend_from_slice(&chunk[..n.min(room)]);
                }
            }
        }
        buf
    });

    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(_) => break None,
        }
    };
    let duration = start.elapsed().as_secs_f64();

    match status {
        None => Ok(ExecutionResult {
            status: ExecStatus::Timeout,
            stdout: String::new(),
            duration,
        }),
        Some(st) => {
            let bytes = reader.join().unwrap_or_default();
            Ok(ExecutionResult {
                status: if st.success() {
                    ExecStatus::Ok
                } else {
                    ExecStatus::RuntimeError
                },
                stdout: String::from_utf8_lossy(&bytes).into_owned(),
                duration,
            })
        }
    }
}

/// Similarity of two program outputs; implementations must be symmetric and
/// return values in `[0, 1]`.
pub trait OutputScorer: Sync {
    fn score(&self, out_a: &str, out_b: &str) -> f64;
}

/// Cosine similarity of whitespace term-frequency vectors after trimming,
/// whitespace collapsing and lowercasing.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineTf;

impl OutputScorer for CosineTf {
    fn score(&self, out_a: &str, out_b: &str) -> f64 {
        output_similarity(out_a, out_b)
    }
}

fn term_frequencies(text: &str) -> HashMap<String, usize> {
    let mut tf = HashMap::new();
    for term in text.split_whitespace() {
        *tf.entry(term.to_lowercase()).or_insert(0) += 1;
    }
    tf
}

pub fn output_similarity(out_a: &str, out_b: &str) -> f64 {
    let ta = term_frequencies(out_a);
    let tb = term_frequencies(out_b);
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    // Iterate the smaller map and sum in sorted order so the result does not
    // depend on hash iteration order or argument order.
    let (small, large) = if ta.len() <= tb.len() { (&ta, &tb) } else { (&tb, &ta) };
    let mut products: Vec<(&String, usize)> = small
        .iter()
        .filter_map(|(k, &v)| large.get(k).map(|&w| (k, v * w)))
        .collect();
    products.sort();
    let dot: usize = products.iter().map(|(_, p)| p).sum();
    let sq_norm = |m: &HashMap<String, usize>| m.values().map(|v| (v * v) as f64).sum::<f64>();
    // Integer-valued until the final sqrt, so identical term profiles give exactly 1.
    (dot as f64 / (sq_norm(&ta) * sq_norm(&tb)).sqrt()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFeature {
    pub value: Vec<f64>,
    pub available: bool,
}

impl OutputFeature {
    pub fn fallback(dim: usize, fill: f64) -> Self {
        OutputFeature {
            value: vec![fill; dim],
            available: false,
        }
    }
}

pub fn compute_pair_feature(
    pair: &PairExample,
    manifest: &CorpusManifest,
    cfg: &ExecutorConfig,
) -> Result<OutputFeature> {
    compute_pair_feature_with(pair, manifest, cfg, &CosineTf)
}

pub fn compute_pair_feature_with(
    pair: &PairExample,
    manifest: &CorpusManifest,
    cfg: &ExecutorConfig,
    scorer: &dyn OutputScorer,
) -> Result<OutputFeature> {
    cfg.validate()?;
    let lookup = |id: &str| {
        manifest
            .fragment(id)
            .ok_or_else(|| Error::UnknownFragment(id.to_owned()))
    };
    let (fa, fb) = (lookup(&pair.id_a)?, lookup(&pair.id_b)?);
    let ra = execute_fragment(fa, cfg)?;
    let rb = execute_fragment(fb, cfg)?;
    let mut feature = OutputFeature::fallback(cfg.feature_dim, cfg.fallback);
    if ra.status == ExecStatus::Ok && rb.status == ExecStatus::Ok {
        feature.value[0] = scorer.score(&ra.stdout, &rb.stdout);
        feature.available = true;
    }
    Ok(feature)
}

/// Feature cache keyed by [`PairExample::key`]. Ordered so the JSON form is stable.
pub type FeatureMap = BTreeMap<String, OutputFeature>;

/// Computes features for every pair in parallel, reusing entries already in `cache`.
pub fn compute_features(
    manifest: &CorpusManifest,
    cfg: &ExecutorConfig,
    cache: &FeatureMap,
) -> Result<FeatureMap> {
    cfg.validate()?;
    let computed: Vec<(String, OutputFeature)> = manifest
        .pairs
        .par_iter()
        .map(|pair| {
            let key = pair.key();
            match cache.get(&key) {
                Some(f) if f.value.len() == cfg.feature_dim => Ok((key, f.clone())),
                _ => compute_pair_feature(pair, manifest, cfg).map(|f| (key, f)),
            }
        })
        .collect::<Result<_>>()?;
    Ok(computed.into_iter().collect())
}

/// Copies features onto the manifest's pairs; pairs missing from `features`
/// receive the fallback vector.
pub fn attach_features(pairs: &mut [PairExample], features: &FeatureMap, dim: usize, fallback: f64) {
    for p in pairs {
        let f = features
            .get(&p.key())
            .cloned()
            .unwrap_or_else(|| OutputFeature::fallback(dim, fallback));
        p.out_feature = f.value;
        p.available = f.available;
    }
}

pub fn save_features(path: &Path, features: &FeatureMap) -> Result<()> {
    let text = serde_json::to_string_pretty(features)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: &Path) -> Result<FeatureMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: FeatureMap = serde_json::from_str(&text)?;
    if let Some((k, _)) = map
        .iter()
        .find(|(_, f)| f.value.iter().any(|v| !(0.0..=1.0).contains(v)))
    {
        return Err(Error::Format {
            path: path.to_owned(),
            reason: format!("feature for `{k}` outside [0,1]"),
        });
    }
    Ok(map)
}
