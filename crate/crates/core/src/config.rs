//! Experiment configuration file (a single JSON document).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SplitSpec;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::outfeature::ExecutorConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// IR-Plag style directory.
    pub dataset_root: Option<PathBuf>,
    /// Alternative `path_a,path_b,label` corpus.
    pub pairs_csv: Option<PathBuf>,
    /// Prebuilt manifest; takes precedence over the dataset sources.
    pub manifest: Option<PathBuf>,
    /// Feature cache, read if present and written after computation.
    pub features: Option<PathBuf>,
    /// Base seed; nested seeds are derived from it.
    pub seed: u64,
    pub vocab_max_size: usize,
    pub split: SplitSpec,
    pub executor: ExecutorConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset_root: None,
            pairs_csv: None,
            manifest: None,
            features: None,
            seed: 0,
            vocab_max_size: 1024,
            split: SplitSpec::default(),
            executor: ExecutorConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses the file, resolves relative paths against its directory and
    /// propagates the base seed.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.dataset_root, &mut self.pairs_csv, &mut self.manifest, &mut self.features]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn apply_seed(&mut self) {
        self.split.seed = self.seed;
        self.model.seed = self.seed;
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset_root.is_none() && self.pairs_csv.is_none() && self.manifest.is_none() {
            return Err(Error::Config(
                "one of dataset_root, pairs_csv or manifest must be set".into(),
            ));
        }
        self.split.validate()?;
        self.executor.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.executor.feature_dim != self.model.feature_dim {
            return Err(Error::Config(format!(
                "executor feature_dim {} differs from model feature_dim {}",
                self.executor.feature_dim, self.model.feature_dim
            )));
        }
        if self.vocab_max_size <= crate::codeparse::NUM_SPECIALS {
            return Err(Error::Config("vocab_max_size must exceed 4".into()));
        }
        Ok(())
    }
}
