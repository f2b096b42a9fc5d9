//! `results.json`: config echo, per-run detail and the aggregate.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use clonefuse::config::ExperimentConfig;
use clonefuse::evalx::ComparisonRow;
use clonefuse::train::{Aggregate, ExperimentResult, RunResult};
use clonefuse::Error;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub approach: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
}

impl ResultsFile {
    pub fn new(config: ExperimentConfig, result: ExperimentResult) -> Self {
        let approach = if config.train.use_feature {
            "transformer + output feature (this build)"
        } else {
            "transformer, constant feature (this build)"
        };
        ResultsFile {
            schema_version: RESULTS_SCHEMA_VERSION,
            approach: approach.to_owned(),
            config,
            runs: result.runs,
            aggregate: result.aggregate,
        }
    }

    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn comparison_row(&self) -> ComparisonRow {
        let m = self.aggregate.mean;
        ComparisonRow::measured(self.approach.clone(), m.precision, m.recall, m.f_measure)
    }
}

/// `results.json` → `results.run-03.ckpt`, next to the results file.
pub fn checkpoint_path(results: &Path, run: usize) -> PathBuf {
    let stem = results
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    results.with_file_name(format!("{stem}.run-{run:02}.ckpt"))
}
