use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and regularization settings for the fusion classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ffn_size: usize,
    pub max_len: usize,
    /// Length of the execution feature vector.
    pub feature_dim: usize,
    pub num_labels: usize,
    /// Dropout on the concatenated `[pooled; feature]` vector.
    pub dropout_p: f64,
    /// Adds a learned scalar to attention scores between def-use positions.
    pub dataflow_bias: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 1024,
            hidden_size: 64,
            num_layers: 2,
            num_heads: 4,
            ffn_size: 128,
            max_len: 256,
            feature_dim: 1,
            num_labels: 2,
            dropout_p: 0.1,
            dataflow_bias: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// The small configuration used by the gradient checker.
    pub fn tiny() -> Self {
        ModelConfig {
            vocab_size: 24,
            hidden_size: 8,
            num_layers: 1,
            num_heads: 2,
            ffn_size: 16,
            max_len: 16,
            feature_dim: 1,
            num_labels: 2,
            dropout_p: 0.0,
            dataflow_bias: false,
            seed: 0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.hidden_size == 0 || self.num_heads == 0 || !self.hidden_size.is_multiple_of(self.num_heads) {
            return fail(format!(
                "hidden_size {} must be a positive multiple of num_heads {}",
                self.hidden_size, self.num_heads
            ));
        }
        if self.max_len < 5 {
            return fail(format!("max_len must be at least 5, got {}", self.max_len));
        }
        if self.num_labels != 2 {
            return fail(format!("num_labels must be 2, got {}", self.num_labels));
        }
        if self.vocab_size <= crate::codeparse::NUM_SPECIALS {
            return fail(format!("vocab_size {} leaves no room for tokens", self.vocab_size));
        }
        if self.ffn_size == 0 || self.feature_dim == 0 {
            return fail("ffn_size and feature_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail(format!("dropout_p must lie in [0,1), got {}", self.dropout_p));
        }
        Ok(())
    }
}
