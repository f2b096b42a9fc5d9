use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams<S> {
    pub ln1_gain: Tensor<S>,
    pub ln1_bias: Tensor<S>,
    pub query: Tensor<S>,
    pub query_bias: Tensor<S>,
    pub key: Tensor<S>,
    pub key_bias: Tensor<S>,
    pub value: Tensor<S>,
    pub value_bias: Tensor<S>,
    pub attn_out: Tensor<S>,
    pub attn_out_bias: Tensor<S>,
    pub ln2_gain: Tensor<S>,
    pub ln2_bias: Tensor<S>,
    pub ffn_in: Tensor<S>,
    pub ffn_in_bias: Tensor<S>,
    pub ffn_out: Tensor<S>,
    pub ffn_out_bias: Tensor<S>,
}

/// Every trainable tensor. Weight matrices are stored `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters<S> {
    pub token_embedding: Tensor<S>,
    pub position_embedding: Tensor<S>,
    pub layers: Vec<LayerParams<S>>,
    pub final_ln_gain: Tensor<S>,
    pub final_ln_bias: Tensor<S>,
    pub pooler: Tensor<S>,
    pub pooler_bias: Tensor<S>,
    /// Projects the execution feature to hidden size (`H × d_f`).
    pub feature_proj: Tensor<S>,
    pub feature_bias: Tensor<S>,
    /// Maps `[pooled; feature]` (length `2H`) to the two logits.
    pub classifier: Tensor<S>,
    pub classifier_bias: Tensor<S>,
    pub dataflow_bias: Tensor<S>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Init {
    Glorot,
    Zero,
    One,
}

fn shapes(cfg: &ModelConfig) -> Vec<(String, usize, usize, Init)> {
    let (h, f) = (cfg.hidden_size, cfg.ffn_size);
    let mut out = vec![
        ("token_embedding".to_string(), cfg.vocab_size, h, Init::Glorot),
        ("position_embedding".to_string(), cfg.max_len, h, Init::Glorot),
    ];
    for l in 0..cfg.num_layers {
        let p = |n: &str| format!("layers.{l}.{n}");
        out.extend([
            (p("ln1_gain"), 1, h, Init::One),
            (p("ln1_bias"), 1, h, Init::Zero),
            (p("query"), h, h, Init::Glorot),
            (p("query_bias"), 1, h, Init::Zero),
            (p("key"), h, h, Init::Glorot),
            (p("key_bias"), 1, h, Init::Zero),
            (p("value"), h, h, Init::Glorot),
            (p("value_bias"), 1, h, Init::Zero),
            (p("attn_out"), h, h, Init::Glorot),
            (p("attn_out_bias"), 1, h, Init::Zero),
            (p("ln2_gain"), 1, h, Init::One),
            (p("ln2_bias"), 1, h, Init::Zero),
            (p("ffn_in"), f, h, Init::Glorot),
            (p("ffn_in_bias"), 1, f, Init::Zero),
            (p("ffn_out"), h, f, Init::Glorot),
            (p("ffn_out_bias"), 1, h, Init::Zero),
        ]);
    }
    out.extend([
        ("final_ln_gain".to_string(), 1, h, Init::One),
        ("final_ln_bias".to_string(), 1, h, Init::Zero),
        ("pooler".to_string(), h, h, Init::Glorot),
        ("pooler_bias".to_string(), 1, h, Init::Zero),
        ("feature_proj".to_string(), h, cfg.feature_dim, Init::Glorot),
        ("feature_bias".to_string(), 1, h, Init::Zero),
        ("classifier".to_string(), cfg.num_labels, 2 * h, Init::Glorot),
        ("classifier_bias".to_string(), 1, cfg.num_labels, Init::Zero),
        ("dataflow_bias".to_string(), 1, 1, Init::Zero),
    ]);
    out
}

impl<S: Scalar> Parameters<S> {
    /// Glorot-uniform weights from `cfg.seed`; zero biases; unit layer-norm gains.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let tensors = shapes(cfg)
            .into_iter()
            .map(|(_, rows, cols, init)| match init {
                Init::Zero => Tensor::zeros(rows, cols),
                Init::One => Tensor::filled(rows, cols, S::one()),
                Init::Glorot => {
                    let a = (6.0 / (rows + cols) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-a, a);
                    let data = (0..rows * cols).map(|_| S::of(dist.sample(&mut rng))).collect();
                    Tensor::from_vec(rows, cols, data)
                }
            })
            .collect();
        Self::from_tensors(cfg, tensors)
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        let tensors = shapes(cfg)
            .into_iter()
            .map(|(_, r, c, _)| Tensor::zeros(r, c))
            .collect();
        Self::from_tensors(cfg, tensors).expect("shapes() matches from_tensors")
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, t| t.fill_zero());
        z
    }

    /// Rebuilds parameters from tensors listed in [`Parameters::names`] order.
    pub fn from_tensors(cfg: &ModelConfig, tensors: Vec<Tensor<S>>) -> Result<Self> {
        let expected = shapes(cfg);
        if tensors.len() != expected.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, r, c, _), t) in expected.iter().zip(&tensors) {
            if t.shape() != (*r, *c) {
                return Err(Error::Shape(format!(
                    "{name}: expected {r}×{c}, got {}×{}",
                    t.rows, t.cols
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("count checked above");
        let token_embedding = next();
        let position_embedding = next();
        let layers = (0..cfg.num_layers)
            .map(|_| LayerParams {
                ln1_gain: next(),
                ln1_bias: next(),
                query: next(),
                query_bias: next(),
                key: next(),
                key_bias: next(),
                value: next(),
                value_bias: next(),
                attn_out: next(),
                attn_out_bias: next(),
                ln2_gain: next(),
                ln2_bias: next(),
                ffn_in: next(),
                ffn_in_bias: next(),
                ffn_out: next(),
                ffn_out_bias: next(),
            })
            .collect();
        Ok(Parameters {
            token_embedding,
            position_embedding,
            layers,
            final_ln_gain: next(),
            final_ln_bias: next(),
            pooler: next(),
            pooler_bias: next(),
            feature_proj: next(),
            feature_bias: next(),
            classifier: next(),
            classifier_bias: next(),
            dataflow_bias: next(),
        })
    }

    /// Tensor names in canonical order.
    pub fn names(cfg: &ModelConfig) -> Vec<String> {
        shapes(cfg).into_iter().map(|(n, ..)| n).collect()
    }

    fn refs(&self) -> Vec<&Tensor<S>> {
        let mut v = vec![&self.token_embedding, &self.position_embedding];
        for l in &self.layers {
            v.extend([
                &l.ln1_gain,
                &l.ln1_bias,
                &l.query,
                &l.query_bias,
                &l.key,
                &l.key_bias,
                &l.value,
                &l.value_bias,
                &l.attn_out,
                &l.attn_out_bias,
                &l.ln2_gain,
                &l.ln2_bias,
                &l.ffn_in,
                &l.ffn_in_bias,
                &l.ffn_out,
                &l.ffn_out_bias,
            ]);
        }
        v.extend([
            &self.final_ln_gain,
            &self.final_ln_bias,
            &self.pooler,
            &self.pooler_bias,
            &self.feature_proj,
            &self.feature_bias,
            &self.classifier,
            &self.classifier_bias,
            &self.dataflow_bias,
        ]);
        v
    }

    fn refs_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut v = vec![&mut self.token_embedding, &mut self.position_embedding];
        for l in &mut self.layers {
            v.extend([
                &mut l.ln1_gain,
                &mut l.ln1_bias,
                &mut l.query,
                &mut l.query_bias,
                &mut l.key,
                &mut l.key_bias,
                &mut l.value,
                &mut l.value_bias,
                &mut l.attn_out,
                &mut l.attn_out_bias,
                &mut l.ln2_gain,
                &mut l.ln2_bias,
                &mut l.ffn_in,
                &mut l.ffn_in_bias,
                &mut l.ffn_out,
                &mut l.ffn_out_bias,
            ]);
        }
        v.extend([
            &mut self.final_ln_gain,
            &mut self.final_ln_bias,
            &mut self.pooler,
            &mut self.pooler_bias,
            &mut self.feature_proj,
            &mut self.feature_bias,
            &mut self.classifier,
            &mut self.classifier_bias,
            &mut self.dataflow_bias,
        ]);
        v
    }

    /// Visits tensors in canonical order with their index.
    pub fn for_each(&self, mut f: impl FnMut(usize, &Tensor<S>)) {
        for (i, t) in self.refs().into_iter().enumerate() {
            f(i, t);
        }
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, &mut Tensor<S>)) {
        for (i, t) in self.refs_mut().into_iter().enumerate() {
            f(i, t);
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor<S>> {
        self.refs()
    }

    pub fn into_tensors(self) -> Vec<Tensor<S>> {
        self.refs().into_iter().cloned().collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.refs().iter().map(|t| t.len()).sum()
    }

    /// All scalars concatenated in canonical order.
    pub fn flatten(&self) -> Vec<S> {
        self.refs().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn get_flat(&self, mut idx: usize) -> S {
        for t in self.refs() {
            if idx < t.len() {
                return t.data[idx];
            }
            idx -= t.len();
        }
        panic!("flat index out of range");
    }

    pub fn set_flat(&mut self, mut idx: usize, v: S) {
        for t in self.refs_mut() {
            if idx < t.len() {
                t.data[idx] = v;
                return;
            }
            idx -= t.len();
        }
        panic!("flat index out of range");
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        let src = other.refs();
        for (dst, s) in self.refs_mut().into_iter().zip(src) {
            for (a, b) in dst.data.iter_mut().zip(&s.data) {
                *a += *b;
            }
        }
    }

    pub fn scale(&mut self, k: S) {
        self.for_each_mut(|_, t| t.data.iter_mut().for_each(|v| *v *= k));
    }

    pub fn all_finite(&self) -> bool {
        self.refs().iter().all(|t| t.all_finite())
    }

    /// Converts every scalar to another precision.
    pub fn cast<T: Scalar>(&self, cfg: &ModelConfig) -> Parameters<T> {
        let tensors = self
            .refs()
            .into_iter()
            .map(|t| Tensor::from_vec(t.rows, t.cols, t.data.iter().map(|v| T::of(v.as_f64())).collect()))
            .collect();
        Parameters::from_tensors(cfg, tensors).expect("same config")
    }
}
