//! Encoder forward pass and the feature-fusion classification head.
//!
//! Only attended (mask = 1) positions are materialized. A padded position is
//! never used as a key, so its row cannot reach the CLS state; dropping it up
//! front is exactly equivalent to masking its attention weight to zero.

use rand::Rng;

use super::config::ModelConfig;
use super::loss::softmax;
use super::params::Parameters;
use super::tensor::{matmul_nt, Tensor};
use crate::codeparse::EncodedPair;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) const LN_EPS: f64 = 1e-5;
const GELU_COEF: f64 = 0.044_715;

/// Inverted-dropout multipliers for the concatenated vector: each entry is `0`
/// or `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<S>(pub Vec<S>);

impl<S: Scalar> DropoutMask<S> {
    pub fn ones(len: usize) -> Self {
        DropoutMask(vec![S::one(); len])
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, len: usize, p: f64) -> Self {
        if p <= 0.0 {
            return Self::ones(len);
        }
        let keep = S::of(1.0 / (1.0 - p));
        DropoutMask(
            (0..len)
                .map(|_| if rng.gen::<f64>() < p { S::zero() } else { keep })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a, S> {
    /// No dropout.
    Eval,
    /// Dropout with the given mask on the concatenated vector.
    Train(&'a DropoutMask<S>),
}

#[derive(Debug, Clone)]
pub(crate) struct LnCache<S> {
    pub xhat: Vec<S>,
    pub inv_std: Vec<S>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerTrace<S> {
    pub ln1: LnCache<S>,
    pub normed: Vec<S>,
    pub q: Vec<S>,
    pub k: Vec<S>,
    pub v: Vec<S>,
    /// `heads × n × n` attention weights.
    pub probs: Vec<S>,
    pub context: Vec<S>,
    pub ln2: LnCache<S>,
    pub normed2: Vec<S>,
    pub ffn_pre: Vec<S>,
    pub ffn_act: Vec<S>,
}

/// Activations retained for [`super::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace<S> {
    pub(crate) ids: Vec<usize>,
    pub(crate) positions: Vec<usize>,
    pub(crate) edges: Option<Vec<bool>>,
    pub(crate) layers: Vec<LayerTrace<S>>,
    pub(crate) final_ln: LnCache<S>,
    pub(crate) cls: Vec<S>,
    pub pooled: Vec<S>,
    pub(crate) feature: Vec<S>,
    pub processed: Vec<S>,
    pub concat: Vec<S>,
    pub dropout: Vec<S>,
    pub(crate) dropped: Vec<S>,
    pub logits: [S; 2],
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<S> {
    pub logits: [S; 2],
    /// Probability of the clone class, `softmax(logits)[1]`.
    pub prob: S,
    pub trace: Option<ForwardTrace<S>>,
}

pub(crate) fn layer_norm<S: Scalar>(x: &[S], h: usize, gain: &[S], bias: &[S]) -> (Vec<S>, LnCache<S>) {
    let n = x.len() / h;
    let hf = S::of(h as f64);
    let eps = S::of(LN_EPS);
    let mut y = vec![S::zero(); x.len()];
    let mut xhat = vec![S::zero(); x.len()];
    let mut inv_std = vec![S::zero(); n];
    for r in 0..n {
        let row = &x[r * h..(r + 1) * h];
        let mean = row.iter().copied().sum::<S>() / hf;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / hf;
        let is = S::one() / (var + eps).sqrt();
        inv_std[r] = is;
        for c in 0..h {
            let xh = (row[c] - mean) * is;
            xhat[r * h + c] = xh;
            y[r * h + c] = xh * gain[c] + bias[c];
        }
    }
    (y, LnCache { xhat, inv_std })
}

pub(crate) fn gelu<S: Scalar>(x: S) -> S {
    let c = S::of((2.0 / std::f64::consts::PI).sqrt());
    let half = S::of(0.5);
    half * x * (S::one() + (c * (x + S::of(GELU_COEF) * x * x * x)).tanh())
}

pub(crate) fn gelu_grad<S: Scalar>(x: S) -> S {
    let c = S::of((2.0 / std::f64::consts::PI).sqrt());
    let half = S::of(0.5);
    let k = S::of(GELU_COEF);
    let t = (c * (x + k * x * x * x)).tanh();
    half * (S::one() + t) + half * x * (S::one() - t * t) * c * (S::one() + S::of(3.0) * k * x * x)
}

fn check_finite<S: Scalar>(v: &[S], layer: impl FnOnce() -> String) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer: layer() })
    }
}

fn linear<S: Scalar>(x: &[S], w: &Tensor<S>, b: &Tensor<S>) -> Vec<S> {
    let n = x.len() / w.cols;
    matmul_nt(x, &w.data, n, w.cols, w.rows, Some(&b.data))
}

pub fn forward<S: Scalar>(
    params: &Parameters<S>,
    cfg: &ModelConfig,
    encoded: &EncodedPair,
    f_out: &[f64],
    mode: Mode<'_, S>,
    keep_trace: bool,
) -> Result<ForwardOutput<S>> {
    let h = cfg.hidden_size;
    if encoded.input_ids.len() != cfg.max_len || encoded.attention_mask.len() != cfg.max_len {
        return Err(Error::Shape(format!(
            "encoded pair has length {}/{}, model expects {}",
            encoded.input_ids.len(),
            encoded.attention_mask.len(),
            cfg.max_len
        )));
    }
    if f_out.len() != cfg.feature_dim {
        return Err(Error::Shape(format!(
            "feature has length {}, model expects {}",
            f_out.len(),
            cfg.feature_dim
        )));
    }
    if encoded.attention_mask[0] != 1 {
        return Err(Error::Shape("position 0 (CLS) must be attended".into()));
    }
    if let Mode::Train(m) = mode {
        if m.0.len() != 2 * h {
            return Err(Error::Shape(format!("dropout mask has length {}, expected {}", m.0.len(), 2 * h)));
        }
    }

    let positions: Vec<usize> = (0..cfg.max_len)
        .filter(|&i| encoded.attention_mask[i] == 1)
        .collect();
    let n = positions.len();
    let ids: Vec<usize> = positions
        .iter()
        .map(|&p| encoded.input_ids[p] as usize)
        .collect();
    if let Some(bad) = ids.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(Error::Shape(format!("token id {bad} outside vocabulary of {}", cfg.vocab_size)));
    }

    let edges = cfg.dataflow_bias.then(|| {
        let mut slot = vec![usize::MAX; cfg.max_len];
        for (a, &p) in positions.iter().enumerate() {
            slot[p] = a;
        }
        let mut e = vec![false; n * n];
        for &(d, u) in &encoded.dataflow {
            let (Some(&ad), Some(&au)) = (slot.get(d), slot.get(u)) else {
                continue;
            };
            if ad != usize::MAX && au != usize::MAX {
                e[au * n + ad] = true;
                e[ad * n + au] = true;
            }
        }
        e
    });

    let mut x = vec![S::zero(); n * h];
    for (r, (&id, &p)) in ids.iter().zip(&positions).enumerate() {
        let tok = params.token_embedding.row(id);
        let pos = params.position_embedding.row(p);
        for c in 0..h {
            x[r * h + c] = tok[c] + pos[c];
        }
    }
    check_finite(&x, || "embeddings".into())?;

    let heads = cfg.num_heads;
    let dh = cfg.head_dim();
    let scale = S::one() / S::of(dh as f64).sqrt();
    let df_bias = params.dataflow_bias.data[0];
    let mut layer_traces = Vec::with_capacity(if keep_trace { cfg.num_layers } else { 0 });

    for (l, lp) in params.layers.iter().enumerate() {
        let (normed, ln1) = layer_norm(&x, h, &lp.ln1_gain.data, &lp.ln1_bias.data);
        let q = linear(&normed, &lp.query, &lp.query_bias);
        let k = linear(&normed, &lp.key, &lp.key_bias);
        let v = linear(&normed, &lp.value, &lp.value_bias);

        let mut probs = vec![S::zero(); heads * n * n];
        let mut context = vec![S::zero(); n * h];
        for hh in 0..heads {
            let off = hh * dh;
            for i in 0..n {
                let qi = &q[i * h + off..i * h + off + dh];
                let row = &mut probs[(hh * n + i) * n..(hh * n + i + 1) * n];
                for j in 0..n {
                    let kj = &k[j * h + off..j * h + off + dh];
                    let mut s = S::zero();
                    for d in 0..dh {
                        s += qi[d] * kj[d];
                    }
                    s *= scale;
                    if let Some(e) = &edges {
                        if e[i * n + j] {
                            s += df_bias;
                        }
                    }
                    row[j] = s;
                }
                let p = softmax(row);
                row.copy_from_slice(&p);
                let ci = &mut context[i * h + off..i * h + off + dh];
                for j in 0..n {
                    let pij = p[j];
                    let vj = &v[j * h + off..j * h + off + dh];
                    for d in 0..dh {
                        ci[d] += pij * vj[d];
                    }
                }
            }
        }
        let attn = linear(&context, &lp.attn_out, &lp.attn_out_bias);
        for (xv, a) in x.iter_mut().zip(&attn) {
            *xv += *a;
        }

        let (normed2, ln2) = layer_norm(&x, h, &lp.ln2_gain.data, &lp.ln2_bias.data);
        let ffn_pre = linear(&normed2, &lp.ffn_in, &lp.ffn_in_bias);
        let ffn_act: Vec<S> = ffn_pre.iter().map(|&z| gelu(z)).collect();
        let ffn = linear(&ffn_act, &lp.ffn_out, &lp.ffn_out_bias);
        for (xv, f) in x.iter_mut().zip(&ffn) {
            *xv += *f;
        }
        check_finite(&x, || format!("encoder layer {l}"))?;

        if keep_trace {
            layer_traces.push(LayerTrace {
                ln1,
                normed,
                q,
                k,
                v,
                probs,
                context,
                ln2,
                normed2,
                ffn_pre,
                ffn_act,
            });
        }
    }

    let (cls, final_ln) = layer_norm(&x[..h], h, &params.final_ln_gain.data, &params.final_ln_bias.data);
    let pooled: Vec<S> = linear(&cls, &params.pooler, &params.pooler_bias)
        .into_iter()
        .map(S::tanh)
        .collect();
    check_finite(&pooled, || "pooler".into())?;

    let feature: Vec<S> = f_out.iter().map(|&v| S::of(v)).collect();
    let processed = linear(&feature, &params.feature_proj, &params.feature_bias);
    check_finite(&processed, || "feature layer".into())?;

    let mut concat = pooled.clone();
    concat.extend_from_slice(&processed);
    let dropout = match mode {
        Mode::Eval => vec![S::one(); 2 * h],
        Mode::Train(m) => m.0.clone(),
    };
    let dropped: Vec<S> = concat.iter().zip(&dropout).map(|(&c, &m)| c * m).collect();
    let lv = linear(&dropped, &params.classifier, &params.classifier_bias);
    check_finite(&lv, || "classifier".into())?;
    let logits = [lv[0], lv[1]];
    let prob = softmax(&logits)[1];

    let trace = keep_trace.then(|| ForwardTrace {
        ids,
        positions,
        edges,
        layers: layer_traces,
        final_ln,
        cls,
        pooled,
        feature,
        processed,
        concat,
        dropout,
        dropped,
        logits,
    });
    Ok(ForwardOutput { logits, prob, trace })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<S> {
    pub prob: S,
    pub label: u8,
}

/// Clone probability and hard label at the inclusive 0.5 threshold.
pub fn predict<S: Scalar>(
    params: &Parameters<S>,
    cfg: &ModelConfig,
    encoded: &EncodedPair,
    f_out: &[f64],
) -> Result<Prediction<S>> {
    let out = forward(params, cfg, encoded, f_out, Mode::Eval, false)?;
    Ok(prediction_from_logits(&out.logits))
}

pub fn prediction_from_logits<S: Scalar>(logits: &[S; 2]) -> Prediction<S> {
    let prob = softmax(logits)[1];
    Prediction {
        prob,
        label: u8::from(prob >= S::of(0.5)),
    }
}
