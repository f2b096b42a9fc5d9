//! Central-difference verification of [`super::backward`].

use rand::distributions::{Distribution, Uniform};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::forward::{forward, DropoutMask, Mode};
use super::loss::cross_entropy;
use super::params::Parameters;
use super::backward::backward;
use crate::codeparse::{EncodedPair, CLS, NUM_SPECIALS, PAD, SEP};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::seed::derive_seed;

pub const FD_STEP: f64 = 1e-5;
pub const COORDS_PER_PROBE: usize = 256;
/// Absolute floor in the relative-error denominator, so coordinates whose true
/// gradient is ~0 are judged on absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub pass: bool,
    pub probes: usize,
    pub coords_checked: usize,
    /// Parameter tensor holding the worst coordinate.
    pub worst_tensor: Option<String>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// A random, fully attended-prefix pair encoding for `cfg`.
pub fn random_encoding<R: Rng>(rng: &mut R, cfg: &ModelConfig) -> EncodedPair {
    let budget = cfg.max_len - 3;
    let total = rng.gen_range(1..=budget);
    let len_a = rng.gen_range(0..=total);
    let len_b = total - len_a;
    let mut tok = || rng.gen_range(NUM_SPECIALS as u32..cfg.vocab_size as u32);
    let mut ids = vec![CLS];
    ids.extend((0..len_a).map(|_| tok()));
    ids.push(SEP);
    ids.extend((0..len_b).map(|_| tok()));
    ids.push(SEP);
    let used = ids.len();
    ids.resize(cfg.max_len, PAD);
    let mut mask = vec![0u8; cfg.max_len];
    mask[..used].fill(1);
    let mut dataflow = Vec::new();
    if total >= 2 {
        for _ in 0..rng.gen_range(1..=3) {
            let d = rng.gen_range(1..used - 2);
            let u = rng.gen_range(d + 1..used - 1);
            dataflow.push((d, u));
        }
    }
    EncodedPair {
        input_ids: ids,
        attention_mask: mask,
        dataflow,
    }
}

/// Runs `n_probes` random (parameters, input, feature, label) tuples and compares
/// analytic gradients against central differences on a random coordinate subset.
/// With `dropout_p > 0` a training-mode mask is sampled once per probe and held fixed.
pub fn gradient_check<S: Scalar>(cfg: &ModelConfig, seed: u64, n_probes: usize, tol: f64) -> Result<GradCheckReport> {
    cfg.validate()?;
    let names = Parameters::<S>::names(cfg);
    let mut sizes = Vec::new();
    Parameters::<S>::zeros(cfg).for_each(|_, t| sizes.push(t.len()));
    let tensor_of = |mut idx: usize| {
        for (name, &len) in names.iter().zip(&sizes) {
            if idx < len {
                return name.clone();
            }
            idx -= len;
        }
        unreachable!("flat index within parameter count")
    };

    let step = S::of(FD_STEP);
    let two_step = S::of(2.0 * FD_STEP);
    let mut max_rel = 0.0f64;
    let mut worst = None;
    let mut checked = 0;

    for probe in 0..n_probes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gradcheck", probe as u64));
        let probe_cfg = ModelConfig {
            seed: rng.gen(),
            ..cfg.clone()
        };
        let mut params: Parameters<S> = Parameters::init(&probe_cfg)?;
        // Nudge everything off its init so zero biases and unit gains are exercised too.
        let jitter = Uniform::new_inclusive(-0.1, 0.1);
        params.for_each_mut(|_, t| {
            for v in &mut t.data {
                *v += S::of(jitter.sample(&mut rng));
            }
        });
        let enc = random_encoding(&mut rng, cfg);
        let f_out: Vec<f64> = (0..cfg.feature_dim).map(|_| rng.gen()).collect();
        let label: u8 = rng.gen_range(0..=1);
        let mask = DropoutMask::sample(&mut rng, 2 * cfg.hidden_size, cfg.dropout_p);
        let mode = if cfg.dropout_p > 0.0 { Mode::Train(&mask) } else { Mode::Eval };

        let loss_at = |p: &Parameters<S>| -> Result<S> {
            let out = forward(p, cfg, &enc, &f_out, mode, false)?;
            cross_entropy(&out.logits, label)
        };

        let out = forward(&params, cfg, &enc, &f_out, mode, true)?;
        let grads = backward(&params, cfg, out.trace.as_ref(), label)?.flatten();

        let total = grads.len();
        let k = COORDS_PER_PROBE.min(total);
        for idx in sample(&mut rng, total, k).into_iter() {
            let orig = params.get_flat(idx);
            params.set_flat(idx, orig + step);
            let up = loss_at(&params)?;
            params.set_flat(idx, orig - step);
            let down = loss_at(&params)?;
            params.set_flat(idx, orig);
            let numeric = ((up - down) / two_step).as_f64();
            let rel = relative_error(grads[idx].as_f64(), numeric);
            if rel > max_rel || worst.is_none() {
                max_rel = max_rel.max(rel);
                worst = Some(tensor_of(idx));
            }
            checked += 1;
        }
    }

    Ok(GradCheckReport {
        max_rel_err: max_rel,
        pass: n_probes > 0 && max_rel < tol,
        probes: n_probes,
        coords_checked: checked,
        worst_tensor: worst,
    })
}
