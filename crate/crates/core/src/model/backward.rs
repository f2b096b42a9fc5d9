//! Reverse-mode gradients of the cross-entropy loss through the whole model.

use super::config::ModelConfig;
use super::forward::{gelu_grad, ForwardTrace, LnCache};
use super::loss::cross_entropy_grad;
use super::params::Parameters;
use super::tensor::{add_col_sums, add_matmul_tn, matmul_nn, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Accumulates `dgain`, `dbias` and returns `dx`.
fn layer_norm_backward<S: Scalar>(
    dy: &[S],
    cache: &LnCache<S>,
    h: usize,
    gain: &[S],
    dgain: &mut [S],
    dbias: &mut [S],
) -> Vec<S> {
    let n = dy.len() / h;
    let hf = S::of(h as f64);
    let mut dx = vec![S::zero(); dy.len()];
    let mut dxhat = vec![S::zero(); h];
    for r in 0..n {
        let dyr = &dy[r * h..(r + 1) * h];
        let xh = &cache.xhat[r * h..(r + 1) * h];
        let mut mean_d = S::zero();
        let mut mean_dx = S::zero();
        for c in 0..h {
            dgain[c] += dyr[c] * xh[c];
            dbias[c] += dyr[c];
            dxhat[c] = dyr[c] * gain[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xh[c];
        }
        mean_d /= hf;
        mean_dx /= hf;
        let is = cache.inv_std[r];
        for c in 0..h {
            dx[r * h + c] = is * (dxhat[c] - mean_d - xh[c] * mean_dx);
        }
    }
    dx
}

/// Backprop through `y = x Wᵀ + b`: accumulates `dW`, `db`, returns `dx`.
fn linear_backward<S: Scalar>(dy: &[S], x: &[S], w: &Tensor<S>, dw: &mut Tensor<S>, db: &mut Tensor<S>) -> Vec<S> {
    let n = dy.len() / w.rows;
    add_matmul_tn(&mut dw.data, dy, x, n, w.rows, w.cols);
    add_col_sums(&mut db.data, dy, w.rows);
    matmul_nn(dy, &w.data, n, w.rows, w.cols)
}

/// Gradients of `cross_entropy(logits, label)` with respect to every parameter,
/// using the dropout mask recorded in the trace.
pub fn backward<S: Scalar>(
    params: &Parameters<S>,
    cfg: &ModelConfig,
    trace: Option<&ForwardTrace<S>>,
    label: u8,
) -> Result<Parameters<S>> {
    let tr = trace.ok_or(Error::MissingTrace)?;
    let mut g = params.zeros_like();
    backward_into(params, cfg, tr, label, &mut g)?;
    Ok(g)
}

/// As [`backward`], but adds into an existing gradient buffer.
pub fn backward_into<S: Scalar>(
    params: &Parameters<S>,
    cfg: &ModelConfig,
    tr: &ForwardTrace<S>,
    label: u8,
    g: &mut Parameters<S>,
) -> Result<()> {
    if label > 1 {
        return Err(Error::Shape(format!("label {label} is not 0 or 1")));
    }
    if tr.layers.len() != params.layers.len() {
        return Err(Error::Shape("trace does not match parameter layers".into()));
    }
    let h = cfg.hidden_size;
    let n = tr.ids.len();

    // Classifier head.
    let dlogits = cross_entropy_grad(&tr.logits, label);
    let ddropped = linear_backward(&dlogits, &tr.dropped, &params.classifier, &mut g.classifier, &mut g.classifier_bias);
    let dconcat: Vec<S> = ddropped.iter().zip(&tr.dropout).map(|(&d, &m)| d * m).collect();
    let (dpooled, dprocessed) = dconcat.split_at(h);

    // Feature layer; its input is data, so the returned dx is discarded.
    linear_backward(dprocessed, &tr.feature, &params.feature_proj, &mut g.feature_proj, &mut g.feature_bias);

    // Pooler: pooled = tanh(z).
    let dz: Vec<S> = dpooled
        .iter()
        .zip(&tr.pooled)
        .map(|(&d, &p)| d * (S::one() - p * p))
        .collect();
    let dcls = linear_backward(&dz, &tr.cls, &params.pooler, &mut g.pooler, &mut g.pooler_bias);
    let dcls_raw = layer_norm_backward(
        &dcls,
        &tr.final_ln,
        h,
        &params.final_ln_gain.data,
        &mut g.final_ln_gain.data,
        &mut g.final_ln_bias.data,
    );

    let mut dx = vec![S::zero(); n * h];
    dx[..h].copy_from_slice(&dcls_raw);

    let heads = cfg.num_heads;
    let dh = cfg.head_dim();
    let scale = S::one() / S::of(dh as f64).sqrt();
    let mut d_df_bias = S::zero();

    for (l, lt) in tr.layers.iter().enumerate().rev() {
        let lp = &params.layers[l];
        let lg = &mut g.layers[l];

        // x_out = x_mid + ffn(LN2(x_mid))
        let dact = linear_backward(&dx, &lt.ffn_act, &lp.ffn_out, &mut lg.ffn_out, &mut lg.ffn_out_bias);
        let dpre: Vec<S> = dact
            .iter()
            .zip(&lt.ffn_pre)
            .map(|(&d, &z)| d * gelu_grad(z))
            .collect();
        let dnormed2 = linear_backward(&dpre, &lt.normed2, &lp.ffn_in, &mut lg.ffn_in, &mut lg.ffn_in_bias);
        let dmid = layer_norm_backward(
            &dnormed2,
            &lt.ln2,
            h,
            &lp.ln2_gain.data,
            &mut lg.ln2_gain.data,
            &mut lg.ln2_bias.data,
        );
        for (a, b) in dx.iter_mut().zip(&dmid) {
            *a += *b;
        }

        // x_mid = x_in + attn(LN1(x_in))
        let dcontext = linear_backward(&dx, &lt.context, &lp.attn_out, &mut lg.attn_out, &mut lg.attn_out_bias);
        let mut dq = vec![S::zero(); n * h];
        let mut dk = vec![S::zero(); n * h];
        let mut dv = vec![S::zero(); n * h];
        let mut dscore = vec![S::zero(); n];
        for hh in 0..heads {
            let off = hh * dh;
            for i in 0..n {
                let p = &lt.probs[(hh * n + i) * n..(hh * n + i + 1) * n];
                let dci = &dcontext[i * h + off..i * h + off + dh];
                // dP_ij = dctx_i · v_j ; dv_j += P_ij dctx_i
                let mut dot = S::zero();
                for j in 0..n {
                    let vj = &lt.v[j * h + off..j * h + off + dh];
                    let mut s = S::zero();
                    for d in 0..dh {
                        s += dci[d] * vj[d];
                        dv[j * h + off + d] += p[j] * dci[d];
                    }
                    dscore[j] = s;
                    dot += s * p[j];
                }
                for j in 0..n {
                    dscore[j] = p[j] * (dscore[j] - dot);
                }
                if let Some(e) = &tr.edges {
                    for j in 0..n {
                        if e[i * n + j] {
                            d_df_bias += dscore[j];
                        }
                    }
                }
                for j in 0..n {
                    let ds = dscore[j] * scale;
                    if ds == S::zero() {
                        continue;
                    }
                    for d in 0..dh {
                        dq[i * h + off + d] += ds * lt.k[j * h + off + d];
                        dk[j * h + off + d] += ds * lt.q[i * h + off + d];
                    }
                }
            }
        }
        let mut dnormed = linear_backward(&dq, &lt.normed, &lp.query, &mut lg.query, &mut lg.query_bias);
        for (dn, (a, b)) in dnormed.iter_mut().zip(
            linear_backward(&dk, &lt.normed, &lp.key, &mut lg.key, &mut lg.key_bias)
                .iter()
                .zip(&linear_backward(&dv, &lt.normed, &lp.value, &mut lg.value, &mut lg.value_bias)),
        ) {
            *dn += *a + *b;
        }
        let din = layer_norm_backward(
            &dnormed,
            &lt.ln1,
            h,
            &lp.ln1_gain.data,
            &mut lg.ln1_gain.data,
            &mut lg.ln1_bias.data,
        );
        for (a, b) in dx.iter_mut().zip(&din) {
            *a += *b;
        }
    }

    if cfg.dataflow_bias {
        g.dataflow_bias.data[0] += d_df_bias;
    }

    for (r, (&id, &p)) in tr.ids.iter().zip(&tr.positions).enumerate() {
        let drow = &dx[r * h..(r + 1) * h];
        for (t, d) in g.token_embedding.row_mut(id).iter_mut().zip(drow) {
            *t += *d;
        }
        for (t, d) in g.position_embedding.row_mut(p).iter_mut().zip(drow) {
            *t += *d;
        }
    }
    Ok(())
}
