//! Multi-head scaled dot-product attention with weight extraction and
//! post-softmax override hooks.
//!
//! Heads are column blocks of the shared projection matrices. Every forward
//! exposes the per-head weight rows; an optional [`HeadOverride`] replaces
//! those rows after the softmax (each head still applies its own value
//! projection to the shared rows), which is the mechanism behind
//! head-sampled decoding.

use crate::error::{Error, Result};
use crate::numerics::tensor::{matmul, matmul_at_acc, matmul_bt};
use crate::numerics::{softmax_backward, softmax_in_place, Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct AttentionParams<F: Scalar> {
    pub wq: Tensor<F>,
    pub wk: Tensor<F>,
    pub wv: Tensor<F>,
    pub wo: Tensor<F>,
}

impl<F: Scalar> AttentionParams<F> {
    pub fn cast<G: Scalar>(&self) -> AttentionParams<G> {
        AttentionParams {
            wq: self.wq.cast(),
            wk: self.wk.cast(),
            wv: self.wv.cast(),
            wo: self.wo.cast(),
        }
    }
}

/// Attention weights of one head over one query span: `weights[t][i]` is the
/// weight from target step t to source position i. Rows are stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub layer: usize,
    pub head: usize,
    pub weights: Vec<Vec<f64>>,
}

impl AttentionRecord {
    pub fn rows_stochastic(&self, tol: f64) -> bool {
        self.weights.iter().all(|r| row_is_stochastic(r, tol))
    }
}

pub fn row_is_stochastic(row: &[f64], tol: f64) -> bool {
    if row.is_empty() {
        return false;
    }
    let sum: f64 = row.iter().sum();
    row.iter().all(|&w| w >= -tol) && (sum - 1.0).abs() <= tol
}

/// Replacement weight rows for every head of one decoder layer's
/// cross-attention, applied after the softmax.
#[derive(Debug, Clone)]
pub struct HeadOverride {
    /// Decoder layer index the override applies to.
    pub layer: usize,
    /// One probability row over source positions per head.
    pub rows: Vec<Vec<f64>>,
}

impl HeadOverride {
    /// Copies a single head's row to all `n_heads` heads.
    pub fn broadcast(layer: usize, row: Vec<f64>, n_heads: usize) -> Self {
        HeadOverride {
            layer,
            rows: vec![row; n_heads],
        }
    }

    pub fn validate(&self, n_heads: usize, src_len: usize) -> Result<()> {
        if self.rows.len() != n_heads {
            return Err(Error::invalid_argument(format!(
                "override has {} rows for {} heads",
                self.rows.len(),
                n_heads
            )));
        }
        for (h, row) in self.rows.iter().enumerate() {
            if row.len() != src_len {
                return Err(Error::invalid_argument(format!(
                    "override row {h} has length {} for source length {src_len}",
                    row.len()
                )));
            }
            if !row_is_stochastic(row, 1e-4) {
                return Err(Error::invalid_argument(format!(
                    "override row {h} is not a probability vector"
                )));
            }
        }
        Ok(())
    }
}

/// Copies the column block `[col0, col0+width)` of a `rows x cols` matrix.
pub(crate) fn copy_cols<F: Scalar>(
    src: &[F],
    cols: usize,
    col0: usize,
    width: usize,
    dst: &mut [F],
) {
    let rows = src.len() / cols;
    debug_assert_eq!(dst.len(), rows * width);
    for r in 0..rows {
        dst[r * width..(r + 1) * width]
            .copy_from_slice(&src[r * cols + col0..r * cols + col0 + width]);
    }
}

pub(crate) fn add_cols<F: Scalar>(
    dst: &mut [F],
    cols: usize,
    col0: usize,
    width: usize,
    src: &[F],
) {
    let rows = dst.len() / cols;
    debug_assert_eq!(src.len(), rows * width);
    for r in 0..rows {
        for c in 0..width {
            dst[r * cols + col0 + c] += src[r * width + c];
        }
    }
}

/// Everything the backward pass needs from a training-time forward.
#[derive(Debug, Clone)]
pub struct AttnCache<F: Scalar> {
    pub x_q: Tensor<F>,
    pub x_kv: Tensor<F>,
    pub q: Tensor<F>,
    pub k: Tensor<F>,
    pub v: Tensor<F>,
    /// Per-head post-softmax weights, each `[t_q x t_k]`.
    pub weights: Vec<Tensor<F>>,
    pub ctx: Tensor<F>,
}

/// Full-sequence attention used by the training path. `causal` restricts
/// query position i to key positions <= i.
pub fn attn_forward<F: Scalar>(
    params: &AttentionParams<F>,
    n_heads: usize,
    x_q: &Tensor<F>,
    x_kv: &Tensor<F>,
    causal: bool,
) -> (Tensor<F>, AttnCache<F>) {
    let d = params.wq.cols();
    let dk = d / n_heads;
    let tq = x_q.rows();
    let tk = x_kv.rows();
    let scale = F::from_f64(1.0 / (dk as f64).sqrt());

    let mut q = Tensor::zeros(&[tq, d]);
    let mut k = Tensor::zeros(&[tk, d]);
    let mut v = Tensor::zeros(&[tk, d]);
    matmul(x_q.data(), params.wq.data(), tq, d, d, q.data_mut());
    matmul(x_kv.data(), params.wk.data(), tk, d, d, k.data_mut());
    matmul(x_kv.data(), params.wv.data(), tk, d, d, v.data_mut());

    let mut weights = Vec::with_capacity(n_heads);
    let mut ctx = Tensor::zeros(&[tq, d]);
    let mut qh = vec![F::ZERO; tq * dk];
    let mut kh = vec![F::ZERO; tk * dk];
    let mut vh = vec![F::ZERO; tk * dk];
    let mut ch = vec![F::ZERO; tq * dk];
    for h in 0..n_heads {
        copy_cols(q.data(), d, h * dk, dk, &mut qh);
        copy_cols(k.data(), d, h * dk, dk, &mut kh);
        copy_cols(v.data(), d, h * dk, dk, &mut vh);
        let mut w = Tensor::zeros(&[tq, tk]);
        matmul_bt(&qh, &kh, tq, dk, tk, w.data_mut());
        for i in 0..tq {
            let row = w.row_mut(i);
            for (j, x) in row.iter_mut().enumerate() {
                *x = if causal && j > i {
                    F::neg_infinity()
                } else {
                    *x * scale
                };
            }
            softmax_in_place(row);
        }
        matmul(w.data(), &vh, tq, tk, dk, &mut ch);
        add_cols(ctx.data_mut(), d, h * dk, dk, &ch);
        weights.push(w);
    }

    let mut out = Tensor::zeros(&[tq, d]);
    matmul(ctx.data(), params.wo.data(), tq, d, d, out.data_mut());
    let cache = AttnCache {
        x_q: x_q.clone(),
        x_kv: x_kv.clone(),
        q,
        k,
        v,
        weights,
        ctx,
    };
    (out, cache)
}

/// Backward for [`attn_forward`]. Writes input gradients into `dx_q`/`dx_kv`
/// (accumulating) and parameter gradients into `grads`.
pub fn attn_backward<F: Scalar>(
    params: &AttentionParams<F>,
    n_heads: usize,
    cache: &AttnCache<F>,
    d_out: &Tensor<F>,
    grads: &mut AttentionParams<F>,
    dx_q: &mut Tensor<F>,
    dx_kv: &mut Tensor<F>,
) {
    let d = params.wq.cols();
    let dk = d / n_heads;
    let tq = cache.x_q.rows();
    let tk = cache.x_kv.rows();
    let scale = F::from_f64(1.0 / (dk as f64).sqrt());

    // out = ctx @ wo
    let mut d_ctx = Tensor::zeros(&[tq, d]);
    matmul_bt(d_out.data(), params.wo.data(), tq, d, d, d_ctx.data_mut());
    matmul_at_acc(
        cache.ctx.data(),
        d_out.data(),
        tq,
        d,
        d,
        grads.wo.data_mut(),
    );

    let mut dq = Tensor::zeros(&[tq, d]);
    let mut dk_full = Tensor::zeros(&[tk, d]);
    let mut dv = Tensor::zeros(&[tk, d]);

    let mut kh = vec![F::ZERO; tk * dk];
    let mut vh = vec![F::ZERO; tk * dk];
    let mut qh = vec![F::ZERO; tq * dk];
    let mut dch = vec![F::ZERO; tq * dk];
    let mut dwh = vec![F::ZERO; tq * tk];
    let mut dsh = vec![F::ZERO; tq * tk];
    let mut dqh = vec![F::ZERO; tq * dk];
    let mut dkh = vec![F::ZERO; tk * dk];
    let mut dvh = vec![F::ZERO; tk * dk];
    for h in 0..n_heads {
        copy_cols(cache.q.data(), d, h * dk, dk, &mut qh);
        copy_cols(cache.k.data(), d, h * dk, dk, &mut kh);
        copy_cols(cache.v.data(), d, h * dk, dk, &mut vh);
        copy_cols(d_ctx.data(), d, h * dk, dk, &mut dch);
        let w = &cache.weights[h];

        // ctx_h = w @ v_h
        matmul_bt(&dch, &vh, tq, dk, tk, &mut dwh);
        dvh.iter_mut().for_each(|x| *x = F::ZERO);
        matmul_at_acc(w.data(), &dch, tq, tk, dk, &mut dvh);

        // softmax rows, then the 1/sqrt(dk) scale
        for i in 0..tq {
            softmax_backward(
                w.row(i),
                &dwh[i * tk..(i + 1) * tk],
                &mut dsh[i * tk..(i + 1) * tk],
            );
            for x in &mut dsh[i * tk..(i + 1) * tk] {
                *x *= scale;
            }
        }

        // s = q_h @ k_h^T
        matmul(&dsh, &kh, tq, tk, dk, &mut dqh);
        dkh.iter_mut().for_each(|x| *x = F::ZERO);
        matmul_at_acc(&dsh, &qh, tq, tk, dk, &mut dkh);

        add_cols(dq.data_mut(), d, h * dk, dk, &dqh);
        add_cols(dk_full.data_mut(), d, h * dk, dk, &dkh);
        add_cols(dv.data_mut(), d, h * dk, dk, &dvh);
    }

    // projections
    matmul_at_acc(cache.x_q.data(), dq.data(), tq, d, d, grads.wq.data_mut());
    matmul_at_acc(
        cache.x_kv.data(),
        dk_full.data(),
        tk,
        d,
        d,
        grads.wk.data_mut(),
    );
    matmul_at_acc(cache.x_kv.data(), dv.data(), tk, d, d, grads.wv.data_mut());
    let mut tmp_q = vec![F::ZERO; tq * d];
    matmul_bt(dq.data(), params.wq.data(), tq, d, d, &mut tmp_q);
    for (a, b) in dx_q.data_mut().iter_mut().zip(&tmp_q) {
        *a += *b;
    }
    let mut tmp_kv = vec![F::ZERO; tk * d];
    matmul_bt(dk_full.data(), params.wk.data(), tk, d, d, &mut tmp_kv);
    for (a, b) in dx_kv.data_mut().iter_mut().zip(&tmp_kv) {
        *a += *b;
    }
    matmul_bt(dv.data(), params.wv.data(), tk, d, d, &mut tmp_kv);
    for (a, b) in dx_kv.data_mut().iter_mut().zip(&tmp_kv) {
        *a += *b;
    }
}

/// Standalone multi-head attention with optional key masking and a
/// post-softmax override. Returns the context and one record per head.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_attention<F: Scalar>(
    params: &AttentionParams<F>,
    n_heads: usize,
    layer: usize,
    queries: &Tensor<F>,
    keys: &Tensor<F>,
    values: &Tensor<F>,
    key_mask: Option<&[bool]>,
    override_: Option<&HeadOverride>,
) -> Result<(Tensor<F>, Vec<AttentionRecord>)> {
    let d = params.wq.cols();
    if queries.cols() != d || keys.cols() != d || values.cols() != d {
        return Err(Error::invalid_argument(format!(
            "attention input width must be {d}: got q={}, k={}, v={}",
            queries.cols(),
            keys.cols(),
            values.cols()
        )));
    }
    if keys.rows() != values.rows() {
        return Err(Error::invalid_argument(
            "keys and values disagree on length",
        ));
    }
    if let Some(m) = key_mask {
        if m.len() != keys.rows() {
            return Err(Error::invalid_argument("mask length must equal key count"));
        }
        if m.iter().all(|&x| x) {
            return Err(Error::invalid_argument("all key positions masked"));
        }
    }
    let dk = d / n_heads;
    let tq = queries.rows();
    let tk = keys.rows();
    let scale = F::from_f64(1.0 / (dk as f64).sqrt());

    let mut q = Tensor::zeros(&[tq, d]);
    let mut k = Tensor::zeros(&[tk, d]);
    let mut v = Tensor::zeros(&[tk, d]);
    matmul(queries.data(), params.wq.data(), tq, d, d, q.data_mut());
    matmul(keys.data(), params.wk.data(), tk, d, d, k.data_mut());
    matmul(values.data(), params.wv.data(), tk, d, d, v.data_mut());

    if let Some(ov) = override_ {
        ov.validate(n_heads, tk)?;
    }

    let mut records = Vec::with_capacity(n_heads);
    let mut ctx = Tensor::zeros(&[tq, d]);
    let mut qh = vec![F::ZERO; tq * dk];
    let mut kh = vec![F::ZERO; tk * dk];
    let mut vh = vec![F::ZERO; tk * dk];
    let mut ch = vec![F::ZERO; tq * dk];
    for h in 0..n_heads {
        copy_cols(q.data(), d, h * dk, dk, &mut qh);
        copy_cols(k.data(), d, h * dk, dk, &mut kh);
        copy_cols(v.data(), d, h * dk, dk, &mut vh);
        let mut w = Tensor::zeros(&[tq, tk]);
        matmul_bt(&qh, &kh, tq, dk, tk, w.data_mut());
        for i in 0..tq {
            let row = w.row_mut(i);
            for (j, x) in row.iter_mut().enumerate() {
                let masked = key_mask.is_some_and(|m| m[j]);
                *x = if masked {
                    F::neg_infinity()
                } else {
                    *x * scale
                };
            }
            softmax_in_place(row);
        }
        if let Some(ov) = override_ {
            for i in 0..tq {
                for (x, &r) in w.row_mut(i).iter_mut().zip(&ov.rows[h]) {
                    *x = F::from_f64(r);
                }
            }
        }
        matmul(w.data(), &vh, tq, tk, dk, &mut ch);
        add_cols(ctx.data_mut(), d, h * dk, dk, &ch);
        records.push(AttentionRecord {
            layer,
            head: h,
            weights: (0..tq)
                .map(|i| w.row(i).iter().map(|x| x.to_f64()).collect())
                .collect(),
        });
    }

    let mut out = Tensor::zeros(&[tq, d]);
    matmul(ctx.data(), params.wo.data(), tq, d, d, out.data_mut());
    Ok((out, records))
}
