//! Training-path forward and hand-derived backward for the full
//! encoder-decoder stack (post-norm residual layout, ReLU feed-forward,
//! tied output projection by default).
//!
//! Sequences are processed one sentence at a time, so no padding ever enters
//! the math; batching is just gradient accumulation in sentence order.

use crate::data::{BOS_ID, EOS_ID};
use crate::error::{Error, Result};
use crate::model::attention::{attn_backward, attn_forward, AttnCache};
use crate::model::{FfnParams, LnParams, ModelParams};
use crate::numerics::tensor::{matmul, matmul_acc, matmul_at_acc, matmul_bt};
use crate::numerics::{
    label_smoothed_loss, layer_norm_backward, layer_norm_forward, LnCache, Scalar, Tensor,
};

pub(crate) struct FfnCache<F: Scalar> {
    x: Tensor<F>,
    act: Tensor<F>,
}

pub(crate) fn ffn_forward<F: Scalar>(
    params: &FfnParams<F>,
    x: &Tensor<F>,
) -> (Tensor<F>, FfnCache<F>) {
    let t = x.rows();
    let d = params.w1.rows();
    let dff = params.w1.cols();
    let mut act = Tensor::zeros(&[t, dff]);
    matmul(x.data(), params.w1.data(), t, d, dff, act.data_mut());
    for i in 0..t {
        for (a, &b) in act.row_mut(i).iter_mut().zip(params.b1.data()) {
            let v = *a + b;
            *a = if v > F::ZERO { v } else { F::ZERO };
        }
    }
    let mut out = Tensor::zeros(&[t, d]);
    matmul(act.data(), params.w2.data(), t, dff, d, out.data_mut());
    for i in 0..t {
        for (o, &b) in out.row_mut(i).iter_mut().zip(params.b2.data()) {
            *o += b;
        }
    }
    (out, FfnCache { x: x.clone(), act })
}

pub(crate) fn ffn_backward<F: Scalar>(
    params: &FfnParams<F>,
    cache: &FfnCache<F>,
    dy: &Tensor<F>,
    grads: &mut FfnParams<F>,
    dx: &mut Tensor<F>,
) {
    let t = cache.x.rows();
    let d = params.w1.rows();
    let dff = params.w1.cols();
    matmul_at_acc(cache.act.data(), dy.data(), t, dff, d, grads.w2.data_mut());
    for i in 0..t {
        for (g, &v) in grads.b2.data_mut().iter_mut().zip(dy.row(i)) {
            *g += v;
        }
    }
    let mut dact = Tensor::zeros(&[t, dff]);
    matmul_bt(dy.data(), params.w2.data(), t, d, dff, dact.data_mut());
    // relu gate: act > 0 exactly where pre-activation was positive
    for (da, &a) in dact.data_mut().iter_mut().zip(cache.act.data()) {
        if a <= F::ZERO {
            *da = F::ZERO;
        }
    }
    matmul_at_acc(cache.x.data(), dact.data(), t, d, dff, grads.w1.data_mut());
    for i in 0..t {
        for (g, &v) in grads.b1.data_mut().iter_mut().zip(dact.row(i)) {
            *g += v;
        }
    }
    matmul_acc(
        dact.data(),
        &transpose(params.w1.data(), d, dff),
        t,
        dff,
        d,
        dx.data_mut(),
    );
}

fn transpose<F: Scalar>(m: &[F], rows: usize, cols: usize) -> Vec<F> {
    let mut t = vec![F::ZERO; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

pub(crate) fn ln_rows_forward<F: Scalar>(
    ln: &LnParams<F>,
    x: &Tensor<F>,
) -> (Tensor<F>, Vec<LnCache<F>>) {
    let t = x.rows();
    let mut out = Tensor::zeros(&[t, x.cols()]);
    let mut caches = Vec::with_capacity(t);
    for i in 0..t {
        let mut c = LnCache::default();
        layer_norm_forward(
            x.row(i),
            ln.gain.data(),
            ln.bias.data(),
            out.row_mut(i),
            &mut c,
        );
        caches.push(c);
    }
    (out, caches)
}

#[allow(clippy::needless_range_loop)]
pub(crate) fn ln_rows_backward<F: Scalar>(
    ln: &LnParams<F>,
    caches: &[LnCache<F>],
    dy: &Tensor<F>,
    grads: &mut LnParams<F>,
    dx: &mut Tensor<F>,
) {
    for i in 0..dy.rows() {
        layer_norm_backward(
            dy.row(i),
            ln.gain.data(),
            &caches[i],
            dx.row_mut(i),
            grads.gain.data_mut(),
            grads.bias.data_mut(),
        );
    }
}

pub(crate) struct EncLayerTrace<F: Scalar> {
    attn: AttnCache<F>,
    ln1: Vec<LnCache<F>>,
    ffn: FfnCache<F>,
    ln2: Vec<LnCache<F>>,
}

pub(crate) struct EncTrace<F: Scalar> {
    layers: Vec<EncLayerTrace<F>>,
}

pub(crate) struct DecLayerTrace<F: Scalar> {
    self_attn: AttnCache<F>,
    ln1: Vec<LnCache<F>>,
    cross: AttnCache<F>,
    ln2: Vec<LnCache<F>>,
    ffn: FfnCache<F>,
    ln3: Vec<LnCache<F>>,
}

pub(crate) struct DecTrace<F: Scalar> {
    layers: Vec<DecLayerTrace<F>>,
}

impl<F: Scalar> ModelParams<F> {
    fn embed(&self, table: &Tensor<F>, ids: &[u32]) -> Tensor<F> {
        let d = self.config.d_model;
        let scale = F::from_f64((d as f64).sqrt());
        let mut x = Tensor::zeros(&[ids.len(), d]);
        for (i, &tok) in ids.iter().enumerate() {
            let row = x.row_mut(i);
            for ((o, &e), &p) in row
                .iter_mut()
                .zip(table.row(tok as usize))
                .zip(self.pos_enc.row(i))
            {
                *o = e * scale + p;
            }
        }
        x
    }

    fn check_ids(&self, ids: &[u32], vocab: usize, what: &str) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::invalid_argument(format!("{what} sequence is empty")));
        }
        if ids.len() > self.config.max_len {
            return Err(Error::invalid_argument(format!(
                "{what} length {} exceeds max_len {}",
                ids.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::invalid_argument(format!(
                "{what} token {bad} outside vocabulary of size {vocab}"
            )));
        }
        Ok(())
    }

    pub(crate) fn encode_traced(&self, src: &[u32]) -> Result<(Tensor<F>, EncTrace<F>)> {
        self.check_ids(src, self.config.vocab_src, "source")?;
        let mut x = self.embed(&self.src_embed, src);
        let mut layers = Vec::with_capacity(self.enc_layers.len());
        for l in &self.enc_layers {
            let (a_out, attn) = attn_forward(&l.self_attn, self.config.n_heads, &x, &x, false);
            let mut r1 = x;
            for (r, &a) in r1.data_mut().iter_mut().zip(a_out.data()) {
                *r += a;
            }
            let (x1, ln1) = ln_rows_forward(&l.ln1, &r1);
            let (f_out, ffn) = ffn_forward(&l.ffn, &x1);
            let mut r2 = x1.clone();
            for (r, &a) in r2.data_mut().iter_mut().zip(f_out.data()) {
                *r += a;
            }
            let (y, ln2) = ln_rows_forward(&l.ln2, &r2);
            layers.push(EncLayerTrace {
                attn,
                ln1,
                ffn,
                ln2,
            });
            x = y;
        }
        Ok((x, EncTrace { layers }))
    }

    /// Encoder memory for a prepared source sequence. Deterministic.
    pub fn encode(&self, src: &[u32]) -> Result<Tensor<F>> {
        Ok(self.encode_traced(src)?.0)
    }

    pub(crate) fn decode_traced(
        &self,
        tgt_in: &[u32],
        memory: &Tensor<F>,
    ) -> Result<(Tensor<F>, DecTrace<F>)> {
        self.check_ids(tgt_in, self.config.vocab_tgt, "target")?;
        let mut x = self.embed(&self.tgt_embed, tgt_in);
        let mut layers = Vec::with_capacity(self.dec_layers.len());
        for l in &self.dec_layers {
            let (a_out, self_attn) = attn_forward(&l.self_attn, self.config.n_heads, &x, &x, true);
            let mut r1 = x;
            for (r, &a) in r1.data_mut().iter_mut().zip(a_out.data()) {
                *r += a;
            }
            let (x1, ln1) = ln_rows_forward(&l.ln1, &r1);
            let (c_out, cross) =
                attn_forward(&l.cross_attn, self.config.n_heads, &x1, memory, false);
            let mut r2 = x1.clone();
            for (r, &a) in r2.data_mut().iter_mut().zip(c_out.data()) {
                *r += a;
            }
            let (x2, ln2) = ln_rows_forward(&l.ln2, &r2);
            let (f_out, ffn) = ffn_forward(&l.ffn, &x2);
            let mut r3 = x2.clone();
            for (r, &a) in r3.data_mut().iter_mut().zip(f_out.data()) {
                *r += a;
            }
            let (y, ln3) = ln_rows_forward(&l.ln3, &r3);
            layers.push(DecLayerTrace {
                self_attn,
                ln1,
                cross,
                ln2,
                ffn,
                ln3,
            });
            x = y;
        }
        Ok((x, DecTrace { layers }))
    }

    /// Next-token logits for every position of `hidden`.
    pub fn logits_from_hidden(&self, hidden: &Tensor<F>) -> Tensor<F> {
        let t = hidden.rows();
        let d = self.config.d_model;
        let v = self.config.vocab_tgt;
        let table = self.out_proj.as_ref().unwrap_or(&self.tgt_embed);
        let mut logits = Tensor::zeros(&[t, v]);
        matmul_bt(hidden.data(), table.data(), t, d, v, logits.data_mut());
        logits
    }

    /// Teacher-forced log-probability of emitting exactly `seq` given `src`
    /// (no implicit EOS). Runs the full non-incremental decoder; the beam
    /// search path never calls this, which makes it a second, independent
    /// route to the same quantity.
    pub fn score_prefix(&self, src: &[u32], seq: &[u32]) -> Result<f64> {
        if seq.is_empty() {
            return Ok(0.0);
        }
        let memory = self.encode(src)?;
        let mut tgt_in = Vec::with_capacity(seq.len());
        tgt_in.push(BOS_ID);
        tgt_in.extend_from_slice(&seq[..seq.len() - 1]);
        let (hidden, _) = self.decode_traced(&tgt_in, &memory)?;
        let logits = self.logits_from_hidden(&hidden);
        let mut total = 0.0;
        for (i, &want) in seq.iter().enumerate() {
            let lp = crate::numerics::log_softmax(logits.row(i));
            total += lp[want as usize].to_f64();
        }
        Ok(total)
    }

    /// Log-probability of `tgt` followed by EOS.
    pub fn score_sequence(&self, src: &[u32], tgt: &[u32]) -> Result<f64> {
        let mut seq = tgt.to_vec();
        seq.push(EOS_ID);
        self.score_prefix(src, &seq)
    }

    /// Mean label-smoothed loss over all target positions of the batch, and
    /// gradients for every parameter.
    pub fn forward_loss(
        &self,
        batch: &[(Vec<u32>, Vec<u32>)],
        smoothing: f64,
    ) -> Result<(f64, ModelParams<F>)> {
        if batch.is_empty() {
            return Err(Error::invalid_argument("forward_loss on empty batch"));
        }
        let total_pos: usize = batch.iter().map(|(_, t)| t.len() + 1).sum();
        let inv = F::from_f64(1.0 / total_pos as f64);
        let mut grads = self.zeros_like();
        let mut total_loss = 0.0f64;
        for (src, tgt) in batch {
            if tgt.len() + 1 > self.config.max_len {
                return Err(Error::invalid_argument(format!(
                    "target length {} exceeds max_len {}",
                    tgt.len() + 1,
                    self.config.max_len
                )));
            }
            let (memory, enc_trace) = self.encode_traced(src)?;
            let mut tgt_in = Vec::with_capacity(tgt.len() + 1);
            tgt_in.push(BOS_ID);
            tgt_in.extend_from_slice(tgt);
            let (hidden, dec_trace) = self.decode_traced(&tgt_in, &memory)?;
            let logits = self.logits_from_hidden(&hidden);

            let t = tgt_in.len();
            let v = self.config.vocab_tgt;
            let mut dlogits = Tensor::zeros(&[t, v]);
            for (i, &want) in tgt.iter().chain(std::iter::once(&EOS_ID)).enumerate() {
                let (loss, grad) = label_smoothed_loss(logits.row(i), want as usize, smoothing)?;
                total_loss += loss.to_f64();
                for (o, g) in dlogits.row_mut(i).iter_mut().zip(grad) {
                    *o = g * inv;
                }
            }

            // logits = hidden @ table^T
            let d = self.config.d_model;
            let mut d_hidden = Tensor::zeros(&[t, d]);
            {
                let table = self.out_proj.as_ref().unwrap_or(&self.tgt_embed);
                matmul(dlogits.data(), table.data(), t, v, d, d_hidden.data_mut());
                let g_table = grads.out_proj.as_mut().unwrap_or(&mut grads.tgt_embed);
                matmul_at_acc(dlogits.data(), hidden.data(), t, v, d, g_table.data_mut());
            }

            let mut d_memory = Tensor::zeros(&[memory.rows(), d]);
            let dx0_dec = self.backward_decoder(&dec_trace, d_hidden, &mut grads, &mut d_memory);
            self.embed_backward(&mut grads.tgt_embed, &tgt_in, &dx0_dec);
            let dx0_enc = self.backward_encoder(&enc_trace, d_memory, &mut grads);
            self.embed_backward(&mut grads.src_embed, src, &dx0_enc);
        }
        Ok((total_loss / total_pos as f64, grads))
    }

    fn embed_backward(&self, g_table: &mut Tensor<F>, ids: &[u32], dx0: &Tensor<F>) {
        let scale = F::from_f64((self.config.d_model as f64).sqrt());
        for (i, &tok) in ids.iter().enumerate() {
            for (g, &dv) in g_table.row_mut(tok as usize).iter_mut().zip(dx0.row(i)) {
                *g += dv * scale;
            }
        }
    }

    fn backward_encoder(
        &self,
        trace: &EncTrace<F>,
        mut dy: Tensor<F>,
        grads: &mut ModelParams<F>,
    ) -> Tensor<F> {
        for (li, l) in self.enc_layers.iter().enumerate().rev() {
            let tr = &trace.layers[li];
            let g = &mut grads.enc_layers[li];
            let mut dr2 = Tensor::zeros(&[dy.rows(), dy.cols()]);
            ln_rows_backward(&l.ln2, &tr.ln2, &dy, &mut g.ln2, &mut dr2);
            let mut dx1 = dr2.clone();
            ffn_backward(&l.ffn, &tr.ffn, &dr2, &mut g.ffn, &mut dx1);
            let mut dr1 = Tensor::zeros(&[dy.rows(), dy.cols()]);
            ln_rows_backward(&l.ln1, &tr.ln1, &dx1, &mut g.ln1, &mut dr1);
            let mut dx = dr1.clone();
            let mut dx_kv = Tensor::zeros(&[dy.rows(), dy.cols()]);
            attn_backward(
                &l.self_attn,
                self.config.n_heads,
                &tr.attn,
                &dr1,
                &mut g.self_attn,
                &mut dx,
                &mut dx_kv,
            );
            for (a, &b) in dx.data_mut().iter_mut().zip(dx_kv.data()) {
                *a += b;
            }
            dy = dx;
        }
        dy
    }

    fn backward_decoder(
        &self,
        trace: &DecTrace<F>,
        mut dy: Tensor<F>,
        grads: &mut ModelParams<F>,
        d_memory: &mut Tensor<F>,
    ) -> Tensor<F> {
        for (li, l) in self.dec_layers.iter().enumerate().rev() {
            let tr = &trace.layers[li];
            let g = &mut grads.dec_layers[li];
            let mut dr3 = Tensor::zeros(&[dy.rows(), dy.cols()]);
            ln_rows_backward(&l.ln3, &tr.ln3, &dy, &mut g.ln3, &mut dr3);
            let mut dx2 = dr3.clone();
            ffn_backward(&l.ffn, &tr.ffn, &dr3, &mut g.ffn, &mut dx2);
            let mut dr2 = Tensor::zeros(&[dy.rows(), dy.cols()]);
            ln_rows_backward(&l.ln2, &tr.ln2, &dx2, &mut g.ln2, &mut dr2);
            let mut dx1 = dr2.clone();
            attn_backward(
                &l.cross_attn,
                self.config.n_heads,
                &tr.cross,
                &dr2,
                &mut g.cross_attn,
                &mut dx1,
                d_memory,
            );
            let mut dr1 = Tensor::zeros(&[dy.rows(), dy.cols()]);
            ln_rows_backward(&l.ln1, &tr.ln1, &dx1, &mut g.ln1, &mut dr1);
            let mut dx = dr1.clone();
            let mut dx_kv = Tensor::zeros(&[dy.rows(), dy.cols()]);
            attn_backward(
                &l.self_attn,
                self.config.n_heads,
                &tr.self_attn,
                &dr1,
                &mut g.self_attn,
                &mut dx,
                &mut dx_kv,
            );
            for (a, &b) in dx.data_mut().iter_mut().zip(dx_kv.data()) {
                *a += b;
            }
            dy = dx;
        }
        dy
    }
}
