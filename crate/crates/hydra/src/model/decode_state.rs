//! Incremental (token-at-a-time) decoding with cached projections.
//!
//! A [`DecodeSession`] owns everything derived from the source sentence:
//! the encoder memory and the per-layer cross-attention key/value
//! projections. A [`DecoderState`] owns one hypothesis' self-attention
//! history and is cheap to clone, which is what beam search does when a
//! hypothesis branches.

use crate::error::{Error, Result};
use crate::model::attention::{AttentionRecord, HeadOverride};
use crate::model::ModelParams;
use crate::numerics::tensor::{dot, matmul};
use crate::numerics::{softmax_in_place, Scalar, Tensor};

#[derive(Debug)]
pub struct DecodeSession<F: Scalar> {
    pub memory: Tensor<F>,
    /// Per decoder layer: memory @ wk / wv of that layer's cross-attention.
    enc_k: Vec<Tensor<F>>,
    enc_v: Vec<Tensor<F>>,
    src_len: usize,
    tag: u64,
}

fn session_tag(src: &[u32]) -> u64 {
    // FNV-1a over the token ids; only used to catch state/session mixups.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &t in src {
        h ^= t as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

impl<F: Scalar> DecodeSession<F> {
    pub fn new(params: &ModelParams<F>, src: &[u32]) -> Result<Self> {
        let memory = params.encode(src)?;
        let d = params.config.d_model;
        let t = memory.rows();
        let mut enc_k = Vec::with_capacity(params.dec_layers.len());
        let mut enc_v = Vec::with_capacity(params.dec_layers.len());
        for l in &params.dec_layers {
            let mut k = Tensor::zeros(&[t, d]);
            let mut v = Tensor::zeros(&[t, d]);
            matmul(memory.data(), l.cross_attn.wk.data(), t, d, d, k.data_mut());
            matmul(memory.data(), l.cross_attn.wv.data(), t, d, d, v.data_mut());
            enc_k.push(k);
            enc_v.push(v);
        }
        Ok(DecodeSession {
            memory,
            enc_k,
            enc_v,
            src_len: t,
            tag: session_tag(src),
        })
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }
}

/// One hypothesis' self-attention history.
#[derive(Debug, Clone)]
pub struct DecoderState<F: Scalar> {
    self_k: Vec<Vec<F>>,
    self_v: Vec<Vec<F>>,
    step: usize,
    tag: u64,
}

impl<F: Scalar> DecoderState<F> {
    pub fn new(session: &DecodeSession<F>, params: &ModelParams<F>) -> Self {
        DecoderState {
            self_k: vec![Vec::new(); params.dec_layers.len()],
            self_v: vec![Vec::new(); params.dec_layers.len()],
            step: 0,
            tag: session.tag,
        }
    }

    /// Number of tokens consumed so far.
    pub fn step(&self) -> usize {
        self.step
    }
}

#[derive(Debug)]
pub struct StepOutput<F: Scalar> {
    /// Next-token logits over the target vocabulary.
    pub logits: Vec<F>,
    /// Cross-attention rows `[layer][head]`, each record holding the single
    /// row for this step (post-override when an override was applied).
    pub cross_attn: Vec<Vec<AttentionRecord>>,
    pub state: DecoderState<F>,
}

/// Advances one hypothesis by one token.
///
/// The returned records expose each head's attention over the source; when
/// `override_` is present its rows replace the computed weights of the
/// selected layer before the context is formed, so the logits change too.
pub fn decode_step<F: Scalar>(
    params: &ModelParams<F>,
    session: &DecodeSession<F>,
    state: &DecoderState<F>,
    prev_token: u32,
    override_: Option<&HeadOverride>,
) -> Result<StepOutput<F>> {
    if state.tag != session.tag {
        return Err(Error::invalid_state(
            "decoder state does not belong to this session",
        ));
    }
    if state.self_k.len() != params.dec_layers.len() {
        return Err(Error::invalid_state("decoder state layer count mismatch"));
    }
    if state.step >= params.config.max_len {
        return Err(Error::invalid_state(format!(
            "decode step {} reached max_len {}",
            state.step, params.config.max_len
        )));
    }
    if prev_token as usize >= params.config.vocab_tgt {
        return Err(Error::invalid_argument(format!(
            "token {prev_token} outside target vocab"
        )));
    }
    if let Some(ov) = override_ {
        if ov.layer >= params.dec_layers.len() {
            return Err(Error::invalid_argument(format!(
                "override layer {} out of range",
                ov.layer
            )));
        }
        ov.validate(params.config.n_heads, session.src_len)?;
    }

    let d = params.config.d_model;
    let heads = params.config.n_heads;
    let dk = d / heads;
    let scale = F::from_f64(1.0 / (dk as f64).sqrt());
    let embed_scale = F::from_f64((d as f64).sqrt());
    let t_prev = state.step;

    // embed the incoming token at position t_prev
    let mut x = vec![F::ZERO; d];
    for ((o, &e), &p) in x
        .iter_mut()
        .zip(params.tgt_embed.row(prev_token as usize))
        .zip(params.pos_enc.row(t_prev))
    {
        *o = e * embed_scale + p;
    }

    let mut new_state = state.clone();
    new_state.step += 1;
    let mut cross_records = Vec::with_capacity(params.dec_layers.len());

    let mut q = vec![F::ZERO; d];
    let mut ctx = vec![F::ZERO; d];
    let mut sub = vec![F::ZERO; d];
    for (li, l) in params.dec_layers.iter().enumerate() {
        // --- masked self-attention over the cached history plus this token
        matmul(&x, l.self_attn.wq.data(), 1, d, d, &mut q);
        let k_cache = &mut new_state.self_k[li];
        let v_cache = &mut new_state.self_v[li];
        let base = k_cache.len();
        k_cache.resize(base + d, F::ZERO);
        v_cache.resize(base + d, F::ZERO);
        {
            let (head, tail) = k_cache.split_at_mut(base);
            debug_assert_eq!(head.len(), t_prev * d);
            matmul(&x, l.self_attn.wk.data(), 1, d, d, tail);
        }
        {
            let (_, tail) = v_cache.split_at_mut(base);
            matmul(&x, l.self_attn.wv.data(), 1, d, d, tail);
        }
        let t_now = t_prev + 1;
        ctx.iter_mut().for_each(|c| *c = F::ZERO);
        let mut scores = vec![F::ZERO; t_now];
        for h in 0..heads {
            let qh = &q[h * dk..(h + 1) * dk];
            for (j, s) in scores.iter_mut().enumerate() {
                let kh = &k_cache[j * d + h * dk..j * d + (h + 1) * dk];
                *s = dot(qh, kh) * scale;
            }
            softmax_in_place(&mut scores);
            for (j, &w) in scores.iter().enumerate() {
                let vh = &v_cache[j * d + h * dk..j * d + (h + 1) * dk];
                for (c, &vv) in ctx[h * dk..(h + 1) * dk].iter_mut().zip(vh) {
                    *c += w * vv;
                }
            }
        }
        matmul(&ctx, l.self_attn.wo.data(), 1, d, d, &mut sub);
        let mut r1 = vec![F::ZERO; d];
        for ((r, &xv), &s) in r1.iter_mut().zip(&x).zip(&sub) {
            *r = xv + s;
        }
        let mut x1 = vec![F::ZERO; d];
        let mut cache = crate::numerics::LnCache::default();
        crate::numerics::layer_norm_forward(
            &r1,
            l.ln1.gain.data(),
            l.ln1.bias.data(),
            &mut x1,
            &mut cache,
        );

        // --- cross-attention against the precomputed source projections
        matmul(&x1, l.cross_attn.wq.data(), 1, d, d, &mut q);
        let enc_k = &session.enc_k[li];
        let enc_v = &session.enc_v[li];
        let t_src = session.src_len;
        let mut rows: Vec<Vec<F>> = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = &q[h * dk..(h + 1) * dk];
            let mut row = vec![F::ZERO; t_src];
            for (i, s) in row.iter_mut().enumerate() {
                let kh = &enc_k.row(i)[h * dk..(h + 1) * dk];
                *s = dot(qh, kh) * scale;
            }
            softmax_in_place(&mut row);
            rows.push(row);
        }
        if let Some(ov) = override_ {
            if ov.layer == li {
                for (row, ov_row) in rows.iter_mut().zip(&ov.rows) {
                    for (x, &r) in row.iter_mut().zip(ov_row) {
                        *x = F::from_f64(r);
                    }
                }
            }
        }
        let records: Vec<AttentionRecord> = rows
            .iter()
            .enumerate()
            .map(|(h, row)| AttentionRecord {
                layer: li,
                head: h,
                weights: vec![row.iter().map(|x| x.to_f64()).collect()],
            })
            .collect();
        cross_records.push(records);
        ctx.iter_mut().for_each(|c| *c = F::ZERO);
        for (h, row) in rows.iter().enumerate() {
            for (i, &w) in row.iter().enumerate() {
                let vh = &enc_v.row(i)[h * dk..(h + 1) * dk];
                for (c, &vv) in ctx[h * dk..(h + 1) * dk].iter_mut().zip(vh) {
                    *c += w * vv;
                }
            }
        }
        matmul(&ctx, l.cross_attn.wo.data(), 1, d, d, &mut sub);
        let mut r2 = vec![F::ZERO; d];
        for ((r, &xv), &s) in r2.iter_mut().zip(&x1).zip(&sub) {
            *r = xv + s;
        }
        let mut x2 = vec![F::ZERO; d];
        crate::numerics::layer_norm_forward(
            &r2,
            l.ln2.gain.data(),
            l.ln2.bias.data(),
            &mut x2,
            &mut cache,
        );

        // --- feed-forward
        let dff = l.ffn.w1.cols();
        let mut act = vec![F::ZERO; dff];
        matmul(&x2, l.ffn.w1.data(), 1, d, dff, &mut act);
        for (a, &b) in act.iter_mut().zip(l.ffn.b1.data()) {
            let v = *a + b;
            *a = if v > F::ZERO { v } else { F::ZERO };
        }
        let mut f = vec![F::ZERO; d];
        matmul(&act, l.ffn.w2.data(), 1, dff, d, &mut f);
        for (o, &b) in f.iter_mut().zip(l.ffn.b2.data()) {
            *o += b;
        }
        let mut r3 = vec![F::ZERO; d];
        for ((r, &xv), &s) in r3.iter_mut().zip(&x2).zip(&f) {
            *r = xv + s;
        }
        let mut y = vec![F::ZERO; d];
        crate::numerics::layer_norm_forward(
            &r3,
            l.ln3.gain.data(),
            l.ln3.bias.data(),
            &mut y,
            &mut cache,
        );
        x = y;
    }

    let table = params.out_proj.as_ref().unwrap_or(&params.tgt_embed);
    let v = params.config.vocab_tgt;
    let mut logits = vec![F::ZERO; v];
    for (tok, lo) in logits.iter_mut().enumerate() {
        *lo = dot(&x, table.row(tok));
    }

    Ok(StepOutput {
        logits,
        cross_attn: cross_records,
        state: new_state,
    })
}
