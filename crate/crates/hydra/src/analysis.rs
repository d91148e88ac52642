//! Head-alignment statistics: which source word each cross-attention head
//! points at, where that word's translation ranks in the next-token
//! distribution, and how diversity varies with sentence length.
//!
//! Rank/NLL statistics are collected along the model's own greedy
//! trajectory (the decode-time phenomenon), not against gold references.

use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::metrics::pairwise_bleu;
use crate::model::attention::row_is_stochastic;
use crate::model::{decode_step, DecodeSession, DecoderState, ModelParams};
use crate::numerics::{softmax, Scalar};
use std::collections::HashMap;

/// Rank histogram and NLL statistics of the "referred target words".
#[derive(Debug, Clone, PartialEq)]
pub struct HeadAlignmentStats {
    /// Counts of referred-target-word softmax ranks; index r holds rank r+1
    /// for r in 0..100, index 100 collects everything beyond rank 100.
    pub rank_histogram: Vec<u64>,
    /// Mean NLL per head.
    pub per_head_nll: Vec<f64>,
    /// Mean NLL of the token ranked r-th (1-based), for every rank observed.
    pub per_rank_nll: Vec<f64>,
    /// Mean of `per_head_nll`.
    pub head_average_nll: f64,
    /// Number of analyzed decoding steps.
    pub steps: u64,
}

pub const RANK_BUCKETS: usize = 100;

/// Per-head argmax source positions at one step; positions may overlap.
pub fn referred_source_words(rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    if rows.is_empty() {
        return Err(Error::invalid_argument("no attention rows"));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (h, row) in rows.iter().enumerate() {
        if !row_is_stochastic(row, 1e-4) {
            return Err(Error::invalid_argument(format!(
                "head {h} row is not stochastic"
            )));
        }
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Translates a single source token in isolation with the baseline model and
/// returns the first generated target token. Total: any token id in the
/// source vocabulary yields some target token.
pub fn referred_target_word<F: Scalar>(baseline: &ModelParams<F>, token: u32) -> Result<u32> {
    let src = vec![token, crate::data::EOS_ID];
    let session = DecodeSession::new(baseline, &src)?;
    let state = DecoderState::new(&session, baseline);
    let out = decode_step(baseline, &session, &state, crate::data::BOS_ID, None)?;
    let mut best = 0usize;
    for (i, &l) in out.logits.iter().enumerate() {
        if l > out.logits[best] {
            best = i;
        }
    }
    Ok(best as u32)
}

/// Batch form of [`referred_target_word`] over word strings.
pub fn referred_target_words<F: Scalar>(
    baseline: &ModelParams<F>,
    vocab_src: &Vocab,
    words: &[String],
) -> Result<Vec<u32>> {
    words
        .iter()
        .map(|w| referred_target_word(baseline, vocab_src.id(w)))
        .collect()
}

/// Rank of `token` in the probability vector, 1-based; ties resolve toward
/// the smaller token id.
fn rank_of(probs: &[f64], token: usize) -> usize {
    let p = probs[token];
    let mut rank = 1;
    for (i, &q) in probs.iter().enumerate() {
        if q > p || (q == p && i < token) {
            rank += 1;
        }
    }
    rank
}

/// Walks the model's greedy translation of every source sentence; at each
/// step, each head's referred source word is translated by `baseline` and
/// located in the next-token softmax. Aggregates the rank histogram, the
/// per-head mean NLL, and the mean NLL per softmax rank.
pub fn alignment_stats<F: Scalar>(
    sources: &[Vec<String>],
    model: &ModelParams<F>,
    baseline: &ModelParams<F>,
    vocab_src: &Vocab,
    max_len: usize,
) -> Result<HeadAlignmentStats> {
    if sources.is_empty() {
        return Err(Error::invalid_argument("no sentences to analyze"));
    }
    let heads = model.config.n_heads;
    let vocab = model.config.vocab_tgt;
    let mut histogram = vec![0u64; RANK_BUCKETS + 1];
    let mut head_nll_sum = vec![0.0f64; heads];
    let mut rank_nll_sum = vec![0.0f64; vocab];
    let mut steps = 0u64;
    let mut translation_cache: HashMap<u32, u32> = HashMap::new();

    for words in sources {
        let src = vocab_src.encode_source(words);
        let session = DecodeSession::new(model, &src)?;
        let mut state = DecoderState::new(&session, model);
        let mut prev = crate::data::BOS_ID;
        let max_gen = max_len.min(model.config.max_len);
        for _ in 0..max_gen {
            let out = decode_step(model, &session, &state, prev, None)?;
            let rows: Vec<Vec<f64>> = out
                .cross_attn
                .last()
                .expect("decoder has at least one layer")
                .iter()
                .map(|rec| rec.weights[0].clone())
                .collect();
            let referred = referred_source_words(&rows)?;
            let logits: Vec<f64> = out.logits.iter().map(|x| x.to_f64()).collect();
            let probs = softmax(&logits)?;
            steps += 1;

            // per-rank NLL of this step's distribution
            let mut order: Vec<usize> = (0..vocab).collect();
            order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
            for (r, &tok) in order.iter().enumerate() {
                rank_nll_sum[r] += -probs[tok].max(f64::MIN_POSITIVE).ln();
            }

            for (h, &pos) in referred.iter().enumerate() {
                let src_tok = src[pos];
                let tgt_tok = match translation_cache.get(&src_tok) {
                    Some(&t) => t,
                    None => {
                        let t = referred_target_word(baseline, src_tok)?;
                        translation_cache.insert(src_tok, t);
                        t
                    }
                };
                let rank = rank_of(&probs, tgt_tok as usize);
                let bucket = if rank <= RANK_BUCKETS {
                    rank - 1
                } else {
                    RANK_BUCKETS
                };
                histogram[bucket] += 1;
                head_nll_sum[h] += -probs[tgt_tok as usize].max(f64::MIN_POSITIVE).ln();
            }

            // greedy next token
            let mut best = 0usize;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            if best as u32 == crate::data::EOS_ID {
                break;
            }
            prev = best as u32;
            state = out.state;
        }
    }
    if steps == 0 {
        return Err(Error::invalid_state("greedy decoding produced no steps"));
    }
    let per_head_nll: Vec<f64> = head_nll_sum.iter().map(|s| s / steps as f64).collect();
    let head_average_nll = per_head_nll.iter().sum::<f64>() / heads as f64;
    let per_rank_nll: Vec<f64> = rank_nll_sum.iter().map(|s| s / steps as f64).collect();
    Ok(HeadAlignmentStats {
        rank_histogram: histogram,
        per_head_nll,
        per_rank_nll,
        head_average_nll,
        steps,
    })
}

/// One row of the length-vs-diversity curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthBucket {
    pub len_lo: usize,
    pub len_hi: usize,
    pub sentences: usize,
    /// Pair-wise BLEU inside the bucket; None when the bucket is empty.
    pub pwb: Option<f64>,
    pub low_support: bool,
}

/// Pair-wise BLEU per source-length bucket. Buckets with fewer than five
/// sentences are flagged low-support.
pub fn length_diversity_curve(
    groups: &[Vec<Vec<String>>],
    source_lengths: &[usize],
    bucket_width: usize,
) -> Result<Vec<LengthBucket>> {
    if bucket_width == 0 {
        return Err(Error::invalid_argument("bucket_width must be >= 1"));
    }
    if groups.len() != source_lengths.len() {
        return Err(Error::invalid_argument(
            "groups and source_lengths must align",
        ));
    }
    if groups.is_empty() {
        return Err(Error::invalid_argument("no groups"));
    }
    let max_len = *source_lengths.iter().max().unwrap();
    let n_buckets = max_len / bucket_width + 1;
    let mut out = Vec::new();
    for b in 0..n_buckets {
        let lo = b * bucket_width;
        let hi = lo + bucket_width - 1;
        let members: Vec<Vec<Vec<String>>> = groups
            .iter()
            .zip(source_lengths)
            .filter(|(_, &l)| l >= lo && l <= hi)
            .map(|(g, _)| g.clone())
            .collect();
        let pwb = if members.is_empty() {
            None
        } else {
            Some(pairwise_bleu(&members)?)
        };
        out.push(LengthBucket {
            len_lo: lo,
            len_hi: hi,
            sentences: members.len(),
            pwb,
            low_support: members.len() < 5,
        });
    }
    Ok(out)
}

/// Spearman rank correlation, used to check that diversity grows with
/// sentence length (pair-wise BLEU falls).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
