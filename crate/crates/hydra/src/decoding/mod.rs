//! Beam search and the diverse decoding strategies: head sampling under the
//! confusing condition, multinomial sampling, sibling-rank penalties,
//! hamming penalties, and noise perturbation.
//!
//! Everything here is a pure function of (model, source, policy): random
//! choices come from counter-based streams keyed by (seed, sentence id,
//! decode index), so decoding the same sentence twice — or on a different
//! worker — produces identical bytes.

pub mod head_sample;
pub mod noise;
pub mod penalties;

pub use head_sample::{candidate_histogram, head_sample_policy, CandidateHistogram};
pub use noise::noise_perturb;
pub use penalties::{hamming_penalty, sibling_penalty_rerank};

use crate::data::{BOS_ID, EOS_ID};
use crate::error::{Error, Result};
use crate::model::attention::HeadOverride;
use crate::model::{decode_step, DecodeSession, DecoderState, ModelParams};
use crate::numerics::{log_softmax, Scalar};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Beam,
    Multinomial,
    HeadSample,
    SiblingPenalty,
    HammingPenalty,
}

impl DecodeMode {
    pub fn name(self) -> &'static str {
        match self {
            DecodeMode::Beam => "beam",
            DecodeMode::Multinomial => "multinomial",
            DecodeMode::HeadSample => "head_sample",
            DecodeMode::SiblingPenalty => "sibling_penalty",
            DecodeMode::HammingPenalty => "hamming_penalty",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "beam" => DecodeMode::Beam,
            "multinomial" => DecodeMode::Multinomial,
            "head_sample" => DecodeMode::HeadSample,
            "sibling_penalty" => DecodeMode::SiblingPenalty,
            "hamming_penalty" => DecodeMode::HammingPenalty,
            other => {
                return Err(Error::invalid_argument(format!(
                    "unknown decode mode {other}"
                )))
            }
        })
    }
}

/// Decoding configuration. `k` is the vote threshold of the confusing
/// condition (0 disables sampling, H samples every step); `m` is how many
/// full decodes each sentence gets.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodePolicy {
    pub mode: DecodeMode,
    pub beam_size: usize,
    pub k: usize,
    pub m: usize,
    pub penalty_strength: f64,
    pub max_len: usize,
    pub seed: u64,
    /// Cross-attention layer the override applies to; `None` means the final
    /// decoder layer.
    pub override_layer: Option<usize>,
    /// Sample one head per step shared by all beam hypotheses instead of one
    /// per hypothesis.
    pub shared_sample: bool,
    /// Length-normalization exponent.
    pub length_alpha: f64,
}

impl Default for DecodePolicy {
    fn default() -> Self {
        DecodePolicy {
            mode: DecodeMode::Beam,
            beam_size: 5,
            k: 0,
            m: 5,
            penalty_strength: 0.0,
            max_len: 64,
            seed: 1,
            override_layer: None,
            shared_sample: false,
            length_alpha: 0.6,
        }
    }
}

impl DecodePolicy {
    pub fn validate(&self, n_heads: usize, n_dec_layers: usize) -> Result<()> {
        if self.beam_size < 1 {
            return Err(Error::invalid_argument("beam_size must be >= 1"));
        }
        if self.k > n_heads {
            return Err(Error::invalid_argument(format!(
                "K = {} exceeds head count {n_heads}",
                self.k
            )));
        }
        if self.m < 1 {
            return Err(Error::invalid_argument("M must be >= 1"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid_argument("max_len must be >= 1"));
        }
        if self.penalty_strength < 0.0 {
            return Err(Error::invalid_argument("penalty_strength must be >= 0"));
        }
        if let Some(l) = self.override_layer {
            if l >= n_dec_layers {
                return Err(Error::invalid_argument(format!(
                    "override layer {l} out of range for {n_dec_layers} decoder layers"
                )));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "mode={} beam={} K={} M={} strength={} alpha={} seed={}",
            self.mode.name(),
            self.beam_size,
            self.k,
            self.m,
            self.penalty_strength,
            self.length_alpha,
            self.seed
        )
    }
}

/// A completed search hypothesis. `score` is length-normalized
/// (raw / len^alpha); `raw_score` is the accumulated log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    /// Generated tokens including the closing EOS when finished.
    pub tokens: Vec<u32>,
    pub raw_score: f64,
    pub score: f64,
    pub finished: bool,
}

/// Attention of one head at one decoding step of the winning hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAttention {
    pub step: usize,
    pub layer: usize,
    pub head: usize,
    pub weights: Vec<f64>,
}

/// One output of a hypothesis group. Tokens exclude the closing EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredOutput {
    pub tokens: Vec<u32>,
    pub score: f64,
    /// Per-step attention of the path, present when dumping was requested.
    pub attention: Vec<StepAttention>,
}

/// M decodes of one source sentence; duplicates are kept on purpose (they
/// are what pair-wise BLEU should see).
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisGroup {
    pub sentence_id: u64,
    pub policy: String,
    pub outputs: Vec<ScoredOutput>,
}

impl HypothesisGroup {
    pub fn output_words(&self, vocab: &crate::data::Vocab) -> Vec<Vec<String>> {
        self.outputs
            .iter()
            .map(|o| vocab.decode(&o.tokens))
            .collect()
    }
}

struct Beam<F: Scalar> {
    tokens: Vec<u32>,
    raw: f64,
    prev_token: u32,
    state: DecoderState<F>,
    attention: Vec<StepAttention>,
}

fn normalized(raw: f64, len: usize, alpha: f64) -> f64 {
    raw / (len.max(1) as f64).powf(alpha)
}

fn rank_cmp(a: &BeamHypothesis, b: &BeamHypothesis) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap()
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Options threaded through the internal search loop.
#[derive(Default)]
struct SearchCtx<'a> {
    /// Outputs of earlier groups (hamming mode), full sequences with EOS.
    prior: &'a [Vec<u32>],
    capture_attention: bool,
}

/// Length-normalized beam search. In `head_sample` mode the confusing
/// condition is evaluated per hypothesis per step on that hypothesis' own
/// final-layer cross-attention, and a fired override is applied before the
/// expansion logits are computed. Returns hypotheses sorted by score.
pub fn beam_search<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    policy: &DecodePolicy,
    sentence_id: u64,
    decode_index: u64,
) -> Result<Vec<BeamHypothesis>> {
    beam_search_inner(
        params,
        src,
        policy,
        sentence_id,
        decode_index,
        SearchCtx::default(),
        &mut |_| {},
    )
    .map(|(hyps, _)| hyps)
}

/// Beam search that also reports every evaluated [`CandidateHistogram`] to
/// `observer` (head_sample mode only).
pub fn beam_search_observed<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    policy: &DecodePolicy,
    sentence_id: u64,
    decode_index: u64,
    observer: &mut dyn FnMut(&CandidateHistogram),
) -> Result<Vec<BeamHypothesis>> {
    beam_search_inner(
        params,
        src,
        policy,
        sentence_id,
        decode_index,
        SearchCtx::default(),
        observer,
    )
    .map(|(hyps, _)| hyps)
}

fn beam_search_inner<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    policy: &DecodePolicy,
    sentence_id: u64,
    decode_index: u64,
    ctx: SearchCtx<'_>,
    observer: &mut dyn FnMut(&CandidateHistogram),
) -> Result<(Vec<BeamHypothesis>, Vec<Vec<StepAttention>>)> {
    if policy.mode == DecodeMode::Multinomial {
        return Err(Error::invalid_argument(
            "beam_search does not run multinomial mode; use multinomial_decode",
        ));
    }
    policy.validate(params.config.n_heads, params.dec_layers.len())?;
    if !params.all_finite() {
        return Err(Error::invalid_state("model parameters are not finite"));
    }
    let heads = params.config.n_heads;
    let policy_layer = policy.override_layer.unwrap_or(params.dec_layers.len() - 1);
    let session = DecodeSession::new(params, src)?;
    let max_gen = policy.max_len.min(params.config.max_len);
    let base_stream = RngStream::new(policy.seed, &[sentence_id, decode_index]);

    let mut alive = vec![Beam {
        tokens: Vec::new(),
        raw: 0.0,
        prev_token: BOS_ID,
        state: DecoderState::new(&session, params),
        attention: Vec::new(),
    }];
    let mut finished: Vec<(BeamHypothesis, Vec<StepAttention>)> = Vec::new();

    for step in 0..max_gen {
        // (parent slot, token, new raw score)
        let mut expansions: Vec<(usize, u32, f64)> = Vec::new();
        let mut new_states = Vec::with_capacity(alive.len());
        let mut step_attention: Vec<Vec<StepAttention>> = Vec::with_capacity(alive.len());
        let mut shared_head: Option<usize> = None;
        for (slot, hyp) in alive.iter().enumerate() {
            let mut out = decode_step(params, &session, &hyp.state, hyp.prev_token, None)?;
            if policy.mode == DecodeMode::HeadSample {
                let rows: Vec<Vec<f64>> = out.cross_attn[policy_layer]
                    .iter()
                    .map(|rec| rec.weights[0].clone())
                    .collect();
                let hist = candidate_histogram(&rows)?;
                observer(&hist);
                let override_ = if policy.shared_sample {
                    if hist.max_count() <= policy.k as u32 {
                        let head = *shared_head.get_or_insert_with(|| {
                            base_stream
                                .substream(&[step as u64, 0])
                                .uniform_index(heads)
                        });
                        Some(HeadOverride::broadcast(
                            policy_layer,
                            rows[head].clone(),
                            heads,
                        ))
                    } else {
                        None
                    }
                } else {
                    let mut rng = base_stream.substream(&[step as u64, slot as u64]);
                    head_sample_policy(&hist, &rows, policy.k, policy_layer, &mut rng)
                };
                if let Some(ov) = override_ {
                    out = decode_step(params, &session, &hyp.state, hyp.prev_token, Some(&ov))?;
                }
            }
            if ctx.capture_attention {
                let mut recs = Vec::new();
                for layer in &out.cross_attn {
                    for rec in layer {
                        recs.push(StepAttention {
                            step,
                            layer: rec.layer,
                            head: rec.head,
                            weights: rec.weights[0].clone(),
                        });
                    }
                }
                step_attention.push(recs);
            } else {
                step_attention.push(Vec::new());
            }

            let mut logits_f64: Vec<f64> = out.logits.iter().map(|x| x.to_f64()).collect();
            if policy.mode == DecodeMode::HammingPenalty && !ctx.prior.is_empty() {
                let emitted: Vec<u32> = ctx
                    .prior
                    .iter()
                    .filter_map(|seq| seq.get(step).copied())
                    .collect();
                logits_f64 = hamming_penalty(&logits_f64, &emitted, policy.penalty_strength);
            }
            let logp = log_softmax(&logits_f64);
            for (tok, &lp) in logp.iter().enumerate() {
                expansions.push((slot, tok as u32, hyp.raw + lp));
            }
            new_states.push(out.state);
        }

        if policy.mode == DecodeMode::SiblingPenalty {
            // group per parent, sort siblings, apply the rank penalty
            let mut adjusted = Vec::with_capacity(expansions.len());
            for slot in 0..alive.len() {
                let mut sibs: Vec<(usize, u32, f64)> =
                    expansions.iter().filter(|e| e.0 == slot).copied().collect();
                sibs.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.1.cmp(&b.1)));
                let scores: Vec<f64> = sibs.iter().map(|e| e.2).collect();
                let new_scores = sibling_penalty_rerank(&[scores], policy.penalty_strength);
                for (e, &s) in sibs.iter().zip(&new_scores[0]) {
                    adjusted.push((e.0, e.1, s));
                }
            }
            expansions = adjusted;
        }

        expansions.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap()
                .then(a.0.cmp(&b.0))
                .then(a.1.cmp(&b.1))
        });

        // EOS expansions in the top beam_size finish; the best non-EOS
        // expansions stay alive.
        let mut next_alive: Vec<Beam<F>> = Vec::with_capacity(policy.beam_size);
        for (rank, &(slot, tok, raw)) in expansions.iter().enumerate() {
            if tok == EOS_ID {
                if rank < policy.beam_size {
                    let parent = &alive[slot];
                    let mut tokens = parent.tokens.clone();
                    tokens.push(EOS_ID);
                    let mut attention = parent.attention.clone();
                    if ctx.capture_attention {
                        attention.extend(step_attention[slot].iter().cloned());
                    }
                    let hyp = BeamHypothesis {
                        score: normalized(raw, tokens.len(), policy.length_alpha),
                        tokens,
                        raw_score: raw,
                        finished: true,
                    };
                    finished.push((hyp, attention));
                }
                continue;
            }
            if next_alive.len() < policy.beam_size {
                let parent = &alive[slot];
                let mut tokens = parent.tokens.clone();
                tokens.push(tok);
                let mut attention = parent.attention.clone();
                if ctx.capture_attention {
                    attention.extend(step_attention[slot].iter().cloned());
                }
                next_alive.push(Beam {
                    tokens,
                    raw,
                    prev_token: tok,
                    state: new_states[slot].clone(),
                    attention,
                });
            }
        }
        // keep the finished pool bounded and deterministic
        finished.sort_by(|a, b| rank_cmp(&a.0, &b.0));
        finished.truncate(2 * policy.beam_size.max(1));
        alive = next_alive;
        if alive.is_empty() {
            break;
        }
    }

    for hyp in alive {
        finished.push((
            BeamHypothesis {
                score: normalized(hyp.raw, hyp.tokens.len(), policy.length_alpha),
                tokens: hyp.tokens,
                raw_score: hyp.raw,
                finished: false,
            },
            hyp.attention,
        ));
    }
    if finished.is_empty() {
        return Err(Error::invalid_state("beam search produced no hypotheses"));
    }
    finished.sort_by(|a, b| rank_cmp(&a.0, &b.0));
    let attention = finished.iter().map(|(_, a)| a.clone()).collect();
    Ok((finished.into_iter().map(|(h, _)| h).collect(), attention))
}

/// Greedy decoding (beam of one). Returns generated tokens without the EOS.
pub fn greedy_decode<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    max_len: usize,
) -> Result<Vec<u32>> {
    let policy = DecodePolicy {
        beam_size: 1,
        max_len,
        ..DecodePolicy::default()
    };
    let hyps = beam_search(params, src, &policy, 0, 0)?;
    Ok(strip_eos(&hyps[0].tokens))
}

pub fn strip_eos(tokens: &[u32]) -> Vec<u32> {
    match tokens.last() {
        Some(&EOS_ID) => tokens[..tokens.len() - 1].to_vec(),
        _ => tokens.to_vec(),
    }
}

fn sample_sequence<F: Scalar>(
    params: &ModelParams<F>,
    session: &DecodeSession<F>,
    max_gen: usize,
    stream: &mut RngStream,
    alpha: f64,
) -> Result<(Vec<u32>, f64)> {
    let mut state = DecoderState::new(session, params);
    let mut prev = BOS_ID;
    let mut tokens = Vec::new();
    let mut raw = 0.0f64;
    for _ in 0..max_gen {
        let out = decode_step(params, session, &state, prev, None)?;
        let logits: Vec<f64> = out.logits.iter().map(|x| x.to_f64()).collect();
        let logp = log_softmax(&logits);
        let probs: Vec<f64> = logp.iter().map(|x| x.exp()).collect();
        let u = stream.next_f64();
        let mut acc = 0.0;
        let mut tok = probs.len() - 1;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                tok = i;
                break;
            }
        }
        raw += logp[tok];
        tokens.push(tok as u32);
        if tok as u32 == EOS_ID {
            break;
        }
        prev = tok as u32;
        state = out.state;
    }
    let score = normalized(raw, tokens.len(), alpha);
    Ok((tokens, score))
}

/// M token-by-token samples from the full next-token distribution.
pub fn multinomial_decode<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    m: usize,
    seed: u64,
    sentence_id: u64,
    max_len: usize,
) -> Result<HypothesisGroup> {
    let policy = DecodePolicy {
        mode: DecodeMode::Multinomial,
        m,
        seed,
        max_len,
        ..DecodePolicy::default()
    };
    diverse_decode(params, src, &policy, sentence_id)
}

/// Runs the whole decode M times (independent RNG streams keyed by
/// (seed, sentence_id, decode_index)) and keeps each run's top output;
/// duplicates are retained.
pub fn diverse_decode<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    policy: &DecodePolicy,
    sentence_id: u64,
) -> Result<HypothesisGroup> {
    diverse_decode_opts(params, src, policy, sentence_id, false, None)
}

pub fn diverse_decode_opts<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    policy: &DecodePolicy,
    sentence_id: u64,
    capture_attention: bool,
    observer: Option<&mut dyn FnMut(&CandidateHistogram)>,
) -> Result<HypothesisGroup> {
    policy.validate(params.config.n_heads, params.dec_layers.len())?;
    let mut noop = |_: &CandidateHistogram| {};
    let observer: &mut dyn FnMut(&CandidateHistogram) = match observer {
        Some(o) => o,
        None => &mut noop,
    };
    let mut outputs = Vec::with_capacity(policy.m);
    let mut prior: Vec<Vec<u32>> = Vec::new();
    for decode_index in 0..policy.m as u64 {
        match policy.mode {
            DecodeMode::Multinomial => {
                let session = DecodeSession::new(params, src)?;
                let mut stream = RngStream::new(policy.seed, &[sentence_id, decode_index]);
                let max_gen = policy.max_len.min(params.config.max_len);
                let (tokens, score) =
                    sample_sequence(params, &session, max_gen, &mut stream, policy.length_alpha)?;
                prior.push(tokens.clone());
                outputs.push(ScoredOutput {
                    tokens: strip_eos(&tokens),
                    score,
                    attention: Vec::new(),
                });
            }
            _ => {
                let (hyps, attention) = beam_search_inner(
                    params,
                    src,
                    policy,
                    sentence_id,
                    decode_index,
                    SearchCtx {
                        prior: &prior,
                        capture_attention,
                    },
                    observer,
                )?;
                let top = &hyps[0];
                prior.push(top.tokens.clone());
                outputs.push(ScoredOutput {
                    tokens: strip_eos(&top.tokens),
                    score: top.score,
                    attention: attention[0].clone(),
                });
            }
        }
    }
    Ok(HypothesisGroup {
        sentence_id,
        policy: policy.describe(),
        outputs,
    })
}

/// The top-M hypotheses of a single beam (the "Beam-N" comparison set used
/// by back-translation). Pads by repeating the best hypothesis when the
/// beam yields fewer than M.
pub fn beam_top_m<F: Scalar>(
    params: &ModelParams<F>,
    src: &[u32],
    policy: &DecodePolicy,
    sentence_id: u64,
) -> Result<HypothesisGroup> {
    let hyps = beam_search(params, src, policy, sentence_id, 0)?;
    let mut outputs = Vec::with_capacity(policy.m);
    for i in 0..policy.m {
        let h = hyps.get(i).unwrap_or(&hyps[0]);
        outputs.push(ScoredOutput {
            tokens: strip_eos(&h.tokens),
            score: h.score,
            attention: Vec::new(),
        });
    }
    Ok(HypothesisGroup {
        sentence_id,
        policy: format!("{} top_m", policy.describe()),
        outputs,
    })
}

/// Decodes a corpus, optionally across worker threads. Each sentence's
/// result depends only on (model, source, policy, sentence id), so the
/// worker count never changes the output.
pub fn decode_corpus<F: Scalar>(
    params: &ModelParams<F>,
    sources: &[Vec<u32>],
    policy: &DecodePolicy,
    workers: usize,
    capture_attention: bool,
) -> Result<Vec<HypothesisGroup>> {
    let workers = workers.max(1);
    if workers == 1 || sources.len() < 2 {
        return sources
            .iter()
            .enumerate()
            .map(|(i, src)| {
                diverse_decode_opts(params, src, policy, i as u64, capture_attention, None)
            })
            .collect();
    }
    let mut results: Vec<Option<Result<HypothesisGroup>>> = Vec::new();
    results.resize_with(sources.len(), || None);
    let chunk = sources.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let mut rest: &mut [Option<Result<HypothesisGroup>>] = &mut results;
        for (w, batch) in sources.chunks(chunk).enumerate() {
            let (head, tail) = rest.split_at_mut(batch.len());
            rest = tail;
            let base = w * chunk;
            scope.spawn(move || {
                for (j, src) in batch.iter().enumerate() {
                    head[j] = Some(diverse_decode_opts(
                        params,
                        src,
                        policy,
                        (base + j) as u64,
                        capture_attention,
                        None,
                    ));
                }
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}
