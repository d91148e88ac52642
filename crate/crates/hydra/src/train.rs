//! Single-stream training loop: shuffled batches, Adam with the
//! inverse-square-root warmup schedule, label-smoothed loss.

use crate::data::{CorpusPair, Vocab};
use crate::decoding::greedy_decode;
use crate::error::{Error, Result};
use crate::metrics::corpus_bleu;
use crate::model::ModelParams;
use crate::numerics::{adam_step, lr_at, AdamState, OptimizerConfig, Scalar};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_steps: u64,
    pub log_every: u64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_steps: 1200,
            log_every: 50,
            seed: 1,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid_argument("batch_size must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid_argument("max_steps must be positive"));
        }
        self.optimizer.validate()
    }
}

/// One loss-log row: (step, learning rate, batch loss).
pub type LossLog = Vec<(u64, f64, f64)>;

const TAG_SHUFFLE: u64 = 0x7368_7566; // "shuf"

/// Trains in place for `cfg.max_steps` optimizer steps and returns the loss
/// log. Deterministic: identical inputs produce bit-identical parameters.
pub fn train<F: Scalar>(
    params: &mut ModelParams<F>,
    pairs: &[(Vec<u32>, Vec<u32>)],
    cfg: &TrainConfig,
) -> Result<LossLog> {
    train_with(params, pairs, cfg, 0, |_, _| Ok(()))
}

/// [`train`] with a periodic callback (used for checkpointing). The callback
/// fires every `every` steps when `every > 0`.
pub fn train_with<F: Scalar>(
    params: &mut ModelParams<F>,
    pairs: &[(Vec<u32>, Vec<u32>)],
    cfg: &TrainConfig,
    every: u64,
    mut on_step: impl FnMut(u64, &ModelParams<F>) -> Result<()>,
) -> Result<LossLog> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid_argument("training corpus is empty"));
    }
    let mut states: Vec<AdamState<F>> = Vec::new();
    params.visit(&mut |_, t| states.push(AdamState::zeros(t.len())));

    let mut log = Vec::new();
    let mut step: u64 = 0;
    let mut epoch: u64 = 0;
    'outer: loop {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        RngStream::new(cfg.seed, &[TAG_SHUFFLE, epoch]).shuffle(&mut order);
        for batch_idx in order.chunks(cfg.batch_size) {
            step += 1;
            let batch: Vec<(Vec<u32>, Vec<u32>)> =
                batch_idx.iter().map(|&i| pairs[i].clone()).collect();
            let (loss, grads) = params.forward_loss(&batch, cfg.optimizer.label_smoothing)?;
            if !loss.is_finite() {
                return Err(Error::invalid_state(format!(
                    "training diverged: loss {loss} at step {step}"
                )));
            }
            let lr = lr_at(step, &cfg.optimizer)?;
            let mut grad_slices: Vec<&[F]> = Vec::with_capacity(states.len());
            grads.visit(&mut |_, t| grad_slices.push(t.data()));
            let mut i = 0usize;
            let mut update_err = None;
            params.visit_mut(&mut |_, t| {
                if update_err.is_some() {
                    return;
                }
                if let Err(e) = adam_step(
                    t.data_mut(),
                    grad_slices[i],
                    &mut states[i],
                    step,
                    lr,
                    &cfg.optimizer,
                ) {
                    update_err = Some(e);
                }
                i += 1;
            });
            if let Some(e) = update_err {
                return Err(e);
            }
            if step.is_multiple_of(cfg.log_every.max(1)) || step == 1 || step == cfg.max_steps {
                log.push((step, lr, loss));
            }
            if every > 0 && step.is_multiple_of(every) && step < cfg.max_steps {
                on_step(step, params)?;
            }
            if step >= cfg.max_steps {
                break 'outer;
            }
        }
        epoch += 1;
    }
    if !params.all_finite() {
        return Err(Error::invalid_state(
            "training produced non-finite parameters",
        ));
    }
    Ok(log)
}

/// Greedy-decodes every pair's source and scores against its target as the
/// single reference.
pub fn greedy_corpus_bleu<F: Scalar>(
    params: &ModelParams<F>,
    pairs: &[&CorpusPair],
    vocab_src: &Vocab,
    vocab_tgt: &Vocab,
    max_len: usize,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid_argument("no pairs to evaluate"));
    }
    let mut hyps = Vec::with_capacity(pairs.len());
    let mut refs = Vec::with_capacity(pairs.len());
    for p in pairs {
        let src = vocab_src.encode_source(&p.src);
        let out = greedy_decode(params, &src, max_len)?;
        hyps.push(vocab_tgt.decode(&out));
        refs.push(vec![p.tgt.clone()]);
    }
    Ok(corpus_bleu(&hyps, &refs)?.value)
}
