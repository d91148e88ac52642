//! Back-translation augmentation: generate M synthetic sources per target
//! sentence with a reverse model, tag them, mix them into the original
//! training data, and retrain.

use crate::data::{CorpusPair, Origin, ParallelCorpus, Split, Vocab};
use crate::decoding::{beam_top_m, decode_corpus, DecodeMode, DecodePolicy};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::Scalar;
use crate::rng::RngStream;
use crate::train::{greedy_corpus_bleu, train, TrainConfig};

/// How synthetic data is produced and mixed. Serializes as a flat
/// `key = value` plan file.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub reverse_checkpoint: std::path::PathBuf,
    /// Target sentences to back-translate (plain lines, or the target
    /// column of a corpus file).
    pub targets: std::path::PathBuf,
    pub output: std::path::PathBuf,
    pub policy: DecodePolicy,
    /// Fraction of the synthetic corpus mixed into training, in [0, 1].
    pub mixing_ratio: f64,
    pub workers: usize,
}

impl AugmentationPlan {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mixing_ratio) {
            return Err(Error::invalid_argument("mixing_ratio must be in [0,1]"));
        }
        if self.policy.m < 1 {
            return Err(Error::invalid_argument("plan needs M >= 1"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "reverse_checkpoint = {}\n",
            self.reverse_checkpoint.display()
        ));
        s.push_str(&format!("targets = {}\n", self.targets.display()));
        s.push_str(&format!("output = {}\n", self.output.display()));
        s.push_str(&format!("mode = {}\n", self.policy.mode.name()));
        s.push_str(&format!("k = {}\n", self.policy.k));
        s.push_str(&format!("m = {}\n", self.policy.m));
        s.push_str(&format!("beam_size = {}\n", self.policy.beam_size));
        s.push_str(&format!(
            "penalty_strength = {}\n",
            self.policy.penalty_strength
        ));
        s.push_str(&format!("max_len = {}\n", self.policy.max_len));
        s.push_str(&format!("seed = {}\n", self.policy.seed));
        s.push_str(&format!("length_alpha = {}\n", self.policy.length_alpha));
        s.push_str(&format!("mixing_ratio = {}\n", self.mixing_ratio));
        s.push_str(&format!("workers = {}\n", self.workers));
        s
    }

    /// Digest source: the plan without its execution-only fields (worker
    /// count, output location), which must never change artifact bytes.
    pub fn digest_text(&self) -> String {
        self.to_text()
            .lines()
            .filter(|l| !l.starts_with("workers") && !l.starts_with("output"))
            .map(|l| format!("{l}\n"))
            .collect()
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut plan = AugmentationPlan {
            reverse_checkpoint: std::path::PathBuf::new(),
            targets: std::path::PathBuf::new(),
            output: std::path::PathBuf::new(),
            policy: DecodePolicy::default(),
            mixing_ratio: 1.0,
            workers: 1,
        };
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    ln + 1
                ))
            })?;
            let v = v.trim();
            let bad = || Error::format(format!("{}:{}: bad value `{v}`", path.display(), ln + 1));
            match k.trim() {
                "reverse_checkpoint" => plan.reverse_checkpoint = v.into(),
                "targets" => plan.targets = v.into(),
                "output" => plan.output = v.into(),
                "mode" => plan.policy.mode = DecodeMode::parse(v)?,
                "k" => plan.policy.k = v.parse().map_err(|_| bad())?,
                "m" => plan.policy.m = v.parse().map_err(|_| bad())?,
                "beam_size" => plan.policy.beam_size = v.parse().map_err(|_| bad())?,
                "penalty_strength" => {
                    plan.policy.penalty_strength = v.parse().map_err(|_| bad())?
                }
                "max_len" => plan.policy.max_len = v.parse().map_err(|_| bad())?,
                "seed" => plan.policy.seed = v.parse().map_err(|_| bad())?,
                "length_alpha" => plan.policy.length_alpha = v.parse().map_err(|_| bad())?,
                "mixing_ratio" => plan.mixing_ratio = v.parse().map_err(|_| bad())?,
                "workers" => plan.workers = v.parse().map_err(|_| bad())?,
                other => {
                    return Err(Error::format(format!(
                        "{}:{}: unknown plan key {other}",
                        path.display(),
                        ln + 1
                    )))
                }
            }
        }
        if plan.reverse_checkpoint.as_os_str().is_empty()
            || plan.targets.as_os_str().is_empty()
            || plan.output.as_os_str().is_empty()
        {
            return Err(Error::format(
                "plan file needs reverse_checkpoint, targets, and output",
            ));
        }
        plan.validate()?;
        Ok(plan)
    }
}

/// For each target sentence e, generates M sources with the reverse model
/// and pairs each with e (byte-identical). Beam mode takes the top-M of one
/// beam; every other mode runs M full decodes.
///
/// The reverse model's source side is the forward target language, so
/// `rev_vocab_src` encodes `targets` and `rev_vocab_tgt` decodes outputs.
pub fn synthesize_pairs<F: Scalar>(
    reverse: &ModelParams<F>,
    rev_vocab_src: &Vocab,
    rev_vocab_tgt: &Vocab,
    targets: &[Vec<String>],
    policy: &DecodePolicy,
    workers: usize,
) -> Result<ParallelCorpus> {
    if targets.is_empty() {
        return Err(Error::invalid_argument(
            "no target sentences to back-translate",
        ));
    }
    policy.validate(reverse.config.n_heads, reverse.dec_layers.len())?;
    let groups = if policy.mode == DecodeMode::Beam {
        let sources: Vec<Vec<u32>> = targets
            .iter()
            .map(|t| rev_vocab_src.encode_source(t))
            .collect();
        sources
            .iter()
            .enumerate()
            .map(|(i, src)| beam_top_m(reverse, src, policy, i as u64))
            .collect::<Result<Vec<_>>>()?
    } else {
        let sources: Vec<Vec<u32>> = targets
            .iter()
            .map(|t| rev_vocab_src.encode_source(t))
            .collect();
        decode_corpus(reverse, &sources, policy, workers, false)?
    };
    let mut pairs = Vec::with_capacity(targets.len() * policy.m);
    for (target, group) in targets.iter().zip(&groups) {
        for out in &group.outputs {
            // an immediate-EOS decode yields an empty source; keep the size
            // contract with a placeholder token
            let src = if out.tokens.is_empty() {
                vec![crate::data::SPECIAL_TOKENS[3].to_string()]
            } else {
                rev_vocab_tgt.decode(&out.tokens)
            };
            pairs.push(CorpusPair {
                src,
                tgt: target.clone(),
                split: Split::Train,
                origin: Origin::Synthetic,
            });
        }
    }
    Ok(ParallelCorpus { pairs })
}

const TAG_MIX: u64 = 0x6d6978; // "mix"

/// Takes the first `ratio * |synthetic|` synthetic pairs and shuffles them
/// into the original corpus.
pub fn mix_corpora(
    original: &[CorpusPair],
    synthetic: &[CorpusPair],
    ratio: f64,
    seed: u64,
) -> Result<Vec<CorpusPair>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid_argument("mixing ratio must be in [0,1]"));
    }
    let take = (ratio * synthetic.len() as f64).round() as usize;
    let mut mixed: Vec<CorpusPair> = original.to_vec();
    mixed.extend(synthetic.iter().take(take).cloned());
    RngStream::new(seed, &[TAG_MIX]).shuffle(&mut mixed);
    Ok(mixed)
}

/// Result of one augmented training run.
#[derive(Debug, Clone)]
pub struct MixReport {
    pub train_pairs: usize,
    pub synthetic_used: usize,
    pub test_bleu: f64,
}

/// Trains a fresh forward model on the shuffled mixture and reports greedy
/// corpus BLEU on the held-out test pairs.
#[allow(clippy::too_many_arguments)]
pub fn mix_and_train(
    original_train: &[CorpusPair],
    synthetic: &[CorpusPair],
    ratio: f64,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    vocab_src: &Vocab,
    vocab_tgt: &Vocab,
    test_pairs: &[&CorpusPair],
    init_seed: u64,
) -> Result<(ModelParams<f32>, MixReport)> {
    // vocabulary compatibility: every synthetic word must be encodable
    for p in synthetic {
        if p.src.iter().any(|w| !vocab_src.contains(w))
            || p.tgt.iter().any(|w| !vocab_tgt.contains(w))
        {
            return Err(Error::invalid_argument(
                "synthetic corpus contains words outside the forward vocabularies",
            ));
        }
    }
    let mixed = mix_corpora(original_train, synthetic, ratio, train_cfg.seed)?;
    let encoded = crate::data::prepare_pairs(&mixed, vocab_src, vocab_tgt);
    let mut params: ModelParams<f32> = ModelParams::init(model_cfg.clone(), init_seed)?;
    train(&mut params, &encoded, train_cfg)?;
    let test_bleu =
        greedy_corpus_bleu(&params, test_pairs, vocab_src, vocab_tgt, model_cfg.max_len)?;
    let synthetic_used = mixed.len() - original_train.len();
    Ok((
        params,
        MixReport {
            train_pairs: mixed.len(),
            synthetic_used,
            test_bleu,
        },
    ))
}
