//! Run configuration: a flat `key = value` text file plus command-line
//! overrides (flags win). The canonical serialization feeds the config
//! digest stamped into every artifact header.

use crate::decoding::{DecodeMode, DecodePolicy};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::OptimizerConfig;
use crate::train::TrainConfig;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub policy: DecodePolicy,
    pub batch_size: usize,
    pub max_steps: u64,
    pub log_every: u64,
    pub checkpoint_every: u64,
    pub data_train: Option<PathBuf>,
    pub data_dev: Option<PathBuf>,
    pub data_test: Option<PathBuf>,
    pub data_synthetic: Option<PathBuf>,
    pub mixing_ratio: f64,
    pub run_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig {
                d_model: 64,
                n_heads: 4,
                n_enc_layers: 2,
                n_dec_layers: 1,
                d_ffn: 256,
                vocab_src: 0, // filled from data at train time
                vocab_tgt: 0,
                max_len: 32,
                tied_output: true,
            },
            optimizer: OptimizerConfig {
                warmup_steps: 400,
                d_model: 64,
                ..OptimizerConfig::default()
            },
            policy: DecodePolicy {
                max_len: 32,
                ..DecodePolicy::default()
            },
            batch_size: 16,
            max_steps: 1500,
            log_every: 50,
            checkpoint_every: 0,
            data_train: None,
            data_dev: None,
            data_test: None,
            data_synthetic: None,
            mixing_ratio: 1.0,
            run_dir: PathBuf::from("run"),
            seed: 1,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
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
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::format(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::invalid_argument(format!("bad value `{v}` for {key}")))
        }
        match key {
            "model.d_model" => {
                self.model.d_model = p(key, value)?;
                self.optimizer.d_model = self.model.d_model;
            }
            "model.n_heads" => self.model.n_heads = p(key, value)?,
            "model.n_enc_layers" => self.model.n_enc_layers = p(key, value)?,
            "model.n_dec_layers" => self.model.n_dec_layers = p(key, value)?,
            "model.d_ffn" => self.model.d_ffn = p(key, value)?,
            "model.max_len" => self.model.max_len = p(key, value)?,
            "model.tied_output" => self.model.tied_output = p(key, value)?,
            "optimizer.beta1" => self.optimizer.beta1 = p(key, value)?,
            "optimizer.beta2" => self.optimizer.beta2 = p(key, value)?,
            "optimizer.epsilon" => self.optimizer.epsilon = p(key, value)?,
            "optimizer.warmup_steps" => self.optimizer.warmup_steps = p(key, value)?,
            "optimizer.label_smoothing" => self.optimizer.label_smoothing = p(key, value)?,
            "policy.mode" => self.policy.mode = DecodeMode::parse(value)?,
            "policy.beam_size" => self.policy.beam_size = p(key, value)?,
            "policy.k" => self.policy.k = p(key, value)?,
            "policy.m" => self.policy.m = p(key, value)?,
            "policy.penalty_strength" => self.policy.penalty_strength = p(key, value)?,
            "policy.max_len" => self.policy.max_len = p(key, value)?,
            "policy.shared_sample" => self.policy.shared_sample = p(key, value)?,
            "policy.length_alpha" => self.policy.length_alpha = p(key, value)?,
            "policy.override_layer" => {
                self.policy.override_layer = if value == "final" {
                    None
                } else {
                    Some(p(key, value)?)
                }
            }
            "train.batch_size" => self.batch_size = p(key, value)?,
            "train.max_steps" => self.max_steps = p(key, value)?,
            "train.log_every" => self.log_every = p(key, value)?,
            "train.checkpoint_every" => self.checkpoint_every = p(key, value)?,
            "train.mixing_ratio" => self.mixing_ratio = p(key, value)?,
            "data.train" => self.data_train = Some(PathBuf::from(value)),
            "data.dev" => self.data_dev = Some(PathBuf::from(value)),
            "data.test" => self.data_test = Some(PathBuf::from(value)),
            "data.synthetic" => self.data_synthetic = Some(PathBuf::from(value)),
            "run_dir" => self.run_dir = PathBuf::from(value),
            "seed" => {
                self.seed = p(key, value)?;
                self.policy.seed = self.seed;
            }
            "workers" => self.workers = p(key, value)?,
            other => {
                return Err(Error::invalid_argument(format!(
                    "unknown config key {other}"
                )))
            }
        }
        Ok(())
    }

    /// Canonical text form; also what the digest hashes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("model.d_model", self.model.d_model.to_string());
        kv("model.n_heads", self.model.n_heads.to_string());
        kv("model.n_enc_layers", self.model.n_enc_layers.to_string());
        kv("model.n_dec_layers", self.model.n_dec_layers.to_string());
        kv("model.d_ffn", self.model.d_ffn.to_string());
        kv("model.max_len", self.model.max_len.to_string());
        kv("model.tied_output", self.model.tied_output.to_string());
        kv("optimizer.beta1", self.optimizer.beta1.to_string());
        kv("optimizer.beta2", self.optimizer.beta2.to_string());
        kv("optimizer.epsilon", self.optimizer.epsilon.to_string());
        kv(
            "optimizer.warmup_steps",
            self.optimizer.warmup_steps.to_string(),
        );
        kv(
            "optimizer.label_smoothing",
            self.optimizer.label_smoothing.to_string(),
        );
        kv("policy.mode", self.policy.mode.name().to_string());
        kv("policy.beam_size", self.policy.beam_size.to_string());
        kv("policy.k", self.policy.k.to_string());
        kv("policy.m", self.policy.m.to_string());
        kv(
            "policy.penalty_strength",
            self.policy.penalty_strength.to_string(),
        );
        kv("policy.max_len", self.policy.max_len.to_string());
        kv(
            "policy.shared_sample",
            self.policy.shared_sample.to_string(),
        );
        kv("policy.length_alpha", self.policy.length_alpha.to_string());
        kv(
            "policy.override_layer",
            self.policy
                .override_layer
                .map_or("final".to_string(), |l| l.to_string()),
        );
        kv("train.batch_size", self.batch_size.to_string());
        kv("train.max_steps", self.max_steps.to_string());
        kv("train.log_every", self.log_every.to_string());
        kv("train.checkpoint_every", self.checkpoint_every.to_string());
        kv("train.mixing_ratio", self.mixing_ratio.to_string());
        for (k, v) in [
            ("data.train", &self.data_train),
            ("data.dev", &self.data_dev),
            ("data.test", &self.data_test),
            ("data.synthetic", &self.data_synthetic),
        ] {
            if let Some(p) = v {
                kv(k, p.display().to_string());
            }
        }
        kv("run_dir", self.run_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        s
    }

    /// FNV-1a over the canonical text, minus execution-only fields: the
    /// decode worker count must never change artifact bytes.
    pub fn digest(&self) -> u64 {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("workers"))
            .map(|l| format!("{l}\n"))
            .collect();
        fnv1a(text.as_bytes())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            max_steps: self.max_steps,
            log_every: self.log_every,
            seed: self.seed,
            optimizer: self.optimizer.clone(),
        }
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}
