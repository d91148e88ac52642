//! hydra: a desk-scale encoder-decoder transformer laboratory built around
//! one idea — the cross-attention heads of the decoder's final layer each
//! point at a plausible next source word, and sampling among those heads
//! when they disagree yields diverse translations.
//!
//! The crate contains everything needed to study that mechanism end to end
//! on synthetic parallel corpora: deterministic numerics with verified
//! gradients, a trainable transformer with per-head attention inspection and
//! override hooks, beam search plus the diverse-decoding baselines
//! (multinomial sampling, sibling-rank penalties, hamming penalties, noise
//! perturbation), BLEU / pair-wise BLEU / DEQ metrics, head-alignment
//! analysis, and a back-translation augmentation pipeline.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release -p hydra --example train_toy
//! cargo run --release -p hydra --example diverse_translations
//! cargo run --release -p hydra --example k_sweep
//! cargo run --release -p hydra --example head_alignment
//! cargo run --release -p hydra --example noise_vs_sampling
//! cargo run --release -p hydra --example length_curve
//! cargo run --release -p hydra --example back_translation
//! cargo run --release -p hydra --example beam_vs_exhaustive
//! ```
//!
//! The same functionality is scriptable through the thin `hydra` binary
//! (`hydra gen-data`, `hydra train`, `hydra diverse-decode`, `hydra eval`,
//! `hydra analyze`, `hydra backtranslate`, `hydra translate`).

pub mod analysis;
pub mod backtrans;
pub mod cli;
pub mod config;
pub mod data;
pub mod decoding;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod report;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use numerics::{Scalar, Tensor};
pub use rng::RngStream;

/// Version string stamped into artifact file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
