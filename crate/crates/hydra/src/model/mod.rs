//! Encoder-decoder transformer with per-head cross-attention inspection and
//! override hooks in the decoder.

pub mod attention;
pub mod checkpoint;
pub mod decode_state;
pub mod transformer;

pub use attention::{multi_head_attention, AttentionParams, AttentionRecord, HeadOverride};
pub use decode_state::{decode_step, DecodeSession, DecoderState, StepOutput};

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};
use crate::rng::RngStream;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ffn: usize,
    pub vocab_src: usize,
    pub vocab_tgt: usize,
    pub max_len: usize,
    pub tied_output: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 512,
            n_heads: 8,
            n_enc_layers: 6,
            n_dec_layers: 2,
            d_ffn: 2048,
            vocab_src: 0,
            vocab_tgt: 0,
            max_len: 128,
            tied_output: true,
        }
    }
}

impl ModelConfig {
    /// Small configuration for unit tests and quick experiments.
    pub fn toy(vocab_src: usize, vocab_tgt: usize) -> Self {
        ModelConfig {
            d_model: 64,
            n_heads: 4,
            n_enc_layers: 2,
            n_dec_layers: 1,
            d_ffn: 256,
            vocab_src,
            vocab_tgt,
            max_len: 32,
            tied_output: true,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0
            || self.n_heads == 0
            || self.n_enc_layers == 0
            || self.n_dec_layers == 0
            || self.d_ffn == 0
            || self.max_len == 0
        {
            return Err(Error::invalid_argument(
                "all model dimensions must be positive",
            ));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::invalid_argument(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.vocab_src < 4 || self.vocab_tgt < 4 {
            return Err(Error::invalid_argument(
                "vocabularies must include the four special tokens",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LnParams<F: Scalar> {
    pub gain: Tensor<F>,
    pub bias: Tensor<F>,
}

#[derive(Debug, Clone)]
pub struct FfnParams<F: Scalar> {
    pub w1: Tensor<F>,
    pub b1: Tensor<F>,
    pub w2: Tensor<F>,
    pub b2: Tensor<F>,
}

#[derive(Debug, Clone)]
pub struct EncLayerParams<F: Scalar> {
    pub self_attn: AttentionParams<F>,
    pub ln1: LnParams<F>,
    pub ffn: FfnParams<F>,
    pub ln2: LnParams<F>,
}

#[derive(Debug, Clone)]
pub struct DecLayerParams<F: Scalar> {
    pub self_attn: AttentionParams<F>,
    pub ln1: LnParams<F>,
    pub cross_attn: AttentionParams<F>,
    pub ln2: LnParams<F>,
    pub ffn: FfnParams<F>,
    pub ln3: LnParams<F>,
}

/// All trainable weights plus the (fixed) sinusoidal position table.
#[derive(Debug, Clone)]
pub struct ModelParams<F: Scalar> {
    pub config: ModelConfig,
    pub src_embed: Tensor<F>,
    pub tgt_embed: Tensor<F>,
    /// Present only when the output projection is untied from `tgt_embed`.
    pub out_proj: Option<Tensor<F>>,
    pub enc_layers: Vec<EncLayerParams<F>>,
    pub dec_layers: Vec<DecLayerParams<F>>,
    /// Sinusoidal table, not a parameter.
    pub pos_enc: Tensor<F>,
}

fn sinusoidal_table<F: Scalar>(max_len: usize, d_model: usize) -> Tensor<F> {
    let mut t = Tensor::zeros(&[max_len, d_model]);
    for pos in 0..max_len {
        for (i, x) in t.row_mut(pos).iter_mut().enumerate() {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d_model as f64);
            *x = F::from_f64(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    t
}

fn uniform_tensor<F: Scalar>(shape: &[usize], limit: f64, stream: &mut RngStream) -> Tensor<F> {
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = F::from_f64((stream.next_f64() * 2.0 - 1.0) * limit);
    }
    t
}

fn xavier<F: Scalar>(rows: usize, cols: usize, stream: &mut RngStream) -> Tensor<F> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform_tensor(&[rows, cols], limit, stream)
}

const INIT_TAG: u64 = 0x696e_6974; // "init"

impl<F: Scalar> ModelParams<F> {
    /// Fresh parameters, deterministically initialized from `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let mut idx: u64 = 0;
        let mut next = || {
            idx += 1;
            RngStream::new(seed, &[INIT_TAG, idx])
        };
        // Half-std embeddings keep tied-output logits near uniform at init.
        let embed_limit = 0.5 * (3.0f64 / d as f64).sqrt();

        let attn = |s: &mut RngStream| AttentionParams {
            wq: xavier(d, d, s),
            wk: xavier(d, d, s),
            wv: xavier(d, d, s),
            wo: xavier(d, d, s),
        };
        let ln = || LnParams {
            gain: Tensor::from_vec(&[d], vec![F::ONE; d]).unwrap(),
            bias: Tensor::zeros(&[d]),
        };
        let ffn = |s: &mut RngStream| FfnParams {
            w1: xavier(d, config.d_ffn, s),
            b1: Tensor::zeros(&[config.d_ffn]),
            w2: xavier(config.d_ffn, d, s),
            b2: Tensor::zeros(&[d]),
        };

        let src_embed = uniform_tensor(&[config.vocab_src, d], embed_limit, &mut next());
        let tgt_embed = uniform_tensor(&[config.vocab_tgt, d], embed_limit, &mut next());
        let out_proj = if config.tied_output {
            None
        } else {
            Some(xavier(config.vocab_tgt, d, &mut next()))
        };
        let enc_layers = (0..config.n_enc_layers)
            .map(|_| EncLayerParams {
                self_attn: attn(&mut next()),
                ln1: ln(),
                ffn: ffn(&mut next()),
                ln2: ln(),
            })
            .collect();
        let dec_layers = (0..config.n_dec_layers)
            .map(|_| DecLayerParams {
                self_attn: attn(&mut next()),
                ln1: ln(),
                cross_attn: attn(&mut next()),
                ln2: ln(),
                ffn: ffn(&mut next()),
                ln3: ln(),
            })
            .collect();
        let pos_enc = sinusoidal_table(config.max_len, d);
        Ok(ModelParams {
            config,
            src_embed,
            tgt_embed,
            out_proj,
            enc_layers,
            dec_layers,
            pos_enc,
        })
    }

    /// Same shapes, all-zero data. Used as a gradient container.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |_, t| t.fill(F::ZERO));
        z
    }

    /// Visits every trainable tensor in a fixed order.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a Tensor<F>)) {
        f("src_embed".into(), &self.src_embed);
        f("tgt_embed".into(), &self.tgt_embed);
        if let Some(w) = &self.out_proj {
            f("out_proj".into(), w);
        }
        for (i, l) in self.enc_layers.iter().enumerate() {
            let p = format!("enc.{i}");
            visit_attn(&format!("{p}.self"), &l.self_attn, f);
            visit_ln(&format!("{p}.ln1"), &l.ln1, f);
            visit_ffn(&format!("{p}.ffn"), &l.ffn, f);
            visit_ln(&format!("{p}.ln2"), &l.ln2, f);
        }
        for (i, l) in self.dec_layers.iter().enumerate() {
            let p = format!("dec.{i}");
            visit_attn(&format!("{p}.self"), &l.self_attn, f);
            visit_ln(&format!("{p}.ln1"), &l.ln1, f);
            visit_attn(&format!("{p}.cross"), &l.cross_attn, f);
            visit_ln(&format!("{p}.ln2"), &l.ln2, f);
            visit_ffn(&format!("{p}.ffn"), &l.ffn, f);
            visit_ln(&format!("{p}.ln3"), &l.ln3, f);
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut Tensor<F>)) {
        f("src_embed".into(), &mut self.src_embed);
        f("tgt_embed".into(), &mut self.tgt_embed);
        if let Some(w) = &mut self.out_proj {
            f("out_proj".into(), w);
        }
        for (i, l) in self.enc_layers.iter_mut().enumerate() {
            let p = format!("enc.{i}");
            visit_attn_mut(&format!("{p}.self"), &mut l.self_attn, f);
            visit_ln_mut(&format!("{p}.ln1"), &mut l.ln1, f);
            visit_ffn_mut(&format!("{p}.ffn"), &mut l.ffn, f);
            visit_ln_mut(&format!("{p}.ln2"), &mut l.ln2, f);
        }
        for (i, l) in self.dec_layers.iter_mut().enumerate() {
            let p = format!("dec.{i}");
            visit_attn_mut(&format!("{p}.self"), &mut l.self_attn, f);
            visit_ln_mut(&format!("{p}.ln1"), &mut l.ln1, f);
            visit_attn_mut(&format!("{p}.cross"), &mut l.cross_attn, f);
            visit_ln_mut(&format!("{p}.ln2"), &mut l.ln2, f);
            visit_ffn_mut(&format!("{p}.ffn"), &mut l.ffn, f);
            visit_ln_mut(&format!("{p}.ln3"), &mut l.ln3, f);
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, t| ok &= t.all_finite());
        ok
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            config: self.config.clone(),
            src_embed: self.src_embed.cast(),
            tgt_embed: self.tgt_embed.cast(),
            out_proj: self.out_proj.as_ref().map(|t| t.cast()),
            enc_layers: self
                .enc_layers
                .iter()
                .map(|l| EncLayerParams {
                    self_attn: l.self_attn.cast(),
                    ln1: cast_ln(&l.ln1),
                    ffn: cast_ffn(&l.ffn),
                    ln2: cast_ln(&l.ln2),
                })
                .collect(),
            dec_layers: self
                .dec_layers
                .iter()
                .map(|l| DecLayerParams {
                    self_attn: l.self_attn.cast(),
                    ln1: cast_ln(&l.ln1),
                    cross_attn: l.cross_attn.cast(),
                    ln2: cast_ln(&l.ln2),
                    ffn: cast_ffn(&l.ffn),
                    ln3: cast_ln(&l.ln3),
                })
                .collect(),
            pos_enc: self.pos_enc.cast(),
        }
    }
}

fn cast_ln<F: Scalar, G: Scalar>(l: &LnParams<F>) -> LnParams<G> {
    LnParams {
        gain: l.gain.cast(),
        bias: l.bias.cast(),
    }
}

fn cast_ffn<F: Scalar, G: Scalar>(f: &FfnParams<F>) -> FfnParams<G> {
    FfnParams {
        w1: f.w1.cast(),
        b1: f.b1.cast(),
        w2: f.w2.cast(),
        b2: f.b2.cast(),
    }
}

fn visit_attn<'a, F: Scalar>(
    prefix: &str,
    a: &'a AttentionParams<F>,
    f: &mut dyn FnMut(String, &'a Tensor<F>),
) {
    f(format!("{prefix}.wq"), &a.wq);
    f(format!("{prefix}.wk"), &a.wk);
    f(format!("{prefix}.wv"), &a.wv);
    f(format!("{prefix}.wo"), &a.wo);
}

fn visit_attn_mut<F: Scalar>(
    prefix: &str,
    a: &mut AttentionParams<F>,
    f: &mut dyn FnMut(String, &mut Tensor<F>),
) {
    f(format!("{prefix}.wq"), &mut a.wq);
    f(format!("{prefix}.wk"), &mut a.wk);
    f(format!("{prefix}.wv"), &mut a.wv);
    f(format!("{prefix}.wo"), &mut a.wo);
}

fn visit_ln<'a, F: Scalar>(
    prefix: &str,
    l: &'a LnParams<F>,
    f: &mut dyn FnMut(String, &'a Tensor<F>),
) {
    f(format!("{prefix}.gain"), &l.gain);
    f(format!("{prefix}.bias"), &l.bias);
}

fn visit_ln_mut<F: Scalar>(
    prefix: &str,
    l: &mut LnParams<F>,
    f: &mut dyn FnMut(String, &mut Tensor<F>),
) {
    f(format!("{prefix}.gain"), &mut l.gain);
    f(format!("{prefix}.bias"), &mut l.bias);
}

fn visit_ffn<'a, F: Scalar>(
    prefix: &str,
    l: &'a FfnParams<F>,
    f: &mut dyn FnMut(String, &'a Tensor<F>),
) {
    f(format!("{prefix}.w1"), &l.w1);
    f(format!("{prefix}.b1"), &l.b1);
    f(format!("{prefix}.w2"), &l.w2);
    f(format!("{prefix}.b2"), &l.b2);
}

fn visit_ffn_mut<F: Scalar>(
    prefix: &str,
    l: &mut FfnParams<F>,
    f: &mut dyn FnMut(String, &mut Tensor<F>),
) {
    f(format!("{prefix}.w1"), &mut l.w1);
    f(format!("{prefix}.b1"), &mut l.b1);
    f(format!("{prefix}.w2"), &mut l.w2);
    f(format!("{prefix}.b2"), &mut l.b2);
}
