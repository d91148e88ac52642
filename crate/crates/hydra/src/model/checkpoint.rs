//! Checkpoint file format: a text header (format version, configuration,
//! vocabulary lists, parameter manifest with names/shapes/byte offsets)
//! followed by the raw little-endian IEEE-754 32-bit arrays in manifest
//! order. Round-trips are bit-exact.

use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::Scalar;
use std::io::Write;
use std::path::Path;

const MAGIC: &str = "hydra-checkpoint v1";

pub fn save_checkpoint<F: Scalar>(
    path: &Path,
    params: &ModelParams<F>,
    vocab_src: &Vocab,
    vocab_tgt: &Vocab,
) -> Result<()> {
    let cfg = &params.config;
    if vocab_src.len() != cfg.vocab_src || vocab_tgt.len() != cfg.vocab_tgt {
        return Err(Error::invalid_argument(format!(
            "vocabulary sizes ({}, {}) disagree with model config ({}, {})",
            vocab_src.len(),
            vocab_tgt.len(),
            cfg.vocab_src,
            cfg.vocab_tgt
        )));
    }
    if !params.all_finite() {
        return Err(Error::invalid_state(
            "refusing to save non-finite parameters",
        ));
    }

    let mut manifest = String::new();
    let mut offset: u64 = 0;
    params.visit(&mut |name, t| {
        let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!(
            "{name} {} {offset} {}\n",
            shape.join("x"),
            t.len()
        ));
        offset += (t.len() * 4) as u64;
    });

    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!("d_model = {}\n", cfg.d_model));
    header.push_str(&format!("n_heads = {}\n", cfg.n_heads));
    header.push_str(&format!("n_enc_layers = {}\n", cfg.n_enc_layers));
    header.push_str(&format!("n_dec_layers = {}\n", cfg.n_dec_layers));
    header.push_str(&format!("d_ffn = {}\n", cfg.d_ffn));
    header.push_str(&format!("vocab_src = {}\n", cfg.vocab_src));
    header.push_str(&format!("vocab_tgt = {}\n", cfg.vocab_tgt));
    header.push_str(&format!("max_len = {}\n", cfg.max_len));
    header.push_str(&format!("tied_output = {}\n", cfg.tied_output));
    header.push_str("[vocab_src]\n");
    for w in vocab_src.words() {
        header.push_str(w);
        header.push('\n');
    }
    header.push_str("[vocab_tgt]\n");
    for w in vocab_tgt.words() {
        header.push_str(w);
        header.push('\n');
    }
    header.push_str("[manifest]\n");
    header.push_str(&manifest);
    header.push_str("[data]\n");

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(header.as_bytes())?;
    params.visit(&mut |_, t| {
        for x in t.data() {
            // benign: write errors surface at flush
            let _ = out.write_all(&(x.to_f64() as f32).to_le_bytes());
        }
    });
    out.flush()?;
    Ok(())
}

struct LineCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line_no: usize,
}

impl<'a> LineCursor<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        if self.pos >= self.bytes.len() {
            return Err(Error::format("unexpected end of checkpoint header"));
        }
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("checkpoint header line without newline"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::format(format!("non-UTF8 header at line {}", self.line_no + 1)))?;
        self.pos += end + 1;
        self.line_no += 1;
        Ok(line)
    }
}

fn parse_kv(line: &str, key: &str) -> Result<String> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::format(format!("expected `{key} = ...`, got `{line}`")))?;
    if k.trim() != key {
        return Err(Error::format(format!(
            "expected key {key}, got {}",
            k.trim()
        )));
    }
    Ok(v.trim().to_string())
}

fn parse_usize(line: &str, key: &str) -> Result<usize> {
    parse_kv(line, key)?
        .parse()
        .map_err(|_| Error::format(format!("bad integer for {key}")))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams<f32>, Vocab, Vocab)> {
    let bytes = std::fs::read(path)?;
    let mut cur = LineCursor {
        bytes: &bytes,
        pos: 0,
        line_no: 0,
    };
    if cur.next_line()? != MAGIC {
        return Err(Error::format(format!(
            "{} is not a {MAGIC} file",
            path.display()
        )));
    }
    let d_model = parse_usize(cur.next_line()?, "d_model")?;
    let n_heads = parse_usize(cur.next_line()?, "n_heads")?;
    let n_enc_layers = parse_usize(cur.next_line()?, "n_enc_layers")?;
    let n_dec_layers = parse_usize(cur.next_line()?, "n_dec_layers")?;
    let d_ffn = parse_usize(cur.next_line()?, "d_ffn")?;
    let vocab_src_n = parse_usize(cur.next_line()?, "vocab_src")?;
    let vocab_tgt_n = parse_usize(cur.next_line()?, "vocab_tgt")?;
    let max_len = parse_usize(cur.next_line()?, "max_len")?;
    let tied_output = match parse_kv(cur.next_line()?, "tied_output")?.as_str() {
        "true" => true,
        "false" => false,
        other => return Err(Error::format(format!("bad tied_output value {other}"))),
    };
    let config = ModelConfig {
        d_model,
        n_heads,
        n_enc_layers,
        n_dec_layers,
        d_ffn,
        vocab_src: vocab_src_n,
        vocab_tgt: vocab_tgt_n,
        max_len,
        tied_output,
    };
    config.validate()?;

    if cur.next_line()? != "[vocab_src]" {
        return Err(Error::format("missing [vocab_src] section"));
    }
    let mut src_words = Vec::with_capacity(vocab_src_n);
    for _ in 0..vocab_src_n {
        src_words.push(cur.next_line()?.to_string());
    }
    if cur.next_line()? != "[vocab_tgt]" {
        return Err(Error::format("missing [vocab_tgt] section"));
    }
    let mut tgt_words = Vec::with_capacity(vocab_tgt_n);
    for _ in 0..vocab_tgt_n {
        tgt_words.push(cur.next_line()?.to_string());
    }
    let vocab_src = Vocab::from_id_list(src_words)?;
    let vocab_tgt = Vocab::from_id_list(tgt_words)?;

    if cur.next_line()? != "[manifest]" {
        return Err(Error::format("missing [manifest] section"));
    }
    let mut manifest: Vec<(String, Vec<usize>, u64, usize)> = Vec::new();
    loop {
        let line = cur.next_line()?;
        if line == "[data]" {
            break;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::format(format!("bad manifest line `{line}`")));
        }
        let shape: Vec<usize> = fields[1]
            .split('x')
            .map(|d| {
                d.parse()
                    .map_err(|_| Error::format("bad shape in manifest"))
            })
            .collect::<Result<_>>()?;
        let offset: u64 = fields[2]
            .parse()
            .map_err(|_| Error::format("bad offset in manifest"))?;
        let count: usize = fields[3]
            .parse()
            .map_err(|_| Error::format("bad length in manifest"))?;
        if shape.iter().product::<usize>() != count {
            return Err(Error::format(format!(
                "manifest shape/length mismatch for {}",
                fields[0]
            )));
        }
        manifest.push((fields[0].to_string(), shape, offset, count));
    }
    let data = &bytes[cur.pos..];
    let want_bytes: u64 = manifest.iter().map(|(_, _, _, c)| (*c * 4) as u64).sum();
    if data.len() as u64 != want_bytes {
        return Err(Error::format(format!(
            "checkpoint data section has {} bytes, manifest wants {want_bytes}",
            data.len()
        )));
    }

    // shape skeleton, then fill tensors from the manifest
    let mut params: ModelParams<f32> = ModelParams::init(config, 0)?;
    let mut loaded = 0usize;
    let mut load_err: Option<Error> = None;
    params.visit_mut(&mut |name, t| {
        if load_err.is_some() {
            return;
        }
        match manifest.iter().find(|(n, _, _, _)| *n == name) {
            Some((_, shape, offset, count)) => {
                if shape != t.shape() {
                    load_err = Some(Error::format(format!(
                        "parameter {name}: checkpoint shape {shape:?} vs model {:?}",
                        t.shape()
                    )));
                    return;
                }
                let start = *offset as usize;
                for (i, x) in t.data_mut().iter_mut().enumerate() {
                    let b = &data[start + i * 4..start + i * 4 + 4];
                    *x = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                }
                loaded += count;
            }
            None => {
                load_err = Some(Error::format(format!(
                    "parameter {name} missing from checkpoint"
                )));
            }
        }
    });
    if let Some(e) = load_err {
        return Err(e);
    }
    let manifest_total: usize = manifest.iter().map(|(_, _, _, c)| *c).sum();
    if loaded != manifest_total {
        return Err(Error::format(
            "checkpoint contains parameters the model does not",
        ));
    }
    if !params.all_finite() {
        return Err(Error::format("checkpoint contains non-finite parameters"));
    }
    Ok((params, vocab_src, vocab_tgt))
}

/// Rebuilds a 64-bit copy for verification runs.
pub fn widen(params: &ModelParams<f32>) -> ModelParams<f64> {
    params.cast()
}
