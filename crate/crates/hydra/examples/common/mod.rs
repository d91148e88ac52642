//! Shared setup for the runnable examples: a small ambiguous translation
//! task and a transformer trained on it. The first example to run trains
//! the model (about a minute) and caches the checkpoint under `runs/toy/`;
//! later runs load it.

use hydra::data::{
    build_vocab, gen_corpus, prepare_pairs, CorpusPair, ParallelCorpus, ReorderRule, Split,
    ToyTaskSpec, Vocab,
};
use hydra::model::checkpoint::{load_checkpoint, save_checkpoint};
use hydra::model::{ModelConfig, ModelParams};
use hydra::numerics::OptimizerConfig;
use hydra::train::{greedy_corpus_bleu, train, TrainConfig};
use std::path::PathBuf;

// each example uses a different subset of these fields
#[allow(dead_code)]
pub struct ToySetup {
    pub params: ModelParams<f32>,
    pub vocab_src: Vocab,
    pub vocab_tgt: Vocab,
    pub task: ToyTaskSpec,
    pub corpus: ParallelCorpus,
}

pub fn run_dir() -> PathBuf {
    PathBuf::from("runs/toy")
}

pub fn toy_task() -> ToyTaskSpec {
    ToyTaskSpec {
        src_vocab_size: 40,
        synonyms: 3,
        ambiguous_fraction: 0.3,
        reorder: Some(ReorderRule { marker_prob: 0.6 }),
        len_range: (3, 7),
        corpus_size: 1500,
        seed: 2,
    }
}

pub fn load_or_train() -> ToySetup {
    let task = toy_task();
    let corpus = gen_corpus(&task).expect("generate corpus");
    let ckpt = run_dir().join("model.ckpt");
    if ckpt.is_file() {
        let (params, vocab_src, vocab_tgt) = load_checkpoint(&ckpt).expect("load checkpoint");
        println!("loaded cached model from {}", ckpt.display());
        return ToySetup {
            params,
            vocab_src,
            vocab_tgt,
            task,
            corpus,
        };
    }
    println!(
        "no cached model at {}; training one (about a minute)...",
        ckpt.display()
    );
    let (vocab_src, vocab_tgt) = build_vocab(&corpus.pairs).expect("vocab");
    let cfg = ModelConfig {
        d_model: 64,
        n_heads: 8,
        n_enc_layers: 2,
        n_dec_layers: 2,
        d_ffn: 256,
        vocab_src: vocab_src.len(),
        vocab_tgt: vocab_tgt.len(),
        max_len: 32,
        tied_output: true,
    };
    let tc = TrainConfig {
        batch_size: 16,
        max_steps: 3000,
        log_every: 500,
        seed: 2,
        optimizer: OptimizerConfig {
            warmup_steps: 500,
            d_model: 64,
            ..Default::default()
        },
    };
    let train_pairs: Vec<CorpusPair> = corpus.split(Split::Train).cloned().collect();
    let encoded = prepare_pairs(&train_pairs, &vocab_src, &vocab_tgt);
    let mut params: ModelParams<f32> = ModelParams::init(cfg, 2).unwrap();
    train(&mut params, &encoded, &tc).expect("train");
    std::fs::create_dir_all(run_dir()).unwrap();
    save_checkpoint(&ckpt, &params, &vocab_src, &vocab_tgt).expect("save checkpoint");
    let dev: Vec<&CorpusPair> = corpus
        .pairs
        .iter()
        .filter(|p| p.split == Split::Dev)
        .collect();
    let bleu = greedy_corpus_bleu(&params, &dev, &vocab_src, &vocab_tgt, 32).unwrap();
    println!(
        "trained and saved ({} params, greedy dev BLEU {bleu:.2})",
        params.param_count()
    );
    ToySetup {
        params,
        vocab_src,
        vocab_tgt,
        task,
        corpus,
    }
}

/// First couple of test sentences, encoded.
#[allow(dead_code)]
pub fn sample_test_sources(setup: &ToySetup, n: usize) -> Vec<(Vec<String>, Vec<u32>)> {
    setup
        .corpus
        .split(Split::Test)
        .take(n)
        .map(|p| (p.src.clone(), setup.vocab_src.encode_source(&p.src)))
        .collect()
}
