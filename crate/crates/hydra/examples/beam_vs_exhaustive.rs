//! Sanity-checks the search: on a task tiny enough to enumerate every
//! candidate sequence, a beam wider than the whole space must return the
//! exhaustive argmax of the length-normalized score.
//!
//! ```bash
//! cargo run --release -p hydra --example beam_vs_exhaustive
//! ```

use hydra::data::{build_vocab, gen_corpus, prepare_pairs, CorpusPair, Split, ToyTaskSpec, EOS_ID};
use hydra::decoding::{beam_search, DecodePolicy};
use hydra::model::{ModelConfig, ModelParams};
use hydra::numerics::OptimizerConfig;
use hydra::train::{train, TrainConfig};

fn main() {
    let task = ToyTaskSpec {
        src_vocab_size: 3,
        corpus_size: 30,
        len_range: (1, 3),
        seed: 4,
        ..ToyTaskSpec::default()
    };
    let corpus = gen_corpus(&task).unwrap();
    let (vs, vt) = build_vocab(&corpus.pairs).unwrap();
    let cfg = ModelConfig {
        d_model: 16,
        n_heads: 2,
        n_enc_layers: 1,
        n_dec_layers: 1,
        d_ffn: 32,
        vocab_src: vs.len(),
        vocab_tgt: vt.len(),
        max_len: 8,
        tied_output: true,
    };
    let pairs: Vec<CorpusPair> = corpus.split(Split::Train).cloned().collect();
    let mut params: ModelParams<f32> = ModelParams::init(cfg, 4).unwrap();
    let tc = TrainConfig {
        batch_size: 8,
        max_steps: 400,
        log_every: 100,
        seed: 4,
        optimizer: OptimizerConfig {
            warmup_steps: 100,
            d_model: 16,
            ..Default::default()
        },
    };
    train(&mut params, &prepare_pairs(&pairs, &vs, &vt), &tc).unwrap();
    println!(
        "trained a {}-word model; vocabulary size {}",
        task.src_vocab_size,
        vt.len()
    );

    let max_gen = 4;
    let policy = DecodePolicy {
        beam_size: 1300,
        max_len: max_gen,
        ..DecodePolicy::default()
    };
    let non_eos: Vec<u32> = (0..vt.len() as u32).filter(|&t| t != EOS_ID).collect();
    let alpha = policy.length_alpha;
    for pair in corpus.split(Split::Test).take(3) {
        let src = vs.encode_source(&pair.src);
        let top = &beam_search(&params, &src, &policy, 0, 0).unwrap()[0];

        // exhaustive enumeration of every candidate the beam could emit
        let mut best_score = f64::NEG_INFINITY;
        let mut best_seq: Vec<u32> = Vec::new();
        let mut n_seqs = 0u64;
        let mut stack: Vec<Vec<u32>> = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() < max_gen {
                let mut fin = prefix.clone();
                fin.push(EOS_ID);
                let raw = params.score_prefix(&src, &fin).unwrap();
                let score = raw / (fin.len() as f64).powf(alpha);
                n_seqs += 1;
                if score > best_score {
                    best_score = score;
                    best_seq = fin;
                }
                for &t in &non_eos {
                    let mut next = prefix.clone();
                    next.push(t);
                    stack.push(next);
                }
            } else {
                let raw = params.score_prefix(&src, &prefix).unwrap();
                let score = raw / (prefix.len() as f64).powf(alpha);
                n_seqs += 1;
                if score > best_score {
                    best_score = score;
                    best_seq = prefix;
                }
            }
        }
        println!("\nsource       : {}", pair.src.join(" "));
        println!(
            "beam top     : {}  ({:+.4})",
            vt.decode(&top.tokens).join(" "),
            top.score
        );
        println!(
            "exhaustive   : {}  ({best_score:+.4}) over {n_seqs} sequences",
            vt.decode(&best_seq).join(" ")
        );
        assert_eq!(top.tokens, best_seq, "beam must find the global argmax");
    }
    println!("\nevery beam result matched the exhaustive argmax.");
}
