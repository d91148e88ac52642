//! Self back-translation end to end: train a reverse model, synthesize M
//! diverse sources per training target with head sampling, mix, retrain,
//! and compare against Beam-5 synthetics. Smaller than the acceptance-suite
//! pipeline so it finishes in a few minutes.
//!
//! ```bash
//! cargo run --release -p hydra --example back_translation
//! ```

use hydra::backtrans::{mix_and_train, synthesize_pairs};
use hydra::data::{
    build_vocab, gen_corpus, prepare_pairs, CorpusPair, ReorderRule, Split, ToyTaskSpec,
};
use hydra::decoding::{DecodeMode, DecodePolicy};
use hydra::metrics::pairwise_bleu;
use hydra::model::{ModelConfig, ModelParams};
use hydra::numerics::OptimizerConfig;
use hydra::train::{greedy_corpus_bleu, train, TrainConfig};

fn main() {
    let task = ToyTaskSpec {
        src_vocab_size: 20,
        synonyms: 2,
        ambiguous_fraction: 0.2,
        reorder: Some(ReorderRule { marker_prob: 0.3 }),
        len_range: (3, 5),
        corpus_size: 700,
        seed: 3,
    };
    let corpus = gen_corpus(&task).unwrap();
    let (vs, vt) = build_vocab(&corpus.pairs).unwrap();
    let train_pairs: Vec<CorpusPair> = corpus.split(Split::Train).cloned().collect();
    let test_pairs: Vec<&CorpusPair> = corpus.split(Split::Test).collect();
    println!(
        "task: {} train pairs, {} test pairs",
        train_pairs.len(),
        test_pairs.len()
    );

    let model_cfg = |vocab_src: usize, vocab_tgt: usize, dec: usize| ModelConfig {
        d_model: 64,
        n_heads: 4,
        n_enc_layers: 2,
        n_dec_layers: dec,
        d_ffn: 256,
        vocab_src,
        vocab_tgt,
        max_len: 32,
        tied_output: true,
    };
    let train_cfg = |steps: u64| TrainConfig {
        batch_size: 16,
        max_steps: steps,
        log_every: 1000,
        seed: 3,
        optimizer: OptimizerConfig {
            warmup_steps: 400,
            d_model: 64,
            ..Default::default()
        },
    };

    // reverse model on the swapped corpus
    println!("training the reverse model...");
    let swapped: Vec<CorpusPair> = corpus
        .pairs
        .iter()
        .map(|p| CorpusPair {
            src: p.tgt.clone(),
            tgt: p.src.clone(),
            ..p.clone()
        })
        .collect();
    let (rvs, rvt) = build_vocab(&swapped).unwrap();
    let rev_train: Vec<CorpusPair> = swapped
        .iter()
        .filter(|p| p.split == Split::Train)
        .cloned()
        .collect();
    let mut reverse: ModelParams<f32> =
        ModelParams::init(model_cfg(rvs.len(), rvt.len(), 2), 3).unwrap();
    train(
        &mut reverse,
        &prepare_pairs(&rev_train, &rvs, &rvt),
        &train_cfg(4000),
    )
    .unwrap();

    // synthetic corpora
    let targets: Vec<Vec<String>> = train_pairs.iter().map(|p| p.tgt.clone()).collect();
    let head_policy = DecodePolicy {
        mode: DecodeMode::HeadSample,
        k: 2,
        m: 5,
        beam_size: 5,
        max_len: 10,
        seed: 11,
        ..DecodePolicy::default()
    };
    let beam_policy = DecodePolicy {
        m: 5,
        beam_size: 5,
        max_len: 10,
        seed: 11,
        ..DecodePolicy::default()
    };
    let synth_head = synthesize_pairs(&reverse, &rvs, &rvt, &targets, &head_policy, 2).unwrap();
    let synth_beam = synthesize_pairs(&reverse, &rvs, &rvt, &targets, &beam_policy, 2).unwrap();
    let as_groups = |pairs: &[CorpusPair]| -> Vec<Vec<Vec<String>>> {
        pairs
            .chunks(5)
            .map(|c| c.iter().map(|p| p.src.clone()).collect())
            .collect()
    };
    println!(
        "synthetic sources per target: pwb {:.1} (head-sampled) vs {:.1} (one beam's top 5)",
        pairwise_bleu(&as_groups(&synth_head.pairs)).unwrap(),
        pairwise_bleu(&as_groups(&synth_beam.pairs)).unwrap()
    );

    // baseline and the two augmented retrainings
    println!("training baseline and augmented models...");
    let fwd_cfg = model_cfg(vs.len(), vt.len(), 1);
    let mut baseline: ModelParams<f32> = ModelParams::init(fwd_cfg.clone(), 3).unwrap();
    train(
        &mut baseline,
        &prepare_pairs(&train_pairs, &vs, &vt),
        &train_cfg(1800),
    )
    .unwrap();
    let base_bleu = greedy_corpus_bleu(&baseline, &test_pairs, &vs, &vt, 32).unwrap();
    let (_, head_report) = mix_and_train(
        &train_pairs,
        &synth_head.pairs,
        1.0,
        &fwd_cfg,
        &train_cfg(1800),
        &vs,
        &vt,
        &test_pairs,
        3,
    )
    .unwrap();
    let (_, beam_report) = mix_and_train(
        &train_pairs,
        &synth_beam.pairs,
        1.0,
        &fwd_cfg,
        &train_cfg(1800),
        &vs,
        &vt,
        &test_pairs,
        3,
    )
    .unwrap();

    println!();
    println!(
        "mixture size: {} pairs = (1 + M) x {}",
        head_report.train_pairs,
        targets.len()
    );
    println!("test BLEU (single reference):");
    println!("  baseline            {base_bleu:>6.2}");
    println!("  + head-sampled BT   {:>6.2}", head_report.test_bleu);
    println!("  + Beam-5 BT         {:>6.2}", beam_report.test_bleu);
    println!();
    println!("diverse synthetics keep the augmented model closer to (or above) the");
    println!("baseline, while five near-duplicates of one beam overweight one pattern.");
}
