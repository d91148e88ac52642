//! Is head sampling better than just adding noise? Perturbs the baseline
//! beam translations with UNK-replacement/swap noise at several p values
//! and compares the (pwb, rfb) operating points against the K curve: at the
//! same pair-wise BLEU, head sampling keeps more reference BLEU.
//!
//! ```bash
//! cargo run --release -p hydra --example noise_vs_sampling
//! ```

mod common;

use hydra::data::Split;
use hydra::decoding::{decode_corpus, noise_perturb, DecodeMode, DecodePolicy};
use hydra::metrics::{pairwise_bleu, reference_bleu, ReferenceBleuMode};
use hydra::rng::RngStream;

fn main() {
    let setup = common::load_or_train();
    let heads = setup.params.config.n_heads;
    let test: Vec<_> = setup.corpus.split(Split::Test).collect();
    let sources: Vec<Vec<u32>> = test
        .iter()
        .map(|p| setup.vocab_src.encode_source(&p.src))
        .collect();
    let references: Vec<Vec<Vec<String>>> = test.iter().map(|p| vec![p.tgt.clone()]).collect();

    // baseline beam outputs, decoded once
    let beam = DecodePolicy {
        beam_size: 5,
        m: 1,
        max_len: 24,
        seed: 7,
        ..DecodePolicy::default()
    };
    let base_groups = decode_corpus(&setup.params, &sources, &beam, 2, false).unwrap();
    let base_words: Vec<Vec<String>> = base_groups
        .iter()
        .map(|g| setup.vocab_tgt.decode(&g.outputs[0].tokens))
        .collect();

    println!("{:<22} {:>8} {:>8}", "set", "rfb", "pwb");
    for p in [0.1f64, 0.3, 0.5, 0.7] {
        let mut rng = RngStream::new(99, &[p.to_bits()]);
        let groups: Vec<Vec<Vec<String>>> = base_words
            .iter()
            .map(|w| (0..5).map(|_| noise_perturb(w, p, &mut rng)).collect())
            .collect();
        let rfb = reference_bleu(&groups, &references, ReferenceBleuMode::AverageOfM).unwrap();
        let pwb = pairwise_bleu(&groups).unwrap();
        println!("{:<22} {rfb:>8.2} {pwb:>8.2}", format!("noise p={p}"));
    }
    for k in [heads / 2, heads / 2 + 1, heads] {
        let policy = DecodePolicy {
            mode: DecodeMode::HeadSample,
            k,
            beam_size: 5,
            m: 5,
            max_len: 24,
            seed: 7,
            ..DecodePolicy::default()
        };
        let groups = decode_corpus(&setup.params, &sources, &policy, 2, false).unwrap();
        let words: Vec<Vec<Vec<String>>> = groups
            .iter()
            .map(|g| g.output_words(&setup.vocab_tgt))
            .collect();
        let rfb = reference_bleu(&words, &references, ReferenceBleuMode::AverageOfM).unwrap();
        let pwb = pairwise_bleu(&words).unwrap();
        println!(
            "{:<22} {rfb:>8.2} {pwb:>8.2}",
            format!("head sampling K={k}")
        );
    }
    println!("\nread rows with similar pwb: head sampling holds more rfb than noise,");
    println!("so its diversity comes from alternative translations, not corruption.");
}
