//! Diversity as a function of sentence length. Two regimes show up on the
//! toy task: sentences with the clause-swap marker get most of their
//! diversity from one structural flip (which rewrites a short sentence
//! almost completely), while plain sentences diversify through accumulated
//! per-step sampling, which grows with length. The example prints both
//! curves and writes `runs/toy/length_curve.csv` for the full set.
//!
//! ```bash
//! cargo run --release -p hydra --example length_curve
//! ```

mod common;

use hydra::analysis::{length_diversity_curve, spearman};
use hydra::data::{Split, MARKER_WORD};
use hydra::decoding::{decode_corpus, DecodeMode, DecodePolicy};
use hydra::report::{artifact_header, write_length_curve};

fn main() {
    let setup = common::load_or_train();
    let heads = setup.params.config.n_heads;
    let eval: Vec<_> = setup
        .corpus
        .split(Split::Test)
        .chain(setup.corpus.split(Split::Dev))
        .collect();
    let sources: Vec<Vec<u32>> = eval
        .iter()
        .map(|p| setup.vocab_src.encode_source(&p.src))
        .collect();

    let policy = DecodePolicy {
        mode: DecodeMode::HeadSample,
        k: heads,
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

    for (label, with_marker) in [("clause-swap sentences", true), ("plain sentences", false)] {
        let subset: Vec<(Vec<Vec<String>>, usize)> = eval
            .iter()
            .zip(&words)
            .filter(|(p, _)| p.src.iter().any(|w| w == MARKER_WORD) == with_marker)
            .map(|(p, g)| (g.clone(), p.src.len()))
            .collect();
        let (gs, lens): (Vec<_>, Vec<_>) = subset.into_iter().unzip();
        let curve = length_diversity_curve(&gs, &lens, 2).unwrap();
        println!("\n{label}:");
        println!("{:>10} {:>10} {:>8}", "src length", "sentences", "pwb");
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for b in curve.iter().filter(|b| b.sentences > 0) {
            let pwb = b.pwb.unwrap();
            let note = if b.low_support { "  (low support)" } else { "" };
            println!("{:>10} {:>10} {pwb:>8.2}{note}", b.len_lo, b.sentences);
            if !b.low_support {
                xs.push(b.len_lo as f64);
                ys.push(pwb);
            }
        }
        if xs.len() >= 2 {
            println!("Spearman(length, pwb) = {:.3}", spearman(&xs, &ys));
        }
    }

    let lengths: Vec<usize> = eval.iter().map(|p| p.src.len()).collect();
    let curve = length_diversity_curve(&words, &lengths, 1).unwrap();
    let path = common::run_dir().join("length_curve.csv");
    std::fs::create_dir_all(common::run_dir()).unwrap();
    write_length_curve(&path, &curve, &artifact_header(0, 7)).unwrap();
    println!("\nwrote {}", path.display());
}
