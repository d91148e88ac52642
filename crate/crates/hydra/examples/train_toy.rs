//! Trains the shared toy model, saves the checkpoint and corpus files under
//! `runs/toy/`, and reports greedy dev BLEU. Other examples reuse this
//! checkpoint.
//!
//! ```bash
//! cargo run --release -p hydra --example train_toy
//! ```

mod common;

use hydra::data::Split;
use hydra::report::artifact_header;
use hydra::train::greedy_corpus_bleu;

fn main() {
    // force a fresh training run even if a checkpoint is cached
    let ckpt = common::run_dir().join("model.ckpt");
    if ckpt.is_file() {
        std::fs::remove_file(&ckpt).unwrap();
    }
    let setup = common::load_or_train();

    let header = artifact_header(0, setup.task.seed);
    for (split, name) in [
        (Split::Train, "train.tsv"),
        (Split::Dev, "dev.tsv"),
        (Split::Test, "test.tsv"),
    ] {
        let pairs: Vec<_> = setup.corpus.split(split).cloned().collect();
        hydra::data::write_corpus(&common::run_dir().join(name), &pairs, &header, false).unwrap();
    }
    std::fs::write(common::run_dir().join("task.cfg"), setup.task.to_text()).unwrap();

    let dev: Vec<_> = setup.corpus.split(Split::Dev).collect();
    let test: Vec<_> = setup.corpus.split(Split::Test).collect();
    let dev_bleu =
        greedy_corpus_bleu(&setup.params, &dev, &setup.vocab_src, &setup.vocab_tgt, 32).unwrap();
    let test_bleu =
        greedy_corpus_bleu(&setup.params, &test, &setup.vocab_src, &setup.vocab_tgt, 32).unwrap();
    println!();
    println!(
        "corpus: {} pairs, task written to runs/toy/task.cfg",
        setup.corpus.pairs.len()
    );
    println!("greedy BLEU: dev {dev_bleu:.2}, test {test_bleu:.2}");
    println!("(single references understate quality here: a third of the words have");
    println!(" three valid translations each and clause order may legally swap)");
}
