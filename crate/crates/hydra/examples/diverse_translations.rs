//! Decodes a few sentences M times at different K thresholds and prints the
//! outputs, marking which ones the task oracle accepts as valid
//! translations. K=0 reproduces plain beam search (five identical outputs);
//! K=H samples a head at every step.
//!
//! ```bash
//! cargo run --release -p hydra --example diverse_translations
//! ```

mod common;

use hydra::data::is_valid_translation;
use hydra::decoding::{diverse_decode, DecodeMode, DecodePolicy};

fn main() {
    let setup = common::load_or_train();
    let heads = setup.params.config.n_heads;
    let sentences = common::sample_test_sources(&setup, 3);

    for (words, src) in &sentences {
        println!("\nsource: {}", words.join(" "));
        for k in [0, heads / 2, heads] {
            let policy = DecodePolicy {
                mode: DecodeMode::HeadSample,
                k,
                beam_size: 5,
                m: 5,
                max_len: 24,
                seed: 7,
                ..DecodePolicy::default()
            };
            let group = diverse_decode(&setup.params, src, &policy, 0).unwrap();
            println!("  K = {k}:");
            for out in &group.outputs {
                let text = setup.vocab_tgt.decode(&out.tokens);
                let valid = if is_valid_translation(words, &text, &setup.task) {
                    "valid  "
                } else {
                    "INVALID"
                };
                println!("    [{valid}] ({:+.3}) {}", out.score, text.join(" "));
            }
        }
    }
    println!("\nhigher K samples heads more often: more variety, more risk.");
}
