//! Noise perturbation used to build the random-interference comparison
//! sets: with probability p one word becomes `<unk>`, and independently with
//! probability p two distinct positions swap.

use crate::data::SPECIAL_TOKENS;
use crate::rng::RngStream;

pub fn noise_perturb(sentence: &[String], p: f64, rng: &mut RngStream) -> Vec<String> {
    let mut out = sentence.to_vec();
    if out.is_empty() {
        return out;
    }
    if rng.next_f64() < p {
        let i = rng.uniform_index(out.len());
        out[i] = SPECIAL_TOKENS[3].to_string();
    }
    if out.len() >= 2 && rng.next_f64() < p {
        let i = rng.uniform_index(out.len());
        let j_raw = rng.uniform_index(out.len() - 1);
        let j = if j_raw >= i { j_raw + 1 } else { j_raw };
        out.swap(i, j);
    }
    out
}
