//! The head-sampling policy: per decoding step, each cross-attention head
//! votes for the source position it attends to most; when no position
//! collects more than K votes the heads disagree ("confusing" step), and one
//! head's attention row is copied to all heads before the step proceeds.

use crate::error::{Error, Result};
use crate::model::attention::{row_is_stochastic, HeadOverride};
use crate::rng::RngStream;

/// Per-step head votes: `candidates[h]` is head h's argmax source position,
/// `counts[i]` how many heads chose position i. The counts always sum to the
/// number of heads.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateHistogram {
    pub counts: Vec<u32>,
    pub candidates: Vec<usize>,
}

impl CandidateHistogram {
    pub fn max_count(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// Argmax of a probability row; ties break toward the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Builds the vote histogram from the final-layer attention rows
/// (one stochastic row over source positions per head).
pub fn candidate_histogram(rows: &[Vec<f64>]) -> Result<CandidateHistogram> {
    if rows.is_empty() {
        return Err(Error::invalid_argument(
            "candidate_histogram needs at least one head",
        ));
    }
    let t = rows[0].len();
    let mut counts = vec![0u32; t];
    let mut candidates = Vec::with_capacity(rows.len());
    for (h, row) in rows.iter().enumerate() {
        if row.len() != t {
            return Err(Error::invalid_argument("attention rows differ in length"));
        }
        if !row_is_stochastic(row, 1e-4) {
            return Err(Error::invalid_argument(format!(
                "head {h} attention row is not stochastic"
            )));
        }
        let c = argmax(row);
        candidates.push(c);
        counts[c] += 1;
    }
    debug_assert_eq!(counts.iter().sum::<u32>() as usize, rows.len());
    Ok(CandidateHistogram { counts, candidates })
}

/// Applies the confusing condition `max(n_i) <= K`.
///
/// Returns no override when some position holds more than K votes (the step
/// proceeds unchanged). Otherwise samples one head uniformly — advancing
/// `rng` by exactly one draw — and returns an override that copies that
/// head's row to every head of `layer`.
pub fn head_sample_policy(
    hist: &CandidateHistogram,
    rows: &[Vec<f64>],
    k: usize,
    layer: usize,
    rng: &mut RngStream,
) -> Option<HeadOverride> {
    debug_assert!(k <= rows.len(), "K must be at most the head count");
    if hist.max_count() > k as u32 {
        return None;
    }
    let head = rng.uniform_index(rows.len());
    Some(HeadOverride::broadcast(
        layer,
        rows[head].clone(),
        rows.len(),
    ))
}
