//! Diversity penalties for beam search: sibling-rank reranking and the
//! hamming (same-word-at-same-step) logit penalty.

/// Rank-based sibling penalty. Each inner slice holds one parent's expansion
/// scores already sorted descending; the r-th ranked sibling (r starting at
/// 0) loses `strength * r`.
pub fn sibling_penalty_rerank(groups: &[Vec<f64>], strength: f64) -> Vec<Vec<f64>> {
    groups
        .iter()
        .map(|scores| {
            debug_assert!(
                scores.windows(2).all(|w| w[0] >= w[1]),
                "siblings must be sorted"
            );
            scores
                .iter()
                .enumerate()
                .map(|(r, &s)| s - strength * r as f64)
                .collect()
        })
        .collect()
}

/// Hamming diversity penalty: the logit of token t drops by
/// `strength * count`, where count is how many earlier groups emitted t at
/// this step. `emitted` lists those tokens with multiplicity.
pub fn hamming_penalty(logits: &[f64], emitted: &[u32], strength: f64) -> Vec<f64> {
    let mut counts = vec![0u32; logits.len()];
    for &tok in emitted {
        if let Some(c) = counts.get_mut(tok as usize) {
            *c += 1;
        }
    }
    logits
        .iter()
        .zip(&counts)
        .map(|(&l, &c)| if c > 0 { l - strength * c as f64 } else { l })
        .collect()
}
