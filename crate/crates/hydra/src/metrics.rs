//! Corpus BLEU, pair-wise BLEU, reference-BLEU protocols, and DEQ.
//!
//! The BLEU variant is case-sensitive, whitespace-tokenized, 4-gram,
//! corpus-level and unsmoothed (multi-bleu style): clipped counts aggregated
//! over the corpus, max clip across multiple references, closest reference
//! length for the brevity penalty (ties toward the shorter reference). A
//! smoothed sentence-level score exists only to select the best-in-group
//! output for the baseline reference-BLEU protocol.

use crate::error::{Error, Result};
use std::collections::HashMap;

pub const MAX_NGRAM: usize = 4;

/// Corpus BLEU with its components.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    /// 0..=100.
    pub value: f64,
    pub precisions: [f64; MAX_NGRAM],
    pub matched: [u64; MAX_NGRAM],
    pub totals: [u64; MAX_NGRAM],
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

/// rfb/pwb/DEQ of one run, optionally relative to a named baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rfb: f64,
    pub pwb: f64,
    pub baseline_rfb: Option<f64>,
    pub baseline_pwb: Option<f64>,
    /// Present iff baseline values are present and rfb* != rfb.
    pub deq: Option<f64>,
    /// True when a baseline was supplied but DEQ is undefined (rfb* == rfb).
    pub deq_undefined: bool,
    pub meta: String,
}

impl MetricsReport {
    pub fn new(rfb: f64, pwb: f64, baseline: Option<(f64, f64)>, meta: String) -> Self {
        let (baseline_rfb, baseline_pwb) = match baseline {
            Some((r, p)) => (Some(r), Some(p)),
            None => (None, None),
        };
        let (deq_value, deq_undefined) = match baseline {
            Some((r, p)) => match deq(r, p, rfb, pwb) {
                Ok(v) => (Some(v), false),
                Err(_) => (None, true),
            },
            None => (None, false),
        };
        MetricsReport {
            rfb,
            pwb,
            baseline_rfb,
            baseline_pwb,
            deq: deq_value,
            deq_undefined,
            meta,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut m: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn closest_ref_len(hyp_len: usize, refs: &[Vec<String>]) -> u64 {
    let mut best: Option<usize> = None;
    for r in refs {
        let rl = r.len();
        best = Some(match best {
            None => rl,
            Some(b) => {
                let (db, dr) = (
                    (b as i64 - hyp_len as i64).abs(),
                    (rl as i64 - hyp_len as i64).abs(),
                );
                if dr < db || (dr == db && rl < b) {
                    rl
                } else {
                    b
                }
            }
        });
    }
    best.unwrap_or(0) as u64
}

fn accumulate_counts(
    hyp: &[String],
    refs: &[Vec<String>],
    matched: &mut [u64; MAX_NGRAM],
    totals: &mut [u64; MAX_NGRAM],
) {
    for n in 1..=MAX_NGRAM {
        let hyp_counts = ngram_counts(hyp, n);
        let windows = hyp.len().saturating_sub(n - 1) as u64;
        totals[n - 1] += windows;
        if hyp_counts.is_empty() {
            continue;
        }
        let ref_counts: Vec<HashMap<&[String], u64>> =
            refs.iter().map(|r| ngram_counts(r, n)).collect();
        for (gram, &count) in &hyp_counts {
            let max_ref = ref_counts
                .iter()
                .map(|rc| rc.get(gram).copied().unwrap_or(0))
                .max();
            matched[n - 1] += count.min(max_ref.unwrap_or(0));
        }
    }
}

fn bleu_from_counts(
    matched: [u64; MAX_NGRAM],
    totals: [u64; MAX_NGRAM],
    hyp_len: u64,
    ref_len: u64,
) -> BleuScore {
    let mut precisions = [0.0; MAX_NGRAM];
    for n in 0..MAX_NGRAM {
        if totals[n] > 0 {
            precisions[n] = matched[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let value = if matched.contains(&0) || hyp_len == 0 {
        0.0
    } else {
        let mean_log: f64 = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_NGRAM as f64;
        brevity_penalty * mean_log.exp() * 100.0
    };
    BleuScore {
        value,
        precisions,
        matched,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
    }
}

/// Case-sensitive, unsmoothed 4-gram corpus BLEU with multi-reference
/// clipping.
pub fn corpus_bleu(
    hypotheses: &[Vec<String>],
    references: &[Vec<Vec<String>>],
) -> Result<BleuScore> {
    if hypotheses.is_empty() {
        return Err(Error::invalid_argument("corpus_bleu on empty corpus"));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::invalid_argument(format!(
            "corpus_bleu: {} hypotheses vs {} reference lists",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut matched = [0u64; MAX_NGRAM];
    let mut totals = [0u64; MAX_NGRAM];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, refs) in hypotheses.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::invalid_argument("sentence without references"));
        }
        accumulate_counts(hyp, refs, &mut matched, &mut totals);
        hyp_len += hyp.len() as u64;
        ref_len += closest_ref_len(hyp.len(), refs);
    }
    Ok(bleu_from_counts(matched, totals, hyp_len, ref_len))
}

/// Add-one smoothed sentence-level BLEU, used only to pick the best output
/// of a group against references.
pub fn sentence_bleu_smoothed(hyp: &[String], refs: &[Vec<String>]) -> f64 {
    let mut matched = [0u64; MAX_NGRAM];
    let mut totals = [0u64; MAX_NGRAM];
    accumulate_counts(hyp, refs, &mut matched, &mut totals);
    let hyp_len = hyp.len() as u64;
    let ref_len = closest_ref_len(hyp.len(), refs);
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let mean_log: f64 = (0..MAX_NGRAM)
        .map(|n| ((matched[n] + 1) as f64 / (totals[n] + 1) as f64).ln())
        .sum::<f64>()
        / MAX_NGRAM as f64;
    brevity_penalty * mean_log.exp() * 100.0
}

/// Average pair-wise BLEU over ordered slot pairs, corpus-level: slot `a`
/// as hypotheses against slot `b` as single references, for all a != b.
/// Lower means more diverse. `groups[sentence][slot]` are tokenized outputs.
pub fn pairwise_bleu(groups: &[Vec<Vec<String>>]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::invalid_argument("pairwise_bleu on empty group list"));
    }
    let m = groups[0].len();
    if m < 2 {
        return Err(Error::invalid_argument(
            "pairwise_bleu needs at least 2 outputs per group",
        ));
    }
    if let Some(bad) = groups.iter().find(|g| g.len() != m) {
        return Err(Error::invalid_argument(format!(
            "pairwise_bleu: ragged groups ({} vs {m} outputs)",
            bad.len()
        )));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let hyps: Vec<Vec<String>> = groups.iter().map(|g| g[a].clone()).collect();
            let refs: Vec<Vec<Vec<String>>> = groups.iter().map(|g| vec![g[b].clone()]).collect();
            total += corpus_bleu(&hyps, &refs)?.value;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceBleuMode {
    /// Per sentence, pick the group output with the best smoothed sentence
    /// BLEU against the references, then corpus BLEU over the picks.
    BaselineTop,
    /// Corpus BLEU of slot m against the references, averaged over m.
    AverageOfM,
}

/// Reference BLEU of M-output groups under the chosen protocol.
pub fn reference_bleu(
    groups: &[Vec<Vec<String>>],
    references: &[Vec<Vec<String>>],
    mode: ReferenceBleuMode,
) -> Result<f64> {
    if groups.len() != references.len() {
        return Err(Error::invalid_argument(format!(
            "reference_bleu: {} groups vs {} reference lists",
            groups.len(),
            references.len()
        )));
    }
    if groups.is_empty() {
        return Err(Error::invalid_argument("reference_bleu on empty corpus"));
    }
    let m = groups[0].len();
    if m == 0 || groups.iter().any(|g| g.len() != m) {
        return Err(Error::invalid_argument(
            "reference_bleu: ragged or empty groups",
        ));
    }
    match mode {
        ReferenceBleuMode::BaselineTop => {
            let picks: Vec<Vec<String>> = groups
                .iter()
                .zip(references)
                .map(|(g, refs)| {
                    let mut best = 0usize;
                    let mut best_score = f64::NEG_INFINITY;
                    for (i, out) in g.iter().enumerate() {
                        let s = sentence_bleu_smoothed(out, refs);
                        if s > best_score {
                            best_score = s;
                            best = i;
                        }
                    }
                    g[best].clone()
                })
                .collect();
            Ok(corpus_bleu(&picks, references)?.value)
        }
        ReferenceBleuMode::AverageOfM => {
            let mut total = 0.0;
            for slot in 0..m {
                let hyps: Vec<Vec<String>> = groups.iter().map(|g| g[slot].clone()).collect();
                total += corpus_bleu(&hyps, references)?.value;
            }
            Ok(total / m as f64)
        }
    }
}

/// Diversity Enhancement per Quality: (pwb* - pwb) / (rfb* - rfb), where
/// starred values belong to the baseline. Sign is preserved; equal reference
/// BLEUs make the quantity undefined and that is reported as an error, never
/// as an infinity.
pub fn deq(rfb_star: f64, pwb_star: f64, rfb: f64, pwb: f64) -> Result<f64> {
    if rfb_star == rfb {
        return Err(Error::UndefinedDeq { rfb });
    }
    Ok((pwb_star - pwb) / (rfb_star - rfb))
}
