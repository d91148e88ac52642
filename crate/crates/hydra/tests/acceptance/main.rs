//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line (run with `cargo test --test acceptance -- --nocapture` to see
//! them). The heavier checks train small models; fixtures are shared
//! between tests through `OnceLock`.
//!
//! Exact observed values of the stochastic-looking (but fully
//! deterministic) runs are pinned in `tests/golden/`; regenerate with
//! `HYDRA_WRITE_GOLDEN=1 cargo test --test acceptance`.

mod fixtures;
mod oracles;

use fixtures::*;
use hydra::analysis::alignment_stats;
use hydra::data::{is_valid_translation, valid_translations, TranslationSet};
use hydra::decoding::{
    beam_search, diverse_decode_opts, hamming_penalty, noise_perturb, sibling_penalty_rerank,
    DecodeMode, DecodePolicy,
};
use hydra::metrics::{corpus_bleu, deq, pairwise_bleu};
use hydra::model::{ModelConfig, ModelParams};
use hydra::numerics::{label_smoothed_loss, layer_norm_backward, layer_norm_forward, LnCache};
use hydra::rng::RngStream;
use std::time::Instant;

fn pass(n: u32, name: &str, detail: &str) {
    println!("ACCEPTANCE {n} ({name}): PASS  {detail}");
}

// 1 ---------------------------------------------------------------- DEQ

/// (rfb*, pwb*, rfb, pwb, expected DEQ)
const DEQ_FIXTURES: &[(f64, f64, f64, f64, f64)] = &[
    // Zh2En block
    (44.32, 83.95, 20.62, 10.72, 3.09),
    (44.32, 83.95, 43.18, 80.24, 3.25),
    (44.32, 83.95, 39.58, 58.07, 5.46),
    (44.32, 83.95, 38.54, 60.70, 4.02),
    (44.32, 83.95, 42.66, 66.18, 10.70),
    (44.32, 83.95, 39.80, 51.66, 7.14),
    (44.32, 83.95, 37.57, 43.74, 5.96),
    (44.32, 83.95, 35.20, 37.82, 5.06),
    // En2De block
    (26.31, 80.41, 11.99, 12.84, 4.72),
    (26.31, 80.41, 25.27, 78.57, 1.77),
    (26.31, 80.41, 23.27, 66.13, 4.70),
    (26.31, 80.41, 23.22, 68.03, 4.01),
    (26.31, 80.41, 25.62, 78.96, 2.10),
    (26.31, 80.41, 24.26, 62.04, 8.96),
    (26.31, 80.41, 22.62, 50.14, 8.20),
    (26.31, 80.41, 19.76, 38.36, 6.42),
    // En2Ro block
    (31.76, 81.29, 18.85, 20.82, 4.68),
    (31.76, 81.29, 31.02, 78.42, 3.88),
    (31.76, 81.29, 28.91, 69.67, 4.08),
    // -6.41: the only row whose conventionally quoted rounding (-6.04)
    // contradicts its own inputs; the arithmetic value is asserted
    (31.76, 81.29, 31.07, 85.71, -6.41),
    (31.76, 81.29, 31.33, 82.41, -2.60),
    (31.76, 81.29, 30.06, 71.12, 5.98),
    (31.76, 81.29, 27.89, 59.42, 5.65),
    (31.76, 81.29, 26.43, 50.56, 5.77),
];

#[test]
fn c01_deq_arithmetic() {
    let start = Instant::now();
    for &(rfb_s, pwb_s, rfb, pwb, want) in DEQ_FIXTURES {
        let got = deq(rfb_s, pwb_s, rfb, pwb).unwrap();
        assert!(
            (got - want).abs() < 0.01 + 1e-12,
            "deq({rfb_s},{pwb_s},{rfb},{pwb}) = {got}, expected {want}"
        );
    }
    assert!(matches!(
        deq(40.0, 80.0, 40.0, 70.0),
        Err(hydra::Error::UndefinedDeq { .. })
    ));
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.3}s, budget 1s");
    pass(
        1,
        "DEQ arithmetic",
        &format!("{} rows in {elapsed:.4}s", DEQ_FIXTURES.len()),
    );
}

// 2 --------------------------------------------------------- BLEU oracle

#[test]
fn c02_bleu_oracle_equivalence() {
    let start = Instant::now();
    let mut stream = RngStream::new(20250808, &[2]);
    for case in 0..50 {
        let (hyps, refs) = oracles::random_tiny_corpus(&mut stream);
        let got = corpus_bleu(&hyps, &refs).unwrap().value;
        let want = oracles::brute_force_bleu(&hyps, &refs);
        assert!(
            (got - want).abs() < 1e-9,
            "case {case}: corpus_bleu {got} vs brute force {want}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.2}s, budget 10s");
    pass(
        2,
        "BLEU oracle equivalence",
        &format!("50 corpora in {elapsed:.3}s"),
    );
}

// 3 ------------------------------------------------------ gradient suite

#[test]
fn c03_gradient_suite() {
    let start = Instant::now();
    let mut stream = RngStream::new(303, &[0]);
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);

    // softmax: d(sum(dy .* softmax(v)))/dv against central differences
    for _ in 0..20 {
        let n = 5 + stream.uniform_index(5);
        let v: Vec<f64> = (0..n).map(|_| stream.next_f64() * 6.0 - 3.0).collect();
        let dy: Vec<f64> = (0..n).map(|_| stream.next_f64() * 2.0 - 1.0).collect();
        let y = hydra::numerics::softmax(&v).unwrap();
        let mut dv = vec![0.0; n];
        hydra::numerics::softmax_backward(&y, &dy, &mut dv);
        let h = 1e-6;
        for i in 0..n {
            let (mut vp, mut vm) = (v.clone(), v.clone());
            vp[i] += h;
            vm[i] -= h;
            let f = |vv: &[f64]| -> f64 {
                hydra::numerics::softmax(vv)
                    .unwrap()
                    .iter()
                    .zip(&dy)
                    .map(|(a, b)| a * b)
                    .sum()
            };
            let num = (f(&vp) - f(&vm)) / (2.0 * h);
            assert!(
                rel(dv[i], num) < 1e-4,
                "softmax grad {i}: {} vs {num}",
                dv[i]
            );
        }
    }

    // layer norm
    for _ in 0..20 {
        let n = 8;
        let v: Vec<f64> = (0..n).map(|_| stream.next_f64() * 4.0 - 2.0).collect();
        let gain: Vec<f64> = (0..n).map(|_| stream.next_f64() + 0.5).collect();
        let bias: Vec<f64> = (0..n).map(|_| stream.next_f64() - 0.5).collect();
        let dy: Vec<f64> = (0..n).map(|_| stream.next_f64() * 2.0 - 1.0).collect();
        let mut out = vec![0.0; n];
        let mut cache = LnCache::default();
        layer_norm_forward(&v, &gain, &bias, &mut out, &mut cache);
        let (mut dx, mut dg, mut db) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        layer_norm_backward(&dy, &gain, &cache, &mut dx, &mut dg, &mut db);
        let f = |vv: &[f64]| -> f64 {
            let mut o = vec![0.0; n];
            layer_norm_forward(vv, &gain, &bias, &mut o, &mut LnCache::default());
            o.iter().zip(&dy).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in 0..n {
            let (mut vp, mut vm) = (v.clone(), v.clone());
            vp[i] += h;
            vm[i] -= h;
            let num = (f(&vp) - f(&vm)) / (2.0 * h);
            assert!(rel(dx[i], num) < 1e-4, "layer_norm grad {i}");
        }
    }

    // label-smoothed loss
    for case in 0..20 {
        let n = 6 + (case % 5);
        let logits: Vec<f64> = (0..n).map(|_| stream.next_f64() * 4.0 - 2.0).collect();
        let target = case % n;
        let (_, grad) = label_smoothed_loss(&logits, target, 0.1).unwrap();
        let h = 1e-6;
        for i in 0..n {
            let (mut lp, mut lm) = (logits.clone(), logits.clone());
            lp[i] += h;
            lm[i] -= h;
            let fp = label_smoothed_loss(&lp, target, 0.1).unwrap().0;
            let fm = label_smoothed_loss(&lm, target, 0.1).unwrap().0;
            let num = (fp - fm) / (2.0 * h);
            assert!(rel(grad[i], num) < 1e-4, "label smoothing grad {i}");
        }
    }

    // attention block, sampled entries, 20 instances
    oracles::attention_gradient_check(&mut stream);

    // full model: every parameter of a 2-layer, d_model 16 configuration
    let cfg = ModelConfig {
        d_model: 16,
        n_heads: 2,
        n_enc_layers: 2,
        n_dec_layers: 2,
        d_ffn: 32,
        vocab_src: 9,
        vocab_tgt: 9,
        max_len: 8,
        tied_output: true,
    };
    let params: ModelParams<f64> = ModelParams::init(cfg, 17).unwrap();
    let batch = vec![(vec![4, 5, 6, 2], vec![7, 8]), (vec![8, 2], vec![4, 5, 6])];
    let (_, grads) = params.forward_loss(&batch, 0.1).unwrap();
    let mut names = Vec::new();
    grads.visit(&mut |n, _| names.push(n));
    let h = 1e-5;
    let mut checked = 0usize;
    for name in names {
        let mut g = Vec::new();
        grads.visit(&mut |n, t| {
            if n == name {
                g = t.data().to_vec();
            }
        });
        #[allow(clippy::needless_range_loop)]
        for idx in 0..g.len() {
            let mut pp = params.clone();
            pp.visit_mut(&mut |n, t| {
                if n == name {
                    t.data_mut()[idx] += h;
                }
            });
            let (lp, _) = pp.forward_loss(&batch, 0.1).unwrap();
            let mut pm = params.clone();
            pm.visit_mut(&mut |n, t| {
                if n == name {
                    t.data_mut()[idx] -= h;
                }
            });
            let (lm, _) = pm.forward_loss(&batch, 0.1).unwrap();
            let num = (lp - lm) / (2.0 * h);
            // unreferenced vocabulary rows legitimately have zero gradient
            if num.abs() < 1e-9 && g[idx].abs() < 1e-9 {
                continue;
            }
            assert!(
                rel(g[idx], num) < 1e-3,
                "{name}[{idx}]: analytic {} vs numeric {num}",
                g[idx]
            );
            checked += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed:.1}s, budget 120s");
    pass(
        3,
        "gradient suite",
        &format!("per-op checks plus {checked} full-model parameters in {elapsed:.1}s"),
    );
}

// 4 ------------------------------------------------------ training smoke

#[test]
fn c04_training_smoke() {
    let fx = lexicon_fixture();
    assert!(fx.steps <= 3000, "used {} steps, budget 3000", fx.steps);
    assert!(
        fx.dev_bleu >= 99.0,
        "greedy dev BLEU {:.2} below 99 after {} steps",
        fx.dev_bleu,
        fx.steps
    );
    assert!(
        fx.train_seconds < 300.0,
        "training took {:.0}s, budget 300s",
        fx.train_seconds
    );
    pass(
        4,
        "training smoke",
        &format!(
            "dev BLEU {:.2} after {} steps in {:.0}s",
            fx.dev_bleu, fx.steps, fx.train_seconds
        ),
    );
}

// 5 ------------------------------------------------- Algorithm 1 identity

#[test]
fn c05_head_sample_boundaries() {
    let fx = ambiguous_fixture();
    let sentences = fx.eval_sources(200);
    assert_eq!(sentences.len(), 200, "expected 200 held-out sentences");

    // K = 0: bit-identical to plain beam search
    let beam_policy = DecodePolicy {
        beam_size: 5,
        max_len: 24,
        seed: 7,
        ..DecodePolicy::default()
    };
    let k0_policy = DecodePolicy {
        mode: DecodeMode::HeadSample,
        k: 0,
        beam_size: 5,
        max_len: 24,
        seed: 7,
        ..DecodePolicy::default()
    };
    for (i, src) in sentences.iter().enumerate() {
        let a = beam_search(&fx.params, src, &beam_policy, i as u64, 0).unwrap();
        let b = beam_search(&fx.params, src, &k0_policy, i as u64, 0).unwrap();
        assert_eq!(a.len(), b.len(), "sentence {i}");
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tokens, y.tokens, "sentence {i}");
            assert_eq!(x.raw_score.to_bits(), y.raw_score.to_bits(), "sentence {i}");
            assert_eq!(x.score.to_bits(), y.score.to_bits(), "sentence {i}");
        }
    }

    // K = H: the condition holds at every step (max(n) <= H always), and the
    // recorded per-step rows show the override really was applied
    let kh_policy = DecodePolicy {
        mode: DecodeMode::HeadSample,
        k: 8,
        beam_size: 3,
        m: 1,
        max_len: 24,
        seed: 7,
        ..DecodePolicy::default()
    };
    let mut evaluations = 0u64;
    let mut confusing = 0u64;
    for (i, src) in sentences.iter().take(20).enumerate() {
        let group = diverse_decode_opts(
            &fx.params,
            src,
            &kh_policy,
            i as u64,
            true,
            Some(&mut |h: &hydra::decoding::CandidateHistogram| {
                evaluations += 1;
                if h.max_count() <= 8 {
                    confusing += 1;
                }
            }),
        )
        .unwrap();
        // final layer rows of every step must be exactly equal across heads
        let last_layer = fx.params.dec_layers.len() - 1;
        for out in &group.outputs {
            let mut by_step: std::collections::HashMap<usize, Vec<&Vec<f64>>> =
                std::collections::HashMap::new();
            for att in out.attention.iter().filter(|a| a.layer == last_layer) {
                by_step.entry(att.step).or_default().push(&att.weights);
            }
            assert!(!by_step.is_empty());
            for (step, rows) in by_step {
                assert_eq!(rows.len(), 8);
                for r in &rows[1..] {
                    assert_eq!(*r, rows[0], "step {step}: override must equalize heads");
                }
            }
        }
    }
    assert!(evaluations > 0);
    assert_eq!(evaluations, confusing, "every step must fire at K = H");
    pass(
        5,
        "head-sampling boundary behavior",
        &format!("K=0 identical on 200 sentences; K=H fired on all {evaluations} steps"),
    );
}

// 6 ----------------------------------------------------- count invariant

#[test]
fn c06_vote_count_invariant() {
    let sweep = k_sweep();
    assert!(
        sweep.histogram_events >= 10_000,
        "only {} histograms observed, need 10^4",
        sweep.histogram_events
    );
    assert_eq!(
        sweep.histogram_violations, 0,
        "found histograms whose counts do not sum to the head count"
    );
    pass(
        6,
        "vote-count identity",
        &format!("{} histograms, all summing to H", sweep.histogram_events),
    );
}

// 7 ------------------------------------------------ diversity monotonicity

#[test]
fn c07_diversity_monotonicity() {
    let sweep = k_sweep();
    let fx = ambiguous_fixture();
    let (p0, p4, p8) = (sweep.pwb[&0], sweep.pwb[&4], sweep.pwb[&8]);
    assert!(
        p0 >= p4 && p4 >= p8,
        "pwb not monotone: {p0:.2} {p4:.2} {p8:.2}"
    );
    assert!(
        p0 - p8 >= 10.0,
        "pwb(K=0) - pwb(K=H) = {:.2}, need >= 10",
        p0 - p8
    );
    assert!(
        sweep.valid_fraction_k4 >= 0.70,
        "only {:.1}% of K=H/2 outputs are oracle-valid",
        100.0 * sweep.valid_fraction_k4
    );
    let end_to_end = fx.train_seconds + sweep.sweep_seconds;
    assert!(
        end_to_end < 600.0,
        "end to end {end_to_end:.0}s, budget 600s"
    );

    let golden = format!(
        "pwb_k0 = {p0:.4}\npwb_k4 = {p4:.4}\npwb_k8 = {p8:.4}\nrfb_k0 = {:.4}\nrfb_k4 = {:.4}\nrfb_k8 = {:.4}\nvalid_k4 = {:.4}\ndistinct_k8 = {:.4}\n",
        sweep.rfb[&0], sweep.rfb[&4], sweep.rfb[&8], sweep.valid_fraction_k4, sweep.distinct_fraction_k8
    );
    check_golden("k_curve.txt", &golden);
    assert!(
        sweep.distinct_fraction_k8 >= 0.80,
        "only {:.0}% of sentences got >= 2 distinct outputs at K=H",
        100.0 * sweep.distinct_fraction_k8
    );
    pass(
        7,
        "diversity monotonicity",
        &format!(
            "pwb {p0:.2} >= {p4:.2} >= {p8:.2} (gap {:.2}), {:.1}% valid at K=H/2, {:.0}% distinct at K=H, {end_to_end:.0}s",
            p0 - p8,
            100.0 * sweep.valid_fraction_k4,
            100.0 * sweep.distinct_fraction_k8
        ),
    );
}

// 8 ----------------------------------------------------- beam optimality

#[test]
fn c08_beam_matches_exhaustive_argmax() {
    let fx = tiny_fixture();
    let max_gen = 4usize;
    let policy = DecodePolicy {
        beam_size: 1300,
        max_len: max_gen,
        ..DecodePolicy::default()
    };
    let vocab = fx.params.config.vocab_tgt as u32;
    let non_eos: Vec<u32> = (0..vocab).filter(|&t| t != hydra::data::EOS_ID).collect();
    let mut stream = RngStream::new(808, &[0]);
    for case in 0..100 {
        // random source over the three regular words, length 1..=3
        let len = 1 + stream.uniform_index(3);
        let mut src: Vec<u32> = (0..len)
            .map(|_| 4 + stream.uniform_index(3) as u32)
            .collect();
        src.push(hydra::data::EOS_ID);
        let top = &beam_search(&fx.params, &src, &policy, case, 0).unwrap()[0];

        let mut best: Option<(f64, Vec<u32>)> = None;
        let mut consider = |seq: Vec<u32>| {
            let raw = fx.params.score_prefix(&src, &seq).unwrap();
            let score = raw / (seq.len().max(1) as f64).powf(policy.length_alpha);
            let better = match &best {
                None => true,
                Some((s, t)) => score > *s || (score == *s && seq < *t),
            };
            if better {
                best = Some((score, seq));
            }
        };
        let mut stack: Vec<Vec<u32>> = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() < max_gen {
                let mut with_eos = prefix.clone();
                with_eos.push(hydra::data::EOS_ID);
                consider(with_eos);
                for &t in &non_eos {
                    let mut next = prefix.clone();
                    next.push(t);
                    stack.push(next);
                }
            } else {
                consider(prefix);
            }
        }
        let (want_score, want_tokens) = best.unwrap();
        assert_eq!(
            top.tokens, want_tokens,
            "case {case}: beam {:?} vs exhaustive {want_tokens:?}",
            top.tokens
        );
        assert!((top.score - want_score).abs() < 1e-6);
    }
    pass(
        8,
        "beam optimality oracle",
        "100 sources match the exhaustive argmax",
    );
}

// 9 ------------------------------------------------- head alignment analog

#[test]
fn c09_head_alignment() {
    let fx = lexicon_fixture();
    let sources: Vec<Vec<String>> = fx.dev_pairs.iter().map(|p| p.src.clone()).collect();
    let stats = alignment_stats(&sources, &fx.params, &fx.params, &fx.vocab_src, 24).unwrap();
    let total: u64 = stats.rank_histogram.iter().sum();
    let top5: u64 = stats.rank_histogram[..5].iter().sum();
    let frac = top5 as f64 / total as f64;
    assert!(
        frac >= 0.70,
        "only {:.1}% of referred words in the top 5",
        100.0 * frac
    );
    let rank50 = stats.per_rank_nll[49];
    assert!(
        stats.head_average_nll < rank50,
        "head-average NLL {:.3} not below rank-50 NLL {rank50:.3}",
        stats.head_average_nll
    );
    pass(
        9,
        "head-alignment statistics",
        &format!(
            "{:.1}% in top-5; head-average NLL {:.3} < rank-50 {:.3}",
            100.0 * frac,
            stats.head_average_nll,
            rank50
        ),
    );
}

// 10 ----------------------------------------------------- baseline decoders

#[test]
fn c10_baseline_decoders() {
    let mut stream = RngStream::new(1010, &[0]);
    // sibling rerank matches the closed-form adjustment
    for _ in 0..200 {
        let n = 1 + stream.uniform_index(6);
        let strength = stream.next_f64() * 3.0;
        let mut scores: Vec<f64> = (0..n).map(|_| stream.next_f64() * 8.0 - 4.0).collect();
        scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let got = sibling_penalty_rerank(&[scores.clone()], strength);
        for (r, (&g, &s)) in got[0].iter().zip(&scores).enumerate() {
            assert_eq!(g, s - strength * r as f64);
        }
    }
    // hamming penalty matches direct counting
    for _ in 0..200 {
        let v = 4 + stream.uniform_index(12);
        let logits: Vec<f64> = (0..v).map(|_| stream.next_f64() * 4.0 - 2.0).collect();
        let strength = stream.next_f64() * 2.0;
        let emitted: Vec<u32> = (0..stream.uniform_index(6))
            .map(|_| stream.uniform_index(v) as u32)
            .collect();
        let got = hamming_penalty(&logits, &emitted, strength);
        for (tok, (&g, &l)) in got.iter().zip(&logits).enumerate() {
            let count = emitted.iter().filter(|&&e| e as usize == tok).count() as f64;
            assert_eq!(g, l - strength * count);
        }
    }
    // noise perturbation event frequencies within three standard errors
    let n = 10_000;
    let sentence: Vec<String> = (0..6).map(|i| format!("tok{i}")).collect();
    for &p in &[0.2f64, 0.5] {
        let mut rng = RngStream::new(1011, &[p.to_bits()]);
        let mut unk_events = 0u32;
        let mut swap_events = 0u32;
        for _ in 0..n {
            let out = noise_perturb(&sentence, p, &mut rng);
            assert_eq!(out.len(), sentence.len());
            if out.iter().any(|w| w == "<unk>") {
                unk_events += 1;
            }
            // a swap changes word positions; count by mismatch among non-unk words
            let moved = out
                .iter()
                .zip(&sentence)
                .filter(|(a, b)| a != b && a.as_str() != "<unk>")
                .count();
            if moved > 0 {
                swap_events += 1;
            }
        }
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let unk_freq = unk_events as f64 / n as f64;
        assert!(
            (unk_freq - p).abs() <= 3.0 * sigma,
            "unk frequency {unk_freq} vs p={p}"
        );
        // swaps can be invisible (swап of identical words impossible here,
        // but a swap can move the unk token); allow the same tolerance plus
        // the p^2/6 overlap correction bound
        let swap_freq = swap_events as f64 / n as f64;
        assert!(
            (swap_freq - p).abs() <= 3.0 * sigma + p * p / 3.0,
            "swap frequency {swap_freq} vs p={p}"
        );
    }
    pass(
        10,
        "baseline decoder oracles",
        "sibling/hamming exact; noise within 3 sigma",
    );
}

// 11 --------------------------------------------------- back-translation

#[test]
fn c11_back_translation_pipeline() {
    let bt = backtrans_fixture();
    let verdict = if bt.aug_head_bleu > bt.aug_beam_bleu {
        "head-sampled augmentation beats Beam-5"
    } else {
        "Beam-5 augmentation was not beaten here"
    };
    // informational comparison, recorded but not gating
    println!(
        "  back-translation report: baseline {:.2}, head-sampled {:.2}, Beam-5 {:.2} ({verdict}); single-reference: baseline {:.2}, head-sampled {:.2}; synthetic pwb head {:.2} vs beam {:.2}; synthetic validity head {:.1}% vs beam {:.1}%",
        bt.baseline_bleu,
        bt.aug_head_bleu,
        bt.aug_beam_bleu,
        bt.baseline_single_ref,
        bt.aug_head_single_ref,
        bt.synth_head_pwb,
        bt.synth_beam_pwb,
        100.0 * bt.synth_head_valid,
        100.0 * bt.synth_beam_valid,
    );
    assert_eq!(
        bt.mixture_pairs,
        (1 + 5) * bt.n_targets,
        "mixture must hold exactly (1+M)*N pairs"
    );
    assert!(
        bt.aug_head_bleu >= bt.baseline_bleu - 2.0,
        "augmented test BLEU {:.2} fell more than 2.0 below baseline {:.2}",
        bt.aug_head_bleu,
        bt.baseline_bleu
    );
    pass(
        11,
        "back-translation pipeline",
        &format!(
            "{} pairs; test BLEU {:.2} vs baseline {:.2}; {verdict}",
            bt.mixture_pairs, bt.aug_head_bleu, bt.baseline_bleu
        ),
    );
}

// 12 -------------------------------------------------------- determinism

#[test]
fn c12_cli_determinism() {
    let out = cli_determinism_runs();
    for (name, a, b) in &out.compared {
        assert_eq!(a, b, "rerun of {name} produced different bytes");
    }
    pass(
        12,
        "command determinism",
        &format!(
            "{} artifact files byte-identical across reruns and worker counts",
            out.compared.len()
        ),
    );
}

// ------------------------------------------------- shared golden helper

fn check_golden(name: &str, observed: &str) {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let path = dir.join(name);
    if std::env::var("HYDRA_WRITE_GOLDEN").is_ok() {
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(&path, observed).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {name}; run with HYDRA_WRITE_GOLDEN=1"));
    assert_eq!(observed, want, "observed values drifted from {name}");
}

// extra guard: the diversity-floor property of the generator, checked here
// because it ties datagen to the metrics stack

#[test]
fn uniform_sampling_is_a_diversity_floor() {
    let fx = ambiguous_fixture();
    let spec = &fx.task;
    // one marker sentence with two ambiguous words
    let amb: Vec<usize> = (0..spec.src_vocab_size)
        .filter(|&i| spec.is_ambiguous(i))
        .collect();
    let src = vec![
        spec.source_word(amb[0]),
        hydra::data::MARKER_WORD.to_string(),
        spec.source_word(amb[1]),
    ];
    let all = match valid_translations(&src, spec, 512).unwrap() {
        TranslationSet::Enumerated(v) => v,
        _ => panic!("expected enumerable sentence"),
    };
    let mut stream = RngStream::new(777, &[0]);
    let trials = 200;
    let mean_pwb = |weights: &dyn Fn(usize) -> f64, stream: &mut RngStream| -> f64 {
        let total: f64 = (0..all.len()).map(weights).sum();
        let mut acc = 0.0;
        for _ in 0..trials {
            let picks: Vec<Vec<String>> = (0..5)
                .map(|_| {
                    let mut u = stream.next_f64() * total;
                    let mut chosen = all.len() - 1;
                    for (i, t) in all.iter().enumerate() {
                        u -= weights(i);
                        if u < 0.0 {
                            chosen = i;
                            break;
                        }
                        let _ = t;
                    }
                    all[chosen].clone()
                })
                .collect();
            acc += pairwise_bleu(&[picks]).unwrap();
        }
        acc / trials as f64
    };
    let uniform = mean_pwb(&|_| 1.0, &mut stream);
    // several biased samplers; all must be at least as self-similar
    for bias in 1..5u32 {
        let biased = mean_pwb(
            &|i| if i % 3 == 0 { 1.0 + bias as f64 } else { 1.0 },
            &mut stream,
        );
        assert!(
            biased >= uniform - 2.0,
            "biased sampler ({bias}) scored {biased:.2}, below the uniform floor {uniform:.2}"
        );
    }
    // sanity: decoded outputs can never beat the floor by construction;
    // check one decoded group against it
    let src_ids = fx.vocab_src.encode_source(&src);
    let policy = DecodePolicy {
        mode: DecodeMode::HeadSample,
        k: 8,
        beam_size: 5,
        m: 5,
        max_len: 16,
        seed: 3,
        ..DecodePolicy::default()
    };
    let group = hydra::decoding::diverse_decode(&fx.params, &src_ids, &policy, 0).unwrap();
    let words: Vec<Vec<String>> = group.output_words(&fx.vocab_tgt);
    let decoded_pwb = pairwise_bleu(&[words]).unwrap();
    assert!(decoded_pwb >= uniform - 3.0 * 6.0 / (trials as f64).sqrt() - 5.0);
}

#[test]
fn diversity_grows_with_sentence_length() {
    let fx = length_curve_fixture();
    assert!(fx.buckets.len() >= 3, "need at least 3 supported buckets");
    assert!(
        fx.spearman < 0.0,
        "Spearman(length, pwb) = {:.3}, expected negative; buckets {:?}",
        fx.spearman,
        fx.buckets
    );
    let golden: String = fx
        .buckets
        .iter()
        .map(|(l, p)| format!("len {l} pwb {p:.4}\n"))
        .chain(std::iter::once(format!("spearman {:.4}\n", fx.spearman)))
        .collect();
    check_golden("length_curve.txt", &golden);
}

// remaining derived behaviors on the shared trained fixtures

#[test]
fn sharp_model_multinomial_mostly_reproduces_greedy() {
    let fx = tiny_fixture();
    let src = vec![4, 5, 2];
    let greedy = hydra::decoding::greedy_decode(&fx.params, &src, 6).unwrap();
    let mut full = greedy.clone();
    full.push(hydra::data::EOS_ID);
    let p_greedy = fx.params.score_prefix(&src, &full).unwrap().exp();
    let samples = 400usize;
    let group = hydra::decoding::multinomial_decode(&fx.params, &src, samples, 5150, 0, 6).unwrap();
    let hits = group.outputs.iter().filter(|o| o.tokens == greedy).count() as f64 / samples as f64;
    let se = (p_greedy * (1.0 - p_greedy) / samples as f64).sqrt();
    assert!(
        hits >= p_greedy - 3.0 * se,
        "greedy reproduced {hits:.3} of the time, expected at least {p_greedy:.3} - 3se"
    );
}

#[test]
fn referred_words_recover_the_lexicon() {
    // on the converged substitution task, translating each source word in
    // isolation must give its lexicon entry for nearly the whole vocabulary
    let fx = lexicon_fixture();
    let task = hydra::data::ToyTaskSpec {
        src_vocab_size: 60,
        corpus_size: 2000,
        len_range: (3, 8),
        seed: 1,
        ..hydra::data::ToyTaskSpec::default()
    };
    let mut hits = 0usize;
    let mut total = 0usize;
    for i in 0..task.src_vocab_size {
        let word = task.source_word(i);
        if !fx.vocab_src.contains(&word) {
            continue;
        }
        let expected = &task.translations_of(i)[0];
        let got =
            hydra::analysis::referred_target_words(&fx.params, &fx.vocab_src, &[word]).unwrap()[0];
        total += 1;
        if fx.vocab_tgt.word(got) == expected {
            hits += 1;
        }
    }
    assert!(total >= 50);
    let frac = hits as f64 / total as f64;
    assert!(
        frac >= 0.95,
        "only {:.1}% of isolated words translate to their lexicon entry",
        100.0 * frac
    );
}

#[test]
fn greedy_reproduces_a_copy_task() {
    // identical source and target sides: after training, greedy stepping
    // must reproduce the input sequence
    let task = hydra::data::ToyTaskSpec {
        src_vocab_size: 6,
        corpus_size: 60,
        len_range: (1, 4),
        seed: 12,
        ..hydra::data::ToyTaskSpec::default()
    };
    let corpus = hydra::data::gen_corpus(&task).unwrap();
    let copy_pairs: Vec<hydra::data::CorpusPair> = corpus
        .pairs
        .iter()
        .map(|p| hydra::data::CorpusPair {
            tgt: p.src.clone(),
            ..p.clone()
        })
        .collect();
    let (vs, vt) = hydra::data::build_vocab(&copy_pairs).unwrap();
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
    let train_pairs: Vec<hydra::data::CorpusPair> = copy_pairs
        .iter()
        .filter(|p| p.split == hydra::data::Split::Train)
        .cloned()
        .collect();
    let encoded = hydra::data::prepare_pairs(&train_pairs, &vs, &vt);
    let mut params: hydra::model::ModelParams<f32> = ModelParams::init(cfg, 12).unwrap();
    hydra::train::train(
        &mut params,
        &encoded,
        &hydra::train::TrainConfig {
            batch_size: 8,
            max_steps: 500,
            log_every: 100,
            seed: 12,
            optimizer: hydra::numerics::OptimizerConfig {
                warmup_steps: 100,
                d_model: 16,
                ..Default::default()
            },
        },
    )
    .unwrap();
    let mut exact = 0usize;
    let all: Vec<&hydra::data::CorpusPair> = copy_pairs.iter().collect();
    for p in &all {
        let out = hydra::decoding::greedy_decode(&params, &vs.encode_source(&p.src), 6).unwrap();
        if vt.decode(&out) == p.src {
            exact += 1;
        }
    }
    let frac = exact as f64 / all.len() as f64;
    assert!(
        frac >= 0.95,
        "copy task only reproduced {:.1}% of sequences",
        100.0 * frac
    );
}

#[test]
fn valid_translation_membership_spot_check() {
    // ties the oracle used by criterion 7 back to exhaustive enumeration
    let fx = ambiguous_fixture();
    let spec = &fx.task;
    let mut stream = RngStream::new(778, &[0]);
    for pair in fx.test_pairs.iter().take(20) {
        if let TranslationSet::Enumerated(all) = valid_translations(&pair.src, spec, 256).unwrap() {
            assert!(all.contains(&pair.tgt));
            for t in all.iter().take(10) {
                assert!(is_valid_translation(&pair.src, t, spec));
            }
            let mut corrupted = all[stream.uniform_index(all.len())].clone();
            let k = stream.uniform_index(corrupted.len());
            corrupted[k] = "bogus".into();
            assert!(!is_valid_translation(&pair.src, &corrupted, spec));
        }
    }
}
