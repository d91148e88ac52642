//! Independent reference implementations used only by the acceptance tests.
//! They share no code with the library paths they check.

use hydra::model::attention::{attn_backward, attn_forward, AttentionParams};
use hydra::numerics::tensor::dot;
use hydra::numerics::Tensor;
use hydra::rng::RngStream;

/// Corpus BLEU recomputed from the definition with linear scans and no hash
/// maps: clipped n-gram counts, geometric mean of four precisions, closest
/// reference length (ties toward the shorter) for the brevity penalty.
pub fn brute_force_bleu(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> f64 {
    fn occurrences(hay: &[String], needle: &[String]) -> u64 {
        if needle.is_empty() || hay.len() < needle.len() {
            return 0;
        }
        hay.windows(needle.len()).filter(|w| *w == needle).count() as u64
    }
    let mut matched = [0u64; 4];
    let mut total = [0u64; 4];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (h, rs) in hyps.iter().zip(refs) {
        hyp_len += h.len() as u64;
        let mut closest = usize::MAX;
        for r in rs {
            if closest == usize::MAX {
                closest = r.len();
                continue;
            }
            let best = (closest as i64 - h.len() as i64).abs();
            let this = (r.len() as i64 - h.len() as i64).abs();
            if this < best || (this == best && r.len() < closest) {
                closest = r.len();
            }
        }
        ref_len += closest as u64;
        for n in 1..=4usize {
            if h.len() < n {
                continue;
            }
            total[n - 1] += (h.len() - n + 1) as u64;
            let mut seen: Vec<&[String]> = Vec::new();
            for w in h.windows(n) {
                if seen.contains(&w) {
                    continue;
                }
                seen.push(w);
                let in_hyp = occurrences(h, w);
                let best_ref = rs.iter().map(|r| occurrences(r, w)).max().unwrap_or(0);
                matched[n - 1] += in_hyp.min(best_ref);
            }
        }
    }
    if hyp_len == 0 || matched.contains(&0) {
        return 0.0;
    }
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let mean_log: f64 = (0..4)
        .map(|n| (matched[n] as f64 / total[n] as f64).ln())
        .sum::<f64>()
        / 4.0;
    bp * mean_log.exp() * 100.0
}

pub fn random_tiny_corpus(stream: &mut RngStream) -> (Vec<Vec<String>>, Vec<Vec<Vec<String>>>) {
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let n = 1 + stream.uniform_index(5);
    let sentence = |s: &mut RngStream| -> Vec<String> {
        let l = 1 + s.uniform_index(8);
        (0..l)
            .map(|_| vocab[s.uniform_index(vocab.len())].to_string())
            .collect()
    };
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..n {
        hyps.push(sentence(stream));
        let nr = 1 + stream.uniform_index(3);
        refs.push((0..nr).map(|_| sentence(stream)).collect());
    }
    (hyps, refs)
}

/// Central finite differences through the full attention block, 20 random
/// instances at f64, relative error below 1e-4 on sampled entries.
pub fn attention_gradient_check(stream: &mut RngStream) {
    let d = 8;
    let heads = 2;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    for case in 0..20 {
        let causal = case % 2 == 0;
        let rand_t = |s: &mut RngStream, r: usize| -> Tensor<f64> {
            Tensor::from_vec(
                &[r, d],
                (0..r * d).map(|_| s.next_f64() * 2.0 - 1.0).collect(),
            )
            .unwrap()
        };
        let p = AttentionParams {
            wq: rand_t(stream, d),
            wk: rand_t(stream, d),
            wv: rand_t(stream, d),
            wo: rand_t(stream, d),
        };
        let x_q = rand_t(stream, 3);
        let x_kv = if causal {
            x_q.clone()
        } else {
            rand_t(stream, 4)
        };
        let dy = rand_t(stream, 3);
        let objective = |p: &AttentionParams<f64>, xq: &Tensor<f64>, xkv: &Tensor<f64>| {
            let (out, _) = attn_forward(p, heads, xq, xkv, causal);
            dot(out.data(), dy.data())
        };
        let (_, cache) = attn_forward(&p, heads, &x_q, &x_kv, causal);
        let mut grads = AttentionParams {
            wq: Tensor::zeros(&[d, d]),
            wk: Tensor::zeros(&[d, d]),
            wv: Tensor::zeros(&[d, d]),
            wo: Tensor::zeros(&[d, d]),
        };
        let mut dxq = Tensor::zeros(&[3, d]);
        let mut dxkv = Tensor::zeros(&[x_kv.rows(), d]);
        attn_backward(&p, heads, &cache, &dy, &mut grads, &mut dxq, &mut dxkv);
        let h = 1e-6;
        for idx in [0usize, 21, 45, 63] {
            for which in 0..4 {
                fn pick(p: &mut AttentionParams<f64>, which: usize) -> &mut Tensor<f64> {
                    match which {
                        0 => &mut p.wq,
                        1 => &mut p.wk,
                        2 => &mut p.wv,
                        _ => &mut p.wo,
                    }
                }
                let analytic = match which {
                    0 => grads.wq.data()[idx],
                    1 => grads.wk.data()[idx],
                    2 => grads.wv.data()[idx],
                    _ => grads.wo.data()[idx],
                };
                let mut pp = p.clone();
                pick(&mut pp, which).data_mut()[idx] += h;
                let mut pm = p.clone();
                pick(&mut pm, which).data_mut()[idx] -= h;
                let num = (objective(&pp, &x_q, &x_kv) - objective(&pm, &x_q, &x_kv)) / (2.0 * h);
                assert!(
                    rel(analytic, num) < 1e-4,
                    "attention case {case}, matrix {which}, entry {idx}"
                );
            }
        }
    }
}
