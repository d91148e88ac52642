//! Deterministic numeric primitives: softmax, layer norm, the label-smoothed
//! loss, and the optimizer. Every gradient here is hand-derived and verified
//! against central finite differences at f64 (see the tests and the
//! `gradcheck` test-support module).

pub mod optim;
pub mod tensor;

pub use optim::{adam_step, lr_at, AdamState, OptimizerConfig};
pub use tensor::{Scalar, Tensor};

use crate::error::{Error, Result};

/// Numerically stable softmax over a non-empty vector.
pub fn softmax<F: Scalar>(v: &[F]) -> Result<Vec<F>> {
    if v.is_empty() {
        return Err(Error::invalid_argument("softmax of empty vector"));
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place softmax with max subtraction. Callers guarantee non-empty input;
/// rows that are entirely masked to -inf are the caller's bug.
pub fn softmax_in_place<F: Scalar>(v: &mut [F]) {
    let mut max = F::neg_infinity();
    for &x in v.iter() {
        max = max.maximum(x);
    }
    let mut sum = F::ZERO;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = F::ONE / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
}

/// log-softmax, same stability trick. Used for beam scoring.
pub fn log_softmax<F: Scalar>(v: &[F]) -> Vec<F> {
    let mut max = F::neg_infinity();
    for &x in v.iter() {
        max = max.maximum(x);
    }
    let mut sum = F::ZERO;
    for &x in v.iter() {
        sum += (x - max).exp();
    }
    let log_z = max + sum.ln();
    v.iter().map(|&x| x - log_z).collect()
}

/// Gradient of softmax given the forward output `y` and upstream `dy`:
/// dx_i = y_i * (dy_i - sum_j dy_j y_j).
pub fn softmax_backward<F: Scalar>(y: &[F], dy: &[F], dx: &mut [F]) {
    let mut s = F::ZERO;
    for (&yv, &dv) in y.iter().zip(dy) {
        s += yv * dv;
    }
    for ((d, &yv), &dv) in dx.iter_mut().zip(y).zip(dy) {
        *d = yv * (dv - s);
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Layer normalization: (v - mean) / sqrt(var + eps) * gain + bias.
/// Population variance, epsilon fixed at 1e-6.
pub fn layer_norm<F: Scalar>(v: &[F], gain: &[F], bias: &[F]) -> Result<Vec<F>> {
    if v.len() != gain.len() || v.len() != bias.len() {
        return Err(Error::invalid_argument(format!(
            "layer_norm length mismatch: v={}, gain={}, bias={}",
            v.len(),
            gain.len(),
            bias.len()
        )));
    }
    if v.len() < 2 {
        return Err(Error::invalid_argument(
            "layer_norm needs at least 2 elements",
        ));
    }
    let mut out = vec![F::ZERO; v.len()];
    layer_norm_forward(v, gain, bias, &mut out, &mut LnCache::default());
    Ok(out)
}

/// Per-vector intermediates kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct LnCache<F: Scalar = f32> {
    pub inv_std: F,
    /// normalized pre-affine values
    pub xhat: Vec<F>,
}

pub fn layer_norm_forward<F: Scalar>(
    v: &[F],
    gain: &[F],
    bias: &[F],
    out: &mut [F],
    cache: &mut LnCache<F>,
) {
    let n = F::from_f64(v.len() as f64);
    let mut mean = F::ZERO;
    for &x in v {
        mean += x;
    }
    mean = mean / n;
    let mut var = F::ZERO;
    for &x in v {
        let d = x - mean;
        var += d * d;
    }
    var = var / n;
    let inv_std = F::ONE / (var + F::from_f64(LAYER_NORM_EPS)).sqrt();
    cache.inv_std = inv_std;
    cache.xhat.clear();
    cache.xhat.reserve(v.len());
    for ((o, &x), (&g, &b)) in out.iter_mut().zip(v).zip(gain.iter().zip(bias)) {
        let xh = (x - mean) * inv_std;
        cache.xhat.push(xh);
        *o = xh * g + b;
    }
}

/// Backward for layer_norm_forward. Accumulates into dgain/dbias, writes dx.
pub fn layer_norm_backward<F: Scalar>(
    dy: &[F],
    gain: &[F],
    cache: &LnCache<F>,
    dx: &mut [F],
    dgain: &mut [F],
    dbias: &mut [F],
) {
    let n = F::from_f64(dy.len() as f64);
    let mut sum_g = F::ZERO; // mean of gain .* dy
    let mut sum_gx = F::ZERO; // mean of gain .* dy .* xhat
    for ((&d, &g), &xh) in dy.iter().zip(gain).zip(&cache.xhat) {
        let gd = g * d;
        sum_g += gd;
        sum_gx += gd * xh;
    }
    let mean_g = sum_g / n;
    let mean_gx = sum_gx / n;
    for (i, ((&d, &g), &xh)) in dy.iter().zip(gain).zip(&cache.xhat).enumerate() {
        dx[i] = (g * d - mean_g - xh * mean_gx) * cache.inv_std;
        dgain[i] += d * xh;
        dbias[i] += d;
    }
}

/// Label-smoothed cross entropy over raw logits.
///
/// The target distribution assigns 1 - smoothing to the target index and
/// smoothing / (V - 1) to every other entry. Returns the loss and the
/// gradient with respect to the logits (softmax(logits) - target dist).
pub fn label_smoothed_loss<F: Scalar>(
    logits: &[F],
    target: usize,
    smoothing: f64,
) -> Result<(F, Vec<F>)> {
    let v = logits.len();
    if target >= v {
        return Err(Error::invalid_argument(format!(
            "target {target} out of range for vocab {v}"
        )));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::invalid_argument(format!(
            "smoothing {smoothing} not in [0,1)"
        )));
    }
    let log_p = log_softmax(logits);
    let off = if v > 1 {
        F::from_f64(smoothing / (v - 1) as f64)
    } else {
        F::ZERO
    };
    let on = F::from_f64(1.0 - smoothing);
    let mut loss = F::ZERO;
    let mut grad = vec![F::ZERO; v];
    for (i, (&lp, g)) in log_p.iter().zip(grad.iter_mut()).enumerate() {
        let q = if i == target { on } else { off };
        loss -= q * lp;
        *g = lp.exp() - q;
    }
    Ok((loss, grad))
}
