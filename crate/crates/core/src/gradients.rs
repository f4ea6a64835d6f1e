//! Reverse-mode gradients of one circulant attention head, and a central
//! finite-difference oracle to check them.
//!
//! For `L = <U, O>` the backward pass runs through the forward steps in
//! reverse. With `s = softmax(a)` and `G` the gradient reaching `s ⊛ V'`:
//!
//! ```text
//! dV'  = s (conv) G                 adjoint of x -> s ⊛ x
//! ds   = sum_c (G ⊛ V')[:, c]       adjoint of s -> s ⊛ V'
//! da   = s * (ds - <s, ds>)         softmax Jacobian diag(s) - s s^T
//! dQ   = (da ⊛ K) / (N sqrt(d))
//! dK   = (da (conv) Q) / (N sqrt(d))
//! ```

use crate::attention::{circulant_scores, softmax_first_row, ReweightMode};
use crate::error::{Error, Result};
use crate::spectral::{circconv2d_broadcast, circorr2d_broadcast, circorr2d_channel_sum};
use crate::structured::DenseMatrix;
use crate::tensor::SequenceTensor;

/// Central-difference step used by the gradient checks.
pub const FD_EPSILON: f64 = 1e-5;

/// Gradients of `<upstream, output>` with respect to each head input.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub dq: SequenceTensor,
    pub dk: SequenceTensor,
    pub dv: SequenceTensor,
    /// Present iff the mode uses a reweighting factor.
    pub dt: Option<SequenceTensor>,
}

/// Applies the softmax Jacobian `diag(s) - s s^T` to `grad`.
pub fn softmax_backward(sigma: &[f64], grad: &[f64]) -> Vec<f64> {
    let inner: f64 = sigma.iter().zip(grad).map(|(s, g)| s * g).sum();
    sigma.iter().zip(grad).map(|(s, g)| s * (g - inner)).collect()
}

/// The softmax Jacobian as a dense matrix.
pub fn softmax_jacobian(sigma: &[f64]) -> DenseMatrix {
    let n = sigma.len();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { sigma[i] } else { 0.0 };
            m.set(i, j, diag - sigma[i] * sigma[j]);
        }
    }
    m
}

/// Adjoint of `x -> kernel ⊛ x`.
pub fn correlation_adjoint(kernel: &[f64], y: &SequenceTensor) -> Result<SequenceTensor> {
    circconv2d_broadcast(kernel, y)
}

fn scale_in_place(t: &mut SequenceTensor, factor: f64) {
    for v in t.data_mut() {
        *v *= factor;
    }
}

/// Exact gradients of `<upstream, circulant_attention(q, k, v, mode, t)>`.
pub fn circulant_attention_backward(
    q: &SequenceTensor,
    k: &SequenceTensor,
    v: &SequenceTensor,
    t: Option<&SequenceTensor>,
    mode: ReweightMode,
    upstream: &SequenceTensor,
) -> Result<HeadGradients> {
    q.ensure_same_layout(k, "queries vs keys")?;
    q.ensure_same_layout(v, "queries vs values")?;
    v.ensure_same_layout(upstream, "upstream gradient vs values")?;
    let t = match (mode, t) {
        (ReweightMode::None, _) => None,
        (_, None) => return Err(Error::MissingReweight(mode.as_str())),
        (_, Some(t)) => {
            v.ensure_same_layout(t, "reweighting factor vs values")?;
            Some(t)
        }
    };

    let sigma = softmax_first_row(&circulant_scores(q, k)?).b;
    let values = match (mode, t) {
        (ReweightMode::Pre, Some(t)) => v.hadamard(t)?,
        _ => v.clone(),
    };

    let (g_inner, dt_post) = match (mode, t) {
        (ReweightMode::Post, Some(t)) => {
            let inner = circorr2d_broadcast(&sigma, &values)?;
            (upstream.hadamard(t)?, Some(upstream.hadamard(&inner)?))
        }
        _ => (upstream.clone(), None),
    };

    let d_values = correlation_adjoint(&sigma, &g_inner)?;
    let d_sigma = circorr2d_channel_sum(&g_inner, &values)?;
    let d_scores = softmax_backward(&sigma, &d_sigma);

    let scale = 1.0 / (q.n() as f64 * (q.channels() as f64).sqrt());
    let mut dq = circorr2d_broadcast(&d_scores, k)?;
    scale_in_place(&mut dq, scale);
    let mut dk = circconv2d_broadcast(&d_scores, q)?;
    scale_in_place(&mut dk, scale);

    let (dv, dt) = match (mode, t) {
        (ReweightMode::Pre, Some(t)) => (d_values.hadamard(t)?, Some(d_values.hadamard(v)?)),
        (ReweightMode::Post, Some(_)) => (d_values, dt_post),
        _ => (d_values, None),
    };
    Ok(HeadGradients { dq, dk, dv, dt })
}

/// Central differences `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` for every coordinate.
pub fn finite_difference_gradient<F>(f: F, x: &SequenceTensor, eps: f64) -> SequenceTensor
where
    F: Fn(&SequenceTensor) -> f64,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    let mut grad = SequenceTensor::zeros(x.shape(), x.channels());
    for i in 0..x.data().len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// `max |analytic - numeric| / max(||analytic||_inf, 1e-8)`.
pub fn relative_gradient_error(analytic: &SequenceTensor, numeric: &SequenceTensor) -> f64 {
    let err = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    err / analytic.max_abs().max(1e-8)
}
