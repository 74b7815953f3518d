//! Activation and softmax primitives shared by the layers.

use ndarray::{Array1, Array2, Axis};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximated GELU; smooth, so finite-difference gradient checks
/// behave everywhere.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x.powi(3))).tanh())
}

/// d gelu(x) / dx for the tanh approximation.
pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x.powi(3));
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Row-wise softmax, numerically stabilized.
pub fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Row-wise log-softmax, numerically stabilized.
pub fn log_softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.mapv_inplace(|v| v - max - (lse - max));
    }
    out
}

/// Backward through row-wise softmax: given probabilities `p` and upstream
/// `dp`, returns `ds = p * (dp - sum(dp * p))` per row.
pub fn softmax_backward_rows(p: &Array2<f64>, dp: &Array2<f64>) -> Array2<f64> {
    let inner: Array1<f64> = (dp * p).sum_axis(Axis(1));
    let mut ds = dp.clone();
    for (mut row, &s) in ds.axis_iter_mut(Axis(0)).zip(inner.iter()) {
        row.mapv_inplace(|v| v - s);
    }
    ds * p
}
