//! Label-smoothed cross-entropy over per-position log-probabilities.

use ndarray::Array2;

use crate::error::{CoreError, Result};

/// Per-position loss `(1-eps) * nll(target) + eps * mean nll over vocab`,
/// averaged over non-pad positions.
pub fn loss_label_smoothed(
    log_probs: &Array2<f64>,
    targets: &[u32],
    smoothing: f64,
    pad_id: u32,
) -> Result<f64> {
    let (sum, count) = loss_sum(log_probs, targets, smoothing, pad_id)?;
    if count == 0 {
        return Err(CoreError::InvalidArgument(
            "all target positions are padding".to_string(),
        ));
    }
    Ok(sum / count as f64)
}

/// Summed (not averaged) smoothed loss and the non-pad position count,
/// so a batch can be averaged over its total token count.
pub fn loss_sum(
    log_probs: &Array2<f64>,
    targets: &[u32],
    smoothing: f64,
    pad_id: u32,
) -> Result<(f64, usize)> {
    if log_probs.nrows() != targets.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "{} log-prob rows vs {} targets",
            log_probs.nrows(),
            targets.len()
        )));
    }
    let vocab = log_probs.ncols();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (row, &t) in log_probs.outer_iter().zip(targets) {
        if t == pad_id {
            continue;
        }
        if t as usize >= vocab {
            return Err(CoreError::TokenOutOfRange {
                id: t,
                vocab,
            });
        }
        let nll = -row[t as usize];
        let smooth = -row.sum() / vocab as f64;
        sum += (1.0 - smoothing) * nll + smoothing * smooth;
        count += 1;
    }
    Ok((sum, count))
}

/// Gradient of the summed smoothed loss w.r.t. the logits:
/// `p - ((1-eps) * onehot(target) + eps/V)` per non-pad row, zero for pads.
/// Scale by `1/total_tokens` externally to match a token-averaged batch loss.
pub fn loss_grad_logits(
    log_probs: &Array2<f64>,
    targets: &[u32],
    smoothing: f64,
    pad_id: u32,
) -> Result<Array2<f64>> {
    if log_probs.nrows() != targets.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "{} log-prob rows vs {} targets",
            log_probs.nrows(),
            targets.len()
        )));
    }
    let vocab = log_probs.ncols();
    let mut grad = Array2::zeros(log_probs.raw_dim());
    for (i, &t) in targets.iter().enumerate() {
        if t == pad_id {
            continue;
        }
        let uniform = smoothing / vocab as f64;
        for v in 0..vocab {
            let p = log_probs[[i, v]].exp();
            let y = uniform + if v == t as usize { 1.0 - smoothing } else { 0.0 };
            grad[[i, v]] = p - y;
        }
    }
    Ok(grad)
}
