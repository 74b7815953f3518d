//! Diagonal empirical Fisher estimation and the EWC quadratic penalty.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::model::{decoder_targets, loss_grad_logits, loss_sum, EncodedExample, Seq2SeqModel};
use crate::vocab::{EOS_ID, PAD_ID};

/// Fisher diagonal, anchor parameters, and penalty strength.
#[derive(Debug, Clone)]
pub struct EwcState {
    pub fisher: BTreeMap<String, Array2<f64>>,
    pub anchor: BTreeMap<String, Array2<f64>>,
    pub strength: f64,
}

/// Estimates the diagonal empirical Fisher as the mean over samples of the
/// squared per-sample loss gradient, and anchors at the current parameters.
/// Uses the first `n_samples` examples of `dataset` (all of it if shorter).
pub fn estimate_fisher(
    model: &mut Seq2SeqModel,
    dataset: &[EncodedExample],
    n_samples: usize,
    strength: f64,
) -> Result<EwcState> {
    if dataset.is_empty() {
        return Err(CoreError::EmptyDataset(
            "fisher estimation needs data".to_string(),
        ));
    }
    let n = n_samples.min(dataset.len()).max(1);
    let smoothing = model.cfg.label_smoothing;

    let mut fisher: BTreeMap<String, Array2<f64>> = BTreeMap::new();
    model.visit_params(&mut |name, p| {
        fisher.insert(name, Array2::zeros(p.value.raw_dim()));
    });

    for example in &dataset[..n] {
        model.zero_grads();
        let (log_probs, cache) = model.forward_example(example, 0.0, None)?;
        let targets = decoder_targets(example, EOS_ID);
        let (_, tokens) = loss_sum(&log_probs, &targets, smoothing, PAD_ID)?;
        let mut d_logits = loss_grad_logits(&log_probs, &targets, smoothing, PAD_ID)?;
        d_logits.mapv_inplace(|v| v / tokens as f64);
        model.backward_example(&d_logits, cache);
        model.visit_params(&mut |name, p| {
            let acc = fisher.get_mut(&name).expect("initialized above");
            acc.zip_mut_with(&p.grad, |f, &g| *f += g * g);
        });
    }
    for acc in fisher.values_mut() {
        acc.mapv_inplace(|v| v / n as f64);
    }
    model.zero_grads();

    Ok(EwcState {
        fisher,
        anchor: model.snapshot(),
        strength,
    })
}

/// `(strength / 2) * sum_i F_i * (theta_i - anchor_i)^2` over named tensors.
pub fn ewc_penalty(params: &BTreeMap<String, Array2<f64>>, state: &EwcState) -> Result<f64> {
    let mut total = 0.0;
    for (name, theta) in params {
        let (fisher, anchor) = match (state.fisher.get(name), state.anchor.get(name)) {
            (Some(f), Some(a)) => (f, a),
            _ => continue,
        };
        if fisher.raw_dim() != theta.raw_dim() || anchor.raw_dim() != theta.raw_dim() {
            return Err(CoreError::ShapeMismatch(name.clone()));
        }
        for ((&f, &t), &a) in fisher.iter().zip(theta.iter()).zip(anchor.iter()) {
            let d = t - a;
            total += f * d * d;
        }
    }
    Ok(0.5 * state.strength * total)
}

/// Penalty evaluated on a model's current parameters.
pub fn ewc_penalty_model(model: &Seq2SeqModel, state: &EwcState) -> Result<f64> {
    ewc_penalty(&model.snapshot(), state)
}

/// Adds the penalty gradient `strength * F_i * (theta_i - anchor_i)` into
/// the model's gradient accumulators and returns the penalty value.
pub fn ewc_grad_into(model: &mut Seq2SeqModel, state: &EwcState) -> Result<f64> {
    let mut total = 0.0;
    let mut err = None;
    model.visit_params_mut(&mut |name, p| {
        if err.is_some() {
            return;
        }
        let (fisher, anchor) = match (state.fisher.get(&name), state.anchor.get(&name)) {
            (Some(f), Some(a)) => (f, a),
            _ => return,
        };
        if fisher.raw_dim() != p.value.raw_dim() {
            err = Some(CoreError::ShapeMismatch(name));
            return;
        }
        for ((g, (&f, &t)), &a) in p
            .grad
            .iter_mut()
            .zip(fisher.iter().zip(p.value.iter()))
            .zip(anchor.iter())
        {
            let d = t - a;
            total += f * d * d;
            *g += state.strength * f * d;
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(0.5 * state.strength * total),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn map(entries: Vec<(&str, Array2<f64>)>) -> BTreeMap<String, Array2<f64>> {
        entries
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[test]
    fn penalty_is_zero_at_the_anchor() {
        let theta = map(vec![("w", array![[1.0, -2.0]])]);
        let state = EwcState {
            fisher: map(vec![("w", array![[3.0, 4.0]])]),
            anchor: theta.clone(),
            strength: 10.0,
        };
        assert_eq!(ewc_penalty(&theta, &state).unwrap(), 0.0);
    }

    #[test]
    fn penalty_matches_hand_sum() {
        // F=[1,2], theta-anchor=[1,1], lambda=2 -> (2/2)*(1*1 + 2*1) = 3.
        let state = EwcState {
            fisher: map(vec![("w", array![[1.0, 2.0]])]),
            anchor: map(vec![("w", array![[0.0, 0.0]])]),
            strength: 2.0,
        };
        let theta = map(vec![("w", array![[1.0, 1.0]])]);
        assert!((ewc_penalty(&theta, &state).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_zero_iff_at_anchor_where_fisher_positive() {
        let state = EwcState {
            fisher: map(vec![("w", array![[0.0, 5.0]])]),
            anchor: map(vec![("w", array![[1.0, 2.0]])]),
            strength: 1.0,
        };
        // Differs only where F=0 -> still zero.
        let theta = map(vec![("w", array![[9.0, 2.0]])]);
        assert_eq!(ewc_penalty(&theta, &state).unwrap(), 0.0);
        // Differs where F>0 -> positive.
        let theta = map(vec![("w", array![[1.0, 2.5]])]);
        assert!(ewc_penalty(&theta, &state).unwrap() > 0.0);
    }

    #[test]
    fn penalty_rejects_shape_mismatch() {
        let state = EwcState {
            fisher: map(vec![("w", array![[1.0, 2.0]])]),
            anchor: map(vec![("w", array![[0.0, 0.0]])]),
            strength: 1.0,
        };
        let theta = map(vec![("w", array![[1.0, 1.0, 1.0]])]);
        assert!(matches!(
            ewc_penalty(&theta, &state).unwrap_err(),
            CoreError::ShapeMismatch(_)
        ));
    }

    #[test]
    fn penalty_gradient_matches_finite_difference_on_5_param_toy() {
        let state = EwcState {
            fisher: map(vec![("w", array![[0.5, 1.5, 0.0, 2.0, 3.0]])]),
            anchor: map(vec![("w", array![[0.1, -0.2, 0.3, 0.0, 1.0]])]),
            strength: 1.7,
        };
        let theta = array![[0.4, 0.1, -0.9, 0.5, 0.2]];
        let h = 1e-6;
        for j in 0..5 {
            let mut tp = theta.clone();
            tp[[0, j]] += h;
            let mut tm = theta.clone();
            tm[[0, j]] -= h;
            let fp = ewc_penalty(&map(vec![("w", tp)]), &state).unwrap();
            let fm = ewc_penalty(&map(vec![("w", tm)]), &state).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let analytic = state.strength
                * state.fisher["w"][[0, j]]
                * (theta[[0, j]] - state.anchor["w"][[0, j]]);
            assert!(
                (fd - analytic).abs() < 1e-6,
                "param {j}: fd {fd} vs analytic {analytic}"
            );
        }
    }
}
