//! Adam with a trainability mask: masked-out parameters receive no update
//! and no optimizer-state change, so they stay bit-identical.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::model::Seq2SeqModel;

use super::policy::FreezeMask;
use super::trainer::TrainConfig;

pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    clip_norm: Option<f64>,
    t: u64,
    m: BTreeMap<String, Array2<f64>>,
    v: BTreeMap<String, Array2<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig) -> Self {
        Adam {
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            clip_norm: cfg.clip_norm,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One update over all trainable parameters using their accumulated
    /// gradients. Returns the pre-clip global gradient norm.
    pub fn step(&mut self, model: &mut Seq2SeqModel, lr: f64, mask: &FreezeMask) -> f64 {
        let mut sq_norm = 0.0;
        model.visit_params(&mut |name, p| {
            if mask.is_trainable(&name) {
                sq_norm += p.grad.iter().map(|g| g * g).sum::<f64>();
            }
        });
        let grad_norm = sq_norm.sqrt();
        let scale = match self.clip_norm {
            Some(c) if grad_norm > c && grad_norm > 0.0 => c / grad_norm,
            _ => 1.0,
        };

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (beta1, beta2, eps) = (self.beta1, self.beta2, self.eps);
        let (m_map, v_map) = (&mut self.m, &mut self.v);

        model.visit_params_mut(&mut |name, p| {
            if !mask.is_trainable(&name) {
                return;
            }
            let m = m_map
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(p.value.raw_dim()));
            let v = v_map
                .entry(name)
                .or_insert_with(|| Array2::zeros(p.value.raw_dim()));
            for ((theta, &g_raw), (m_i, v_i)) in p
                .value
                .iter_mut()
                .zip(p.grad.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                let g = g_raw * scale;
                *m_i = beta1 * *m_i + (1.0 - beta1) * g;
                *v_i = beta2 * *v_i + (1.0 - beta2) * g * g;
                let m_hat = *m_i / bc1;
                let v_hat = *v_i / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
        grad_norm
    }
}
