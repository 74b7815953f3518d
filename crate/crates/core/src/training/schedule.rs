//! Learning-rate warmup/decay and the stepped dropout schedule.

use super::trainer::TrainConfig;

/// Linear warmup from 0 over `warmup_steps`, then linear decay to 0 at
/// `max_steps`; dropout follows the configured stages (the stage with the
/// largest `from_step <= step` applies).
pub fn lr_and_dropout_at(step: u64, cfg: &TrainConfig) -> (f64, f64) {
    let lr = if cfg.warmup_steps > 0 && step < cfg.warmup_steps {
        cfg.lr * step as f64 / cfg.warmup_steps as f64
    } else if cfg.max_steps > cfg.warmup_steps {
        let span = (cfg.max_steps - cfg.warmup_steps) as f64;
        let done = (step.saturating_sub(cfg.warmup_steps)) as f64;
        cfg.lr * (1.0 - done / span).max(0.0)
    } else {
        cfg.lr
    };

    let mut dropout = 0.0;
    let mut best_from = None;
    for &(from_step, rate) in &cfg.dropout_stages {
        if from_step <= step && best_from.map_or(true, |b| from_step >= b) {
            best_from = Some(from_step);
            dropout = rate;
        }
    }
    (lr, dropout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_cfg() -> TrainConfig {
        TrainConfig {
            lr: 3e-5,
            warmup_steps: 2500,
            max_steps: 100_000,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lr_zero_at_step_zero() {
        let (lr, _) = lr_and_dropout_at(0, &paper_cfg());
        assert_eq!(lr, 0.0);
    }

    #[test]
    fn lr_peaks_at_warmup_end() {
        let (lr, _) = lr_and_dropout_at(2500, &paper_cfg());
        assert!((lr - 3e-5).abs() < 1e-20);
    }

    #[test]
    fn lr_decays_linearly_to_zero() {
        let cfg = paper_cfg();
        let (mid, _) = lr_and_dropout_at(2500 + (100_000 - 2500) / 2, &cfg);
        assert!((mid - 1.5e-5).abs() < 1e-9);
        let (end, _) = lr_and_dropout_at(100_000, &cfg);
        assert_eq!(end, 0.0);
        let (beyond, _) = lr_and_dropout_at(200_000, &cfg);
        assert_eq!(beyond, 0.0);
    }

    #[test]
    fn dropout_follows_the_step_stages() {
        let cfg = paper_cfg();
        assert_eq!(lr_and_dropout_at(0, &cfg).1, 0.3);
        assert_eq!(lr_and_dropout_at(19_999, &cfg).1, 0.3);
        assert_eq!(lr_and_dropout_at(20_000, &cfg).1, 0.2);
        assert_eq!(lr_and_dropout_at(40_000, &cfg).1, 0.2);
        assert_eq!(lr_and_dropout_at(40_001, &cfg).1, 0.0);
    }
}
