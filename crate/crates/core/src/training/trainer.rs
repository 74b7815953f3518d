//! The training loop and the three-phase recipe entry points.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::auxdata::PairRecord;
use crate::corpus::LanguageTag;
use crate::error::{CoreError, Result};
use crate::model::{
    decoder_targets, loss_grad_logits, loss_sum, tag_sequence, EncodedExample, Seq2SeqModel,
};
use crate::rng;
use crate::vocab::{Vocabulary, EOS_ID, PAD_ID};

use super::fisher::{ewc_grad_into, EwcState};
use super::optimizer::Adam;
use super::policy::{apply_freeze, FreezeMask, FreezePolicy};
use super::schedule::lr_and_dropout_at;

/// Optimization hyper-parameters. Defaults follow the published recipe:
/// Adam(eps 1e-6, beta2 0.98), lr 3e-5 with 2500 warmup steps and linear
/// decay, dropout 0.3 stepping down to 0.2 after 20k and 0 after 40k steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub warmup_steps: u64,
    pub max_steps: u64,
    /// Batch assembly budget: source plus target tokens per batch.
    pub batch_tokens: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: Option<f64>,
    /// `(from_step, rate)` stages; the stage with the largest
    /// `from_step <= step` applies.
    pub dropout_stages: Vec<(u64, f64)>,
    /// Validation cadence for model selection; 0 disables periodic eval.
    pub eval_interval: u64,
    /// Few-shot runs warn above this example count.
    pub fewshot_cap: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 3e-5,
            warmup_steps: 2500,
            max_steps: 10_000,
            batch_tokens: 2048,
            adam_beta1: 0.9,
            adam_beta2: 0.98,
            adam_eps: 1e-6,
            clip_norm: None,
            dropout_stages: vec![(0, 0.3), (20_000, 0.2), (40_001, 0.0)],
            eval_interval: 500,
            fewshot_cap: 1000,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_tokens == 0 {
            return Err(CoreError::InvalidArgument(
                "batch_tokens must be positive".to_string(),
            ));
        }
        for &(_, rate) in &self.dropout_stages {
            if !(0.0..1.0).contains(&rate) {
                return Err(CoreError::InvalidArgument(format!(
                    "dropout stage rate {rate} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub dropout: f64,
    pub wall_ms: u64,
}

/// What a training phase reports back; the model itself is updated in
/// place (ending at the best-validation parameters when a validation set
/// was provided).
#[derive(Debug, Default)]
pub struct TrainOutcome {
    pub trajectory: Vec<StepRecord>,
    pub evals: Vec<(u64, f64)>,
    pub best_val_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    /// Examples per epoch stream (task plus augmentation for fine-tuning).
    pub epoch_stream_len: usize,
    pub warnings: Vec<String>,
}

/// Per-eval-interval callback: `(step, validation loss, current model)`.
pub type EvalHook<'a> = &'a mut dyn FnMut(u64, f64, &Seq2SeqModel);

/// Groups examples in shuffled order until the token budget is hit; every
/// batch carries at least one example.
pub(crate) fn pack_batches(
    examples: &[EncodedExample],
    order: &[usize],
    batch_tokens: usize,
) -> Vec<Vec<usize>> {
    let mut batches = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut current_tokens = 0usize;
    for &idx in order {
        let cost = examples[idx].src.tokens.len() + examples[idx].tgt_ids.len() + 1;
        if !current.is_empty() && current_tokens + cost > batch_tokens {
            batches.push(std::mem::take(&mut current));
            current_tokens = 0;
        }
        current.push(idx);
        current_tokens += cost;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

/// Mean per-token label-smoothing-free negative log-likelihood, dropout
/// disabled. Used for model selection ("validation data likelihood").
pub fn evaluate_loss(model: &Seq2SeqModel, data: &[EncodedExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(CoreError::EmptyDataset("evaluation set".to_string()));
    }
    let mut total = 0.0;
    let mut tokens = 0usize;
    for ex in data {
        let (lp, _) = model.forward_example(ex, 0.0, None)?;
        let targets = decoder_targets(ex, EOS_ID);
        let (sum, count) = loss_sum(&lp, &targets, 0.0, PAD_ID)?;
        total += sum;
        tokens += count;
    }
    Ok(total / tokens as f64)
}

/// The core loop: seeded epoch shuffling, token-budget batches, scheduled
/// lr/dropout, masked Adam updates, optional EWC penalty, periodic
/// validation with best-checkpoint selection. Deterministic for a fixed
/// `(model, data, config)`.
pub fn train(
    model: &mut Seq2SeqModel,
    train_set: &[EncodedExample],
    valid_set: Option<&[EncodedExample]>,
    cfg: &TrainConfig,
    mask: &FreezeMask,
    ewc: Option<&EwcState>,
    mut on_eval: Option<EvalHook<'_>>,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(CoreError::EmptyDataset("training set".to_string()));
    }
    cfg.validate()?;
    let smoothing = model.cfg.label_smoothing;

    let mut adam = Adam::new(cfg);
    let mut outcome = TrainOutcome {
        epoch_stream_len: train_set.len(),
        ..TrainOutcome::default()
    };
    let mut best: Option<(f64, BTreeMap<String, Array2<f64>>)> = None;

    let mut step: u64 = 0;
    let mut epoch: u64 = 0;
    'outer: while step < cfg.max_steps {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = rng::stream(cfg.seed, "epoch_shuffle", epoch, 0);
        order.shuffle(&mut shuffle_rng);

        for batch in pack_batches(train_set, &order, cfg.batch_tokens) {
            if step >= cfg.max_steps {
                break 'outer;
            }
            let started = Instant::now();
            let (lr, dropout) = lr_and_dropout_at(step, cfg);
            model.zero_grads();
            let total_tokens: usize = batch
                .iter()
                .map(|&i| train_set[i].tgt_ids.len() + 1)
                .sum();
            let mut loss_total = 0.0;
            let mut drop_rng = rng::stream(cfg.seed, "dropout", epoch, step);
            for &i in &batch {
                let ex = &train_set[i];
                let rng_arg = if dropout > 0.0 {
                    Some(&mut drop_rng)
                } else {
                    None
                };
                let (lp, cache) = model.forward_example(ex, dropout, rng_arg)?;
                let targets = decoder_targets(ex, EOS_ID);
                let (sum, _) = loss_sum(&lp, &targets, smoothing, PAD_ID)?;
                let mut d_logits = loss_grad_logits(&lp, &targets, smoothing, PAD_ID)?;
                d_logits.mapv_inplace(|v| v / total_tokens as f64);
                model.backward_example(&d_logits, cache);
                loss_total += sum;
            }
            let mut loss = loss_total / total_tokens as f64;
            if let Some(state) = ewc {
                loss += ewc_grad_into(model, state)?;
            }
            if !loss.is_finite() {
                return Err(CoreError::Divergence { step });
            }
            adam.step(model, lr, mask);

            outcome.trajectory.push(StepRecord {
                step,
                loss,
                lr,
                dropout,
                wall_ms: started.elapsed().as_millis() as u64,
            });
            step += 1;

            if cfg.eval_interval > 0 && step % cfg.eval_interval == 0 {
                if let Some(valid) = valid_set.filter(|v| !v.is_empty()) {
                    let val_loss = evaluate_loss(model, valid)?;
                    outcome.evals.push((step, val_loss));
                    if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
                        best = Some((val_loss, model.snapshot()));
                    }
                    if let Some(hook) = on_eval.as_mut() {
                        hook(step, val_loss, model);
                    }
                }
            }
        }
        epoch += 1;
    }

    if step > 0 {
        if let Some(valid) = valid_set.filter(|v| !v.is_empty()) {
            let val_loss = evaluate_loss(model, valid)?;
            outcome.evals.push((step, val_loss));
            outcome.final_val_loss = Some(val_loss);
            if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
                best = Some((val_loss, model.snapshot()));
            }
        }
    }
    if let Some((val_loss, snapshot)) = best {
        model.load_snapshot(&snapshot)?;
        outcome.best_val_loss = Some(val_loss);
    }
    Ok(outcome)
}

/// Phase 1: further pre-training on the auxiliary task, nothing frozen.
pub fn pretrain_auxiliary(
    model: &mut Seq2SeqModel,
    aux_train: &[EncodedExample],
    aux_valid: Option<&[EncodedExample]>,
    cfg: &TrainConfig,
    on_eval: Option<EvalHook<'_>>,
) -> Result<TrainOutcome> {
    if aux_train.is_empty() {
        return Err(CoreError::EmptyDataset("auxiliary dataset".to_string()));
    }
    train(
        model,
        aux_train,
        aux_valid,
        cfg,
        &FreezeMask::none(),
        None,
        on_eval,
    )
}

/// Phase 2: supervised fine-tuning under a freeze policy, optionally mixing
/// auxiliary examples into every epoch's shuffled stream. Returns the
/// outcome and the resolved mask (few-shot continuation reuses it).
pub fn finetune(
    model: &mut Seq2SeqModel,
    task_train: &[EncodedExample],
    task_valid: Option<&[EncodedExample]>,
    policy: &FreezePolicy,
    augmentation: Option<&[EncodedExample]>,
    cfg: &TrainConfig,
    on_eval: Option<EvalHook<'_>>,
) -> Result<(TrainOutcome, FreezeMask)> {
    if task_train.is_empty() {
        return Err(CoreError::EmptyDataset("task dataset".to_string()));
    }
    let mask = apply_freeze(model, policy)?;
    let mut stream: Vec<EncodedExample> = Vec::with_capacity(
        task_train.len() + augmentation.map_or(0, <[EncodedExample]>::len),
    );
    stream.extend_from_slice(task_train);
    if let Some(aux) = augmentation {
        stream.extend_from_slice(aux);
    }
    let outcome = train(
        model,
        &stream,
        task_valid,
        cfg,
        &mask,
        policy.ewc.as_ref(),
        on_eval,
    )?;
    Ok((outcome, mask))
}

/// Phase 3: continued training on up to ~1000 target-language examples.
/// Everything unfreezes by default; `keep_frozen` keeps `prior_mask`.
pub fn fewshot_finetune(
    model: &mut Seq2SeqModel,
    lrl_train: &[EncodedExample],
    lrl_valid: Option<&[EncodedExample]>,
    cfg: &TrainConfig,
    keep_frozen: bool,
    prior_mask: &FreezeMask,
    on_eval: Option<EvalHook<'_>>,
) -> Result<TrainOutcome> {
    if lrl_train.is_empty() {
        return Err(CoreError::EmptyDataset("few-shot dataset".to_string()));
    }
    let mask = if keep_frozen {
        prior_mask.clone()
    } else {
        FreezeMask::none()
    };
    let mut outcome = train(model, lrl_train, lrl_valid, cfg, &mask, None, on_eval)?;
    if lrl_train.len() > cfg.fewshot_cap {
        outcome.warnings.push(format!(
            "few-shot dataset has {} examples, above the configured cap of {}",
            lrl_train.len(),
            cfg.fewshot_cap
        ));
    }
    Ok(outcome)
}

/// Encodes JSONL records against a vocabulary: whitespace tokens to ids,
/// language tags appended to the source side.
pub fn encode_records(records: &[PairRecord], vocab: &Vocabulary) -> Result<Vec<EncodedExample>> {
    records
        .iter()
        .map(|rec| {
            let src_lang = LanguageTag::new(&rec.src_lang)?;
            let tgt_lang = LanguageTag::new(&rec.tgt_lang)?;
            let src = tag_sequence(vocab, &vocab.encode(&rec.src), &src_lang, &tgt_lang)?;
            Ok(EncodedExample {
                src,
                tgt_ids: vocab.encode(&rec.tgt),
            })
        })
        .collect()
}
