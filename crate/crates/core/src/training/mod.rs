//! Training orchestration: freeze policies, EWC regularization, the Adam
//! optimizer with parameter masks, schedules, and the three-phase recipe
//! (auxiliary pre-training, frozen fine-tuning, few-shot adaptation).

pub mod fisher;
pub mod optimizer;
pub mod policy;
pub mod schedule;
pub mod trainer;

pub use fisher::{estimate_fisher, ewc_penalty, ewc_penalty_model, EwcState};
pub use optimizer::Adam;
pub use policy::{apply_freeze, FreezeMask, FreezePolicy, PolicyName, SubsetSpec};
pub use schedule::lr_and_dropout_at;
pub use trainer::{
    encode_records, evaluate_loss, fewshot_finetune, finetune, pretrain_auxiliary, train,
    StepRecord, TrainConfig, TrainOutcome,
};
