//! A desk-scale encoder-decoder transformer with language-tag conditioning,
//! label-smoothed training loss, and beam-search generation.

pub mod beam;
pub mod checkpoint;
pub mod config;
pub mod layers;
pub mod loss;
pub mod math;
pub mod transformer;

pub use beam::{beam_search, greedy_decode, Hypothesis};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use layers::Param;
pub use loss::{loss_grad_logits, loss_label_smoothed, loss_sum};
pub use transformer::{
    decoder_input, decoder_targets, tag_sequence, EncodedExample, Seq2SeqModel, TaggedSequence,
};
