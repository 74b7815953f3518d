use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Architecture hyper-parameters. The published recipe uses 12 layers,
/// 16 heads, and d_model 1024; the desk defaults keep the same shape at a
/// size a laptop CPU trains in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Encoder and decoder depth.
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    /// Feed-forward inner width; conventionally 4 * d_model.
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    /// Default dropout rate; the trainer's schedule overrides it per step.
    pub dropout: f64,
    pub label_smoothing: f64,
    /// Adds embedding layer-norm and a final layer-norm to both stacks.
    pub extra_layer_norm: bool,
}

impl ModelConfig {
    /// Desk-scale default: 2 layers, 4 heads, d_model 128.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 2,
            n_heads: 4,
            d_model: 128,
            ffn_dim: 512,
            vocab_size,
            max_positions: 512,
            dropout: 0.1,
            label_smoothing: 0.1,
            extra_layer_norm: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.ffn_dim == 0 {
            return Err(CoreError::InvalidArgument(
                "model dimensions must be positive".to_string(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(CoreError::InvalidArgument(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CoreError::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(CoreError::InvalidArgument(format!(
                "label_smoothing must be in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if self.vocab_size == 0 || self.max_positions == 0 {
            return Err(CoreError::InvalidArgument(
                "vocab_size and max_positions must be positive".to_string(),
            ));
        }
        Ok(())
    }
}
