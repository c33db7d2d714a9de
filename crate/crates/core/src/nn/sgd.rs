use super::layers::LayerParams;
use crate::error::{Error, Result};

/// Optimizer and batching settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 16,
            seed: 0x5eed,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("weight_decay must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One momentum step, then clears the gradients.
///
/// `v <- momentum * v - lr * (g + weight_decay * w)`, `w <- w + v`; biases are
/// not decayed.
pub fn sgd_step(params: &mut LayerParams, learning_rate: f32, config: &TrainConfig) {
    let LayerParams {
        weights,
        biases,
        grad_weights,
        grad_biases,
        velocity_weights,
        velocity_biases,
    } = params;
    for ((w, g), v) in weights
        .data_mut()
        .iter_mut()
        .zip(grad_weights.data())
        .zip(velocity_weights.data_mut())
    {
        *v = config.momentum * *v - learning_rate * (g + config.weight_decay * *w);
        *w += *v;
    }
    for ((b, g), v) in biases
        .data_mut()
        .iter_mut()
        .zip(grad_biases.data())
        .zip(velocity_biases.data_mut())
    {
        *v = config.momentum * *v - learning_rate * g;
        *b += *v;
    }
    params.zero_grad();
}
