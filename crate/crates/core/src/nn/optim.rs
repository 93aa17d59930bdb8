use serde::{Deserialize, Serialize};

use super::NetworkParameters;
use crate::error::{Error, Result};

pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPSILON: f64 = 1e-8;

/// Running mean of squared gradients, shaped like the parameters it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub decay: f64,
    pub epsilon: f64,
    pub accumulator: NetworkParameters,
}

impl OptimizerState {
    pub fn new(params: &NetworkParameters) -> Self {
        OptimizerState::with_decay(params, RMSPROP_DECAY, RMSPROP_EPSILON)
    }

    pub fn with_decay(params: &NetworkParameters, decay: f64, epsilon: f64) -> Self {
        OptimizerState {
            decay,
            epsilon,
            accumulator: params.zeros_like(),
        }
    }
}

fn same_shape(a: &NetworkParameters, b: &NetworkParameters) -> bool {
    a.layers.len() == b.layers.len()
        && a
            .layers
            .iter()
            .zip(&b.layers)
            .all(|(x, y)| x.weights.len() == y.weights.len() && x.bias.len() == y.bias.len())
}

/// `acc ← ρ·acc + (1−ρ)·g²`, then `θ ← θ − lr·g / sqrt(acc + ε)`.
pub fn rmsprop_step(
    params: &mut NetworkParameters,
    grads: &NetworkParameters,
    state: &mut OptimizerState,
    learning_rate: f64,
) -> Result<()> {
    if !same_shape(params, grads) || !same_shape(params, &state.accumulator) {
        return Err(Error::shape("parameters, gradients and optimizer state differ in shape"));
    }
    let (decay, eps) = (state.decay, state.epsilon);
    for ((p, g), acc) in params
        .values_mut()
        .zip(grads.values())
        .zip(state.accumulator.values_mut())
    {
        *acc = decay * *acc + (1.0 - decay) * g * g;
        *p -= learning_rate * g / libm::sqrt(*acc + eps);
    }
    Ok(())
}

/// Clamps every weight and bias into `[-c, c]`.
pub fn clip_params(params: &mut NetworkParameters, c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::config(alloc::format!("clip value must be positive, got {c}")));
    }
    for v in params.values_mut() {
        *v = v.clamp(-c, c);
    }
    Ok(())
}
