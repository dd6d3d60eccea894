//! Small differentiable-network substrate with hand-written gradients.
//!
//! Every network owns one flat `Vec<f64>` of parameters; layers are views
//! into it by offset. Forward passes return a tape holding the activations
//! the matching backward pass needs, so gradients can only be requested for
//! a forward pass that actually happened. Gradients accumulate into a
//! caller-provided buffer of the same length as the parameters.

mod adam;
mod graphnet;
pub mod layers;
mod linalg;
mod mlp;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{soft_update, Adam, AdamConfig};
pub use graphnet::{GraphNetArch, GraphTape, GraphValueNet};
pub use layers::MessagePlan;
pub use mlp::{Head, Mlp, MlpTape, MLP_WIDTHS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("tape does not belong to this forward pass")]
    StaleCache,
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<(), NnError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch { expected, actual })
    }
}

/// Fills `w` uniformly in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_uniform(rng: &mut impl Rng, w: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in w {
        *x = rng.gen_range(-limit..=limit);
    }
}

/// Anything holding a flat parameter vector.
pub trait Parameterized {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn param_count(&self) -> usize {
        self.params().len()
    }

    fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.param_count()]
    }
}

/// Architecture tag stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentArch {
    pub mlp_widths: Vec<usize>,
    pub value: GraphNetArch,
}

impl Default for AgentArch {
    fn default() -> Self {
        Self {
            mlp_widths: MLP_WIDTHS.to_vec(),
            value: GraphNetArch::default(),
        }
    }
}
