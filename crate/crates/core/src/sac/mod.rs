//! Discrete-action soft actor-critic specialised to two cut directions,
//! with a graph value network scoring cut sites.

mod agent;
mod losses;
mod replay;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Direction;

pub use agent::{Agent, AgentState, Losses, Optimizers};
pub use losses::{actor_loss, critic_loss, critic_targets, soft_value, value_loss, LossGrad};
pub use replay::{NextState, ReplayBuffer, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub value_lr: f64,
    /// Minibatch for the actor and both critics.
    pub batch_size: usize,
    /// Minibatch for the graph value network.
    pub value_batch_size: usize,
    pub buffer_capacity: usize,
    pub gradient_steps: usize,
    pub vertex_temperature: f64,
    pub step_cap: usize,
    pub bonus: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.2,
            tau: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            value_lr: 3e-4,
            batch_size: 64,
            value_batch_size: 8,
            buffer_capacity: 100_000,
            gradient_steps: 1,
            vertex_temperature: 1.0,
            step_cap: 64,
            bonus: crate::reward::DEFAULT_BONUS,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            ((0.0..1.0).contains(&self.gamma), "gamma must lie in [0, 1)"),
            (self.alpha >= 0.0, "alpha must be non-negative"),
            (self.tau > 0.0 && self.tau <= 1.0, "tau must lie in (0, 1]"),
            (
                self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.value_lr > 0.0,
                "learning rates must be positive",
            ),
            (
                self.batch_size > 0 && self.value_batch_size > 0,
                "batch sizes must be positive",
            ),
            (self.buffer_capacity > 0, "buffer capacity must be positive"),
            (self.gradient_steps > 0, "gradient steps must be positive"),
            (self.vertex_temperature > 0.0, "temperature must be positive"),
            (self.step_cap > 0, "step cap must be positive"),
            (self.bonus.is_finite(), "bonus must be finite"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg.to_string()),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMode {
    Stochastic,
    Deterministic,
}

/// Index of the chosen entry of `values`. Deterministic mode takes the
/// first maximum; stochastic mode samples from `softmax(values / T)`.
pub fn select_vertex(values: &[f64], mode: SelectionMode, temperature: f64, rng: &mut impl Rng) -> usize {
    assert!(!values.is_empty(), "no vertex to select");
    match mode {
        SelectionMode::Deterministic => argmax(values),
        SelectionMode::Stochastic => {
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = values.iter().map(|v| ((v - max) / temperature).exp()).collect();
            WeightedIndex::new(&weights).expect("weights are positive").sample(rng)
        }
    }
}

pub fn select_action(probs: [f64; 2], mode: SelectionMode, rng: &mut impl Rng) -> Direction {
    match mode {
        SelectionMode::Deterministic => Direction::from_index(argmax(&probs)),
        SelectionMode::Stochastic => {
            if rng.gen::<f64>() < probs[0] {
                Direction::XAxis
            } else {
                Direction::YAxis
            }
        }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
