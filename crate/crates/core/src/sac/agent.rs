use rand::Rng;
use serde::{Deserialize, Serialize};

use super::losses::{actor_loss, critic_loss, critic_targets, soft_value, value_loss};
use super::{ReplayBuffer, SacConfig, Transition};
use crate::geom::ShapeGraph;
use crate::nn::{soft_update, Adam, AdamConfig, AgentArch, GraphValueNet, Head, Mlp, NnError, Parameterized};
use crate::obs::LocalObservation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizers {
    pub actor: Adam,
    pub critic1: Adam,
    pub critic2: Adam,
    pub value: Adam,
}

/// Everything besides network parameters needed to continue training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub optimizers: Optimizers,
    pub buffer: ReplayBuffer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub actor: f64,
    pub critic1: f64,
    pub critic2: f64,
    pub value: f64,
}

/// Actor, twin critics, value network with its slow-moving target, their
/// optimizers and the replay buffer.
#[derive(Clone, Debug)]
pub struct Agent {
    pub config: SacConfig,
    pub arch: AgentArch,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub value: GraphValueNet,
    pub target_value: GraphValueNet,
    pub optimizers: Optimizers,
    pub buffer: ReplayBuffer,
}

impl Agent {
    pub fn new(config: SacConfig, arch: AgentArch, rng: &mut impl Rng) -> Self {
        let actor = Mlp::new(&arch.mlp_widths, Head::Probabilities, rng);
        let critic1 = Mlp::new(&arch.mlp_widths, Head::Linear, rng);
        let critic2 = Mlp::new(&arch.mlp_widths, Head::Linear, rng);
        let value = GraphValueNet::new(arch.value.clone(), rng);
        Self::assemble(config, arch, actor, critic1, critic2, value.clone(), value)
    }

    /// Builds an agent around existing networks with fresh optimizers and an
    /// empty buffer.
    pub fn assemble(
        config: SacConfig,
        arch: AgentArch,
        actor: Mlp,
        critic1: Mlp,
        critic2: Mlp,
        value: GraphValueNet,
        target_value: GraphValueNet,
    ) -> Self {
        let adam = |lr: f64, n: usize| {
            Adam::new(
                AdamConfig {
                    lr,
                    ..AdamConfig::default()
                },
                n,
            )
        };
        let optimizers = Optimizers {
            actor: adam(config.actor_lr, actor.param_count()),
            critic1: adam(config.critic_lr, critic1.param_count()),
            critic2: adam(config.critic_lr, critic2.param_count()),
            value: adam(config.value_lr, value.param_count()),
        };
        let buffer = ReplayBuffer::new(config.buffer_capacity);
        Self {
            config,
            arch,
            actor,
            critic1,
            critic2,
            value,
            target_value,
            optimizers,
            buffer,
        }
    }

    pub fn state(&self) -> AgentState {
        AgentState {
            optimizers: self.optimizers.clone(),
            buffer: self.buffer.clone(),
        }
    }

    pub fn restore(&mut self, state: AgentState) {
        self.optimizers = state.optimizers;
        self.buffer = state.buffer;
    }

    /// Online value of every model vertex, indexed by polygon vertex.
    pub fn vertex_values(&self, graph: &ShapeGraph) -> Result<Vec<f64>, NnError> {
        model_values(&self.value, graph)
    }

    /// Target-network value of the vertex the target network ranks highest.
    pub fn target_state_value(&self, graph: &ShapeGraph) -> Result<f64, NnError> {
        Ok(model_values(&self.target_value, graph)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn action_probs(&self, obs: &LocalObservation) -> Result<[f64; 2], NnError> {
        let p = self.actor.forward_one(&obs.to_array())?;
        Ok([p[0], p[1]])
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One gradient step on every network. Returns `None` until the buffer
    /// holds a full minibatch.
    pub fn update(&mut self, rng: &mut impl Rng) -> Result<Option<Losses>, NnError> {
        let cfg = &self.config;
        if self.buffer.len() < cfg.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(cfg.batch_size, rng);
        let obs: Vec<f64> = batch.iter().flat_map(|t| t.local_obs.to_array()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
        let targets = critic_targets(&batch, cfg.gamma);

        let c1 = critic_loss(&self.critic1, &obs, &actions, &targets)?;
        let c2 = critic_loss(&self.critic2, &obs, &actions, &targets)?;
        self.optimizers.critic1.step(self.critic1.params_mut(), &c1.grads)?;
        self.optimizers.critic2.step(self.critic2.params_mut(), &c2.grads)?;

        let rows = batch.len();
        let q1 = self.critic1.forward(&obs, rows)?;
        let q2 = self.critic2.forward(&obs, rows)?;
        let min_q: Vec<[f64; 2]> = (0..rows)
            .map(|b| {
                let (a, c) = (q1.row(b), q2.row(b));
                [a[0].min(c[0]), a[1].min(c[1])]
            })
            .collect();
        let actor = actor_loss(&self.actor, &obs, &min_q, cfg.alpha)?;
        self.optimizers.actor.step(self.actor.params_mut(), &actor.grads)?;

        let value_batch = self.buffer.sample(cfg.value_batch_size, rng);
        let vobs: Vec<f64> = value_batch.iter().flat_map(|t| t.local_obs.to_array()).collect();
        let vrows = value_batch.len();
        let pi = self.actor.forward(&vobs, vrows)?;
        let vq1 = self.critic1.forward(&vobs, vrows)?;
        let vq2 = self.critic2.forward(&vobs, vrows)?;
        let mut vgrads = self.value.zero_grads();
        let mut vloss = 0.0;
        let scale = 1.0 / vrows as f64;
        for (b, t) in value_batch.iter().enumerate() {
            let two = |s: &[f64]| [s[0], s[1]];
            let target = soft_value(two(pi.row(b)), two(vq1.row(b)), two(vq2.row(b)), cfg.alpha);
            vloss += value_loss(&self.value, &t.state_graph, t.chosen_node, target, scale, &mut vgrads)?;
        }
        self.optimizers.value.step(self.value.params_mut(), &vgrads)?;
        soft_update(self.target_value.params_mut(), self.value.params(), cfg.tau)?;

        Ok(Some(Losses {
            actor: actor.loss,
            critic1: c1.loss,
            critic2: c2.loss,
            value: vloss * scale,
        }))
    }
}

fn model_values(net: &GraphValueNet, graph: &ShapeGraph) -> Result<Vec<f64>, NnError> {
    let values = net.values(graph)?;
    Ok(graph.model_nodes().into_iter().map(|n| values[n]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{triangulate, Direction, Point, RectilinearPolygon};
    use crate::nn::GraphNetArch;
    use crate::obs::observe;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn tiny_arch() -> AgentArch {
        AgentArch {
            mlp_widths: vec![9, 16, 2],
            value: GraphNetArch {
                input_width: 4,
                block_widths: vec![4],
                kernel_size: 5,
            },
        }
    }

    fn agent(seed: u64) -> (Agent, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SacConfig {
            batch_size: 4,
            ..SacConfig::default()
        };
        (Agent::new(cfg, tiny_arch(), &mut rng), rng)
    }

    fn push_terminal(agent: &mut Agent, reward: f64) {
        let sq = RectilinearPolygon::rectangle("s", Point::new(0., 0.), Point::new(1., 1.)).unwrap();
        let g = Arc::new(triangulate(&sq, 1.0).unwrap());
        agent.remember(Transition {
            state_graph: g.clone(),
            chosen_vertex: 1,
            chosen_node: g.model_nodes()[1],
            local_obs: observe(&sq, 1).unwrap(),
            action: Direction::YAxis,
            reward,
            next: None,
        });
    }

    #[test]
    fn waits_for_full_batch() {
        let (mut a, mut rng) = agent(0);
        push_terminal(&mut a, 1.0);
        assert_eq!(a.update(&mut rng).unwrap(), None);
    }

    #[test]
    fn critics_fit_constant_reward() {
        let (mut a, mut rng) = agent(1);
        for opt in [&mut a.optimizers.critic1, &mut a.optimizers.critic2] {
            opt.config.lr = 1e-2;
        }
        for _ in 0..8 {
            push_terminal(&mut a, 5.0);
        }
        let first = a.update(&mut rng).unwrap().unwrap();
        let mut last = first;
        for _ in 0..300 {
            last = a.update(&mut rng).unwrap().unwrap();
        }
        assert!(last.critic1 < first.critic1 * 0.1, "{first:?} -> {last:?}");
        assert!(last.critic2 < first.critic2 * 0.1);
    }

    #[test]
    fn identical_seeds_identical_agents() {
        let run = || {
            let (mut a, mut rng) = agent(2);
            for r in 0..6 {
                push_terminal(&mut a, r as f64);
            }
            for _ in 0..5 {
                a.update(&mut rng).unwrap();
            }
            (a.value.params().to_vec(), a.actor.params().to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn target_tracks_online_slowly() {
        let (mut a, mut rng) = agent(3);
        for _ in 0..4 {
            push_terminal(&mut a, 3.0);
        }
        let before = a.target_value.params().to_vec();
        a.update(&mut rng).unwrap();
        let moved: f64 = a
            .target_value
            .params()
            .iter()
            .zip(&before)
            .map(|(x, y)| (x - y).abs())
            .sum();
        let online_moved: f64 = a.value.params().iter().zip(&before).map(|(x, y)| (x - y).abs()).sum();
        assert!(moved > 0.0);
        assert!((moved - 0.005 * online_moved).abs() < 1e-9 * online_moved.max(1.0));
    }
}
