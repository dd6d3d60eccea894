use super::Transition;
use crate::geom::ShapeGraph;
use crate::nn::{GraphValueNet, Mlp, NnError, Parameterized};

/// Mean loss over a batch and its parameter gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Vec<f64>,
}

/// `y = r + γ·V̄(next)`, or `y = r` for terminal transitions.
pub fn critic_targets(batch: &[&Transition], gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| t.reward + t.next.as_ref().map_or(0.0, |n| gamma * n.target_value))
        .collect()
}

/// Mean squared error of `Q(obs, action)` against `targets`.
pub fn critic_loss(critic: &Mlp, obs: &[f64], actions: &[usize], targets: &[f64]) -> Result<LossGrad, NnError> {
    let rows = actions.len();
    crate::nn::check_len(rows, targets.len())?;
    let tape = critic.forward(obs, rows)?;
    let width = critic.output_width();
    let mut d = vec![0.0; tape.outputs.len()];
    let mut loss = 0.0;
    for (b, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let err = tape.outputs[b * width + a] - y;
        loss += err * err;
        d[b * width + a] = 2.0 * err / rows as f64;
    }
    let mut grads = critic.zero_grads();
    critic.backward(&tape, &d, &mut grads)?;
    Ok(LossGrad {
        loss: loss / rows as f64,
        grads,
    })
}

/// `Σ_a π(a)·(min(Q1, Q2)(a) − α·log π(a))`, exact over both actions.
pub fn soft_value(probs: [f64; 2], q1: [f64; 2], q2: [f64; 2], alpha: f64) -> f64 {
    (0..2)
        .map(|a| probs[a] * (q1[a].min(q2[a]) - alpha * safe_ln(probs[a])))
        .sum()
}

fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        0.0
    }
}

/// Batch mean of `Σ_a π(a|obs)·(α·log π(a|obs) − minQ(obs, a))`.
pub fn actor_loss(actor: &Mlp, obs: &[f64], min_q: &[[f64; 2]], alpha: f64) -> Result<LossGrad, NnError> {
    let rows = min_q.len();
    let tape = actor.forward(obs, rows)?;
    let mut d = Vec::with_capacity(rows * 2);
    let mut loss = 0.0;
    for (b, q) in min_q.iter().enumerate() {
        let pi = tape.row(b);
        for a in 0..2 {
            let lp = safe_ln(pi[a]);
            loss += pi[a] * (alpha * lp - q[a]);
            d.push((alpha * (lp + 1.0) - q[a]) / rows as f64);
        }
    }
    let mut grads = actor.zero_grads();
    actor.backward(&tape, &d, &mut grads)?;
    Ok(LossGrad {
        loss: loss / rows as f64,
        grads,
    })
}

/// Squared error of the value at `chosen_node` against `target`. Gradients
/// scaled by `scale` are accumulated into `grads`; every other node is
/// masked out.
pub fn value_loss(
    net: &GraphValueNet,
    graph: &ShapeGraph,
    chosen_node: usize,
    target: f64,
    scale: f64,
    grads: &mut [f64],
) -> Result<f64, NnError> {
    let tape = net.forward(graph)?;
    let err = tape.values[chosen_node] - target;
    let mut d = vec![0.0; tape.values.len()];
    d[chosen_node] = 2.0 * err * scale;
    net.backward(&tape, &d, grads)?;
    Ok(err * err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Head, MLP_WIDTHS};
    use std::f64::consts::LN_2;

    #[test]
    fn soft_value_examples() {
        let v = soft_value([0.5, 0.5], [1., 1.], [1., 1.], 0.2);
        assert!((v - (1.0 + 0.2 * LN_2)).abs() < 1e-12);
        assert!((v - 1.1386).abs() < 1e-4);
        let greedy = soft_value([0.25, 0.75], [4., 2.], [3., 5.], 0.0);
        assert!((greedy - (0.25 * 3.0 + 0.75 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn critic_loss_examples() {
        let critic = Mlp::zeros(&MLP_WIDTHS, Head::Linear);
        let obs = vec![0.1; 9];
        assert_eq!(critic_loss(&critic, &obs, &[0], &[12.0]).unwrap().loss, 144.0);
        assert_eq!(critic_loss(&critic, &obs, &[1], &[0.0]).unwrap().loss, 0.0);
        let y: f64 = 9.6726 + 0.99 * 10.0;
        assert!((y - 19.5726).abs() < 1e-12);
        let l = critic_loss(&critic, &obs, &[0], &[y]).unwrap().loss;
        assert!((l - 383.1).abs() < 0.05);
    }

    #[test]
    fn actor_loss_uniform_policy() {
        let actor = Mlp::zeros(&MLP_WIDTHS, Head::Probabilities);
        let l = actor_loss(&actor, &[0.0; 9], &[[1.0, 1.0]], 0.2).unwrap();
        assert!((l.loss - (0.2 * 0.5f64.ln() - 1.0)).abs() < 1e-12);
        // Equal Q values: the uniform policy is stationary.
        assert!(l.grads.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn actor_prefers_better_action_without_entropy() {
        let actor = Mlp::zeros(&MLP_WIDTHS, Head::Probabilities);
        let l = actor_loss(&actor, &[0.0; 9], &[[2.0, 0.0]], 0.0).unwrap();
        // Descending the gradient on the last bias raises the X logit.
        let n = l.grads.len();
        assert!(l.grads[n - 2] < 0.0 && l.grads[n - 1] > 0.0);
    }
}
