use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Dense, ParamAlloc};
use super::{check_len, NnError, Parameterized};

/// Input width followed by the widths of the four fully-connected layers.
pub const MLP_WIDTHS: [usize; 5] = [9, 256, 128, 64, 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    /// Normalized exponential over the last layer's outputs.
    Probabilities,
    Linear,
}

/// Feed-forward network with ReLU hidden activations.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    head: Head,
    layers: Vec<Dense>,
    params: Vec<f64>,
}

/// Activations of a batched forward pass.
#[derive(Clone, Debug)]
pub struct MlpTape {
    rows: usize,
    param_count: usize,
    /// Input of every layer (post-ReLU for hidden ones).
    inputs: Vec<Vec<f64>>,
    /// Final outputs after the head, `rows × out`.
    pub outputs: Vec<f64>,
}

impl MlpTape {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.outputs.len() / self.rows.max(1);
        &self.outputs[i * w..(i + 1) * w]
    }
}

impl Mlp {
    pub fn zeros(widths: &[usize], head: Head) -> Self {
        assert!(widths.len() >= 2, "need at least an input and an output width");
        let mut alloc = ParamAlloc::default();
        let layers: Vec<Dense> = widths.windows(2).map(|w| Dense::new(w[0], w[1], &mut alloc)).collect();
        Self {
            widths: widths.to_vec(),
            head,
            layers,
            params: vec![0.0; alloc.total()],
        }
    }

    pub fn new(widths: &[usize], head: Head, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(widths, head);
        for layer in &net.layers {
            layer.init(rng, &mut net.params);
        }
        net
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Forward pass over `rows` inputs stacked row-major.
    pub fn forward(&self, inputs: &[f64], rows: usize) -> Result<MlpTape, NnError> {
        check_len(rows * self.input_width(), inputs.len())?;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut x = inputs.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(&self.params, &x, rows);
            if i < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(std::mem::replace(&mut x, y));
        }
        if self.head == Head::Probabilities {
            for row in x.chunks_exact_mut(self.output_width()) {
                softmax_in_place(row);
            }
        }
        Ok(MlpTape {
            rows,
            param_count: self.params.len(),
            inputs: acts,
            outputs: x,
        })
    }

    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(input, 1)?.outputs)
    }

    /// Accumulates `dL/dparams` into `grads` given `dL/doutputs` (with
    /// respect to the head's outputs). Returns `dL/dinputs`.
    pub fn backward(&self, tape: &MlpTape, d_outputs: &[f64], grads: &mut [f64]) -> Result<Vec<f64>, NnError> {
        if tape.param_count != self.params.len() || tape.inputs.len() != self.layers.len() {
            return Err(NnError::StaleCache);
        }
        check_len(tape.outputs.len(), d_outputs.len())?;
        check_len(self.params.len(), grads.len())?;
        let rows = tape.rows;
        let out_w = self.output_width();
        let mut dy: Vec<f64> = match self.head {
            Head::Linear => d_outputs.to_vec(),
            Head::Probabilities => {
                let mut d = Vec::with_capacity(d_outputs.len());
                for (pr, dp) in tape.outputs.chunks_exact(out_w).zip(d_outputs.chunks_exact(out_w)) {
                    let dot: f64 = pr.iter().zip(dp).map(|(a, b)| a * b).sum();
                    d.extend(pr.iter().zip(dp).map(|(p, g)| p * (g - dot)));
                }
                d
            }
        };
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.inputs[i];
            let dx = layer.backward(&self.params, x, &dy, rows, grads);
            dy = if i > 0 {
                // ReLU mask: the stored input is the previous layer's output.
                dx.iter().zip(x).map(|(d, &a)| if a > 0.0 { *d } else { 0.0 }).collect()
            } else {
                dx
            };
        }
        Ok(dy)
    }
}

impl Parameterized for Mlp {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params() {
        let actor = Mlp::zeros(&MLP_WIDTHS, Head::Probabilities);
        assert_eq!(actor.forward_one(&[0.3; 9]).unwrap(), vec![0.5, 0.5]);
        let critic = Mlp::zeros(&MLP_WIDTHS, Head::Linear);
        assert_eq!(critic.forward_one(&[0.3; 9]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn parameter_count() {
        let net = Mlp::zeros(&MLP_WIDTHS, Head::Linear);
        assert_eq!(net.param_count(), 9 * 256 + 256 + 256 * 128 + 128 + 128 * 64 + 64 + 64 * 2 + 2);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(&MLP_WIDTHS, Head::Probabilities, &mut rng);
        for _ in 0..20 {
            let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = net.forward_one(&x).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn wrong_input_width() {
        let net = Mlp::zeros(&MLP_WIDTHS, Head::Linear);
        assert!(matches!(net.forward_one(&[0.0; 8]), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn tape_from_other_network_is_stale() {
        let a = Mlp::zeros(&[3, 4, 2], Head::Linear);
        let b = Mlp::zeros(&[3, 5, 2], Head::Linear);
        let tape = a.forward(&[0.0; 3], 1).unwrap();
        let mut g = b.zero_grads();
        assert_eq!(b.backward(&tape, &[1.0, 1.0], &mut g), Err(NnError::StaleCache));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for head in [Head::Linear, Head::Probabilities] {
            let mut net = Mlp::new(&[4, 6, 5, 3], head, &mut rng);
            let rows = 3;
            let x: Vec<f64> = (0..rows * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..rows * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tape = net.forward(&x, rows).unwrap();
            let mut g = net.zero_grads();
            net.backward(&tape, &r, &mut g).unwrap();
            for i in 0..net.param_count() {
                let orig = net.params()[i];
                let eval = |net: &Mlp| -> f64 {
                    let o = net.forward(&x, rows).unwrap().outputs;
                    o.iter().zip(&r).map(|(a, b)| a * b).sum()
                };
                net.params_mut()[i] = orig + 1e-5;
                let up = eval(&net);
                net.params_mut()[i] = orig - 1e-5;
                let down = eval(&net);
                net.params_mut()[i] = orig;
                let num = (up - down) / 2e-5;
                let rel = (g[i] - num).abs() / g[i].abs().max(num.abs()).max(1e-6);
                assert!(rel < 1e-4, "{head:?} param {i}: {} vs {num}", g[i]);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&MLP_WIDTHS, Head::Probabilities, &mut rng);
        let tape = net.forward(&[0.1; 9], 1).unwrap();
        let mut g = net.zero_grads();
        net.backward(&tape, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
