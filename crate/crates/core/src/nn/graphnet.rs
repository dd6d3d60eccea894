use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    elu, elu_grad, BlockTape, ConvNorm, ConvNormTape, MessagePlan, ParamAlloc, ResidualBlock, SplineConv,
};
use super::{check_len, NnError, Parameterized};
use crate::geom::ShapeGraph;

/// Node features are the one-hot node kind.
pub const NODE_FEATURES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphNetArch {
    pub input_width: usize,
    pub block_widths: Vec<usize>,
    pub kernel_size: usize,
}

impl Default for GraphNetArch {
    fn default() -> Self {
        Self {
            input_width: 64,
            block_widths: vec![128, 256, 128, 64, 32, 16, 8],
            kernel_size: 5,
        }
    }
}

/// Per-node scalar scorer: input convolution, residual blocks, output
/// convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphValueNet {
    arch: GraphNetArch,
    input: ConvNorm,
    blocks: Vec<ResidualBlock>,
    output: SplineConv,
    params: Vec<f64>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct GraphTape {
    param_count: usize,
    plan: MessagePlan,
    features: Vec<f64>,
    input_pre: Vec<f64>,
    input_tape: ConvNormTape,
    /// Input of every block, then the input of the output convolution.
    block_inputs: Vec<Vec<f64>>,
    block_tapes: Vec<BlockTape>,
    /// One value per node.
    pub values: Vec<f64>,
}

impl GraphTape {
    pub fn plan(&self) -> &MessagePlan {
        &self.plan
    }
}

impl GraphValueNet {
    pub fn zeros(arch: GraphNetArch) -> Self {
        let k = arch.kernel_size;
        let mut alloc = ParamAlloc::default();
        let input = ConvNorm::new(NODE_FEATURES, arch.input_width, k, &mut alloc);
        let mut width = arch.input_width;
        let blocks = arch
            .block_widths
            .iter()
            .map(|&w| {
                let b = ResidualBlock::new(width, w, k, &mut alloc);
                width = w;
                b
            })
            .collect();
        let output = SplineConv::new(width, 1, k, &mut alloc);
        Self {
            arch,
            input,
            blocks,
            output,
            params: vec![0.0; alloc.total()],
        }
    }

    pub fn new(arch: GraphNetArch, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(arch);
        let mut p = std::mem::take(&mut net.params);
        net.input.init(rng, &mut p);
        for b in &net.blocks {
            b.init(rng, &mut p);
        }
        net.output.init(rng, &mut p);
        net.params = p;
        net
    }

    pub fn arch(&self) -> &GraphNetArch {
        &self.arch
    }

    pub fn forward(&self, graph: &ShapeGraph) -> Result<GraphTape, NnError> {
        if graph.node_count() == 0 {
            return Err(NnError::EmptyGraph);
        }
        let plan = MessagePlan::new(graph, self.arch.kernel_size);
        let features = graph.node_features();
        let p = &self.params;
        let (input_pre, input_tape) = self.input.forward(p, &plan, &features);
        let mut h: Vec<f64> = input_pre.iter().map(|&v| elu(v)).collect();
        let mut block_inputs = Vec::with_capacity(self.blocks.len() + 1);
        let mut block_tapes = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, t) = block.forward(p, &plan, &h);
            block_inputs.push(std::mem::replace(&mut h, y));
            block_tapes.push(t);
        }
        let values = self.output.forward(p, &plan, &h);
        block_inputs.push(h);
        Ok(GraphTape {
            param_count: p.len(),
            plan,
            features,
            input_pre,
            input_tape,
            block_inputs,
            block_tapes,
            values,
        })
    }

    pub fn values(&self, graph: &ShapeGraph) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(graph)?.values)
    }

    /// Accumulates parameter gradients for upstream `d_values` (one per
    /// node). Zero entries mask nodes out of the loss entirely.
    pub fn backward(&self, tape: &GraphTape, d_values: &[f64], grads: &mut [f64]) -> Result<(), NnError> {
        if tape.param_count != self.params.len() || tape.block_tapes.len() != self.blocks.len() {
            return Err(NnError::StaleCache);
        }
        check_len(tape.plan.nodes, d_values.len())?;
        check_len(self.params.len(), grads.len())?;
        let p = &self.params;
        let plan = &tape.plan;
        let last_input = tape.block_inputs.last().expect("output input recorded");
        let mut dh = self.output.backward(p, plan, last_input, d_values, grads);
        for (i, block) in self.blocks.iter().enumerate().rev() {
            dh = block.backward(p, plan, &tape.block_inputs[i], &tape.block_tapes[i], &dh, grads);
        }
        let dpre: Vec<f64> = dh
            .iter()
            .zip(&tape.input_pre)
            .map(|(d, &v)| d * elu_grad(v))
            .collect();
        self.input.backward(p, plan, &tape.features, &tape.input_tape, &dpre, grads);
        Ok(())
    }
}

impl Parameterized for GraphValueNet {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}
