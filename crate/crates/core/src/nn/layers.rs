//! Layer primitives. Each layer is a view into a flat parameter slice at a
//! fixed offset; activations are row-major `rows × width` matrices.

use rand::Rng;

use super::glorot_uniform;
use super::linalg::gemm;
use crate::geom::ShapeGraph;

/// Hands out consecutive parameter ranges while a network is assembled.
#[derive(Debug, Default)]
pub struct ParamAlloc {
    next: usize,
}

impl ParamAlloc {
    pub fn take(&mut self, len: usize) -> usize {
        let at = self.next;
        self.next += len;
        at
    }

    pub fn total(&self) -> usize {
        self.next
    }
}

/// Fully-connected layer: weights `input × output` row-major, then biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    offset: usize,
}

impl Dense {
    pub fn new(input: usize, output: usize, alloc: &mut ParamAlloc) -> Self {
        let offset = alloc.take(input * output + output);
        Self { input, output, offset }
    }

    pub fn param_len(&self) -> usize {
        self.input * self.output + self.output
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let w_len = self.input * self.output;
        let p = &p[self.offset..self.offset + self.param_len()];
        p.split_at(w_len)
    }

    fn split_mut<'a>(&self, p: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64]) {
        let w_len = self.input * self.output;
        let p = &mut p[self.offset..self.offset + self.param_len()];
        p.split_at_mut(w_len)
    }

    pub fn init(&self, rng: &mut impl Rng, p: &mut [f64]) {
        let (w, b) = self.split_mut(p);
        glorot_uniform(rng, w, self.input, self.output);
        b.fill(0.0);
    }

    pub fn forward(&self, p: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
        let (w, b) = self.split(p);
        let mut y: Vec<f64> = b.iter().copied().cycle().take(rows * self.output).collect();
        gemm(rows, self.input, self.output, x, false, w, false, 1.0, &mut y);
        y
    }

    /// Accumulates parameter gradients into `g` and returns `dL/dx`.
    pub fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], rows: usize, g: &mut [f64]) -> Vec<f64> {
        let (w, _) = self.split(p);
        {
            let (gw, gb) = self.split_mut(g);
            gemm(self.input, rows, self.output, x, true, dy, false, 1.0, gw);
            for row in dy.chunks_exact(self.output) {
                for (acc, d) in gb.iter_mut().zip(row) {
                    *acc += d;
                }
            }
        }
        let mut dx = vec![0.0; rows * self.input];
        gemm(rows, self.output, self.input, dy, false, w, true, 0.0, &mut dx);
        dx
    }
}

/// Precomputed message-passing schedule for one graph: for every directed
/// edge, the nonzero B-spline basis weights (already divided by the target
/// node's in-degree).
#[derive(Clone, Debug, PartialEq)]
pub struct MessagePlan {
    pub nodes: usize,
    pub kernel_size: usize,
    /// `(target, source, kernel index, weight)`.
    pub entries: Vec<(usize, usize, usize, f64)>,
}

impl MessagePlan {
    pub fn new(graph: &ShapeGraph, kernel_size: usize) -> Self {
        assert!(kernel_size >= 2);
        let nodes = graph.node_count();
        let mut degree = vec![0usize; nodes];
        for &(_, t) in &graph.directed {
            degree[t] += 1;
        }
        let k = kernel_size;
        let mut entries = Vec::with_capacity(graph.directed.len() * 4);
        for (&(s, t), attr) in graph.directed.iter().zip(&graph.edge_attrs) {
            let inv_deg = 1.0 / degree[t] as f64;
            let (iu, fu) = open_spline_cell(attr[0], k);
            let (iv, fv) = open_spline_cell(attr[1], k);
            for (du, wu) in [(0, 1.0 - fu), (1, fu)] {
                for (dv, wv) in [(0, 1.0 - fv), (1, fv)] {
                    let w = wu * wv;
                    if w != 0.0 {
                        entries.push((t, s, (iu + du) * k + (iv + dv), w * inv_deg));
                    }
                }
            }
        }
        Self {
            nodes,
            kernel_size,
            entries,
        }
    }

    /// Kernel slots including the root weight, which sits last.
    pub fn slots(&self) -> usize {
        self.kernel_size * self.kernel_size + 1
    }
}

/// Lower control-point index and fractional offset of a degree-1 open
/// B-spline with `k` control points over `[0, 1]`.
fn open_spline_cell(attr: f64, k: usize) -> (usize, f64) {
    let pos = attr.clamp(0.0, 1.0) * (k - 1) as f64;
    let i = (pos.floor() as usize).min(k - 2);
    (i, pos - i as f64)
}

/// Edge-conditioned graph convolution with a degree-1 B-spline kernel:
///
/// `y_i = b + W_root x_i + mean_{j→i} Σ_k B_k(e_ji) W_k x_j`
///
/// Weights are stored `input × (slots · output)` so that every kernel
/// product comes out of one matrix multiply.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineConv {
    pub input: usize,
    pub output: usize,
    pub slots: usize,
    offset: usize,
}

impl SplineConv {
    pub fn new(input: usize, output: usize, kernel_size: usize, alloc: &mut ParamAlloc) -> Self {
        let slots = kernel_size * kernel_size + 1;
        let offset = alloc.take(input * slots * output + output);
        Self {
            input,
            output,
            slots,
            offset,
        }
    }

    pub fn param_len(&self) -> usize {
        self.input * self.slots * self.output + self.output
    }

    fn w_len(&self) -> usize {
        self.input * self.slots * self.output
    }

    pub fn init(&self, rng: &mut impl Rng, p: &mut [f64]) {
        let p = &mut p[self.offset..self.offset + self.param_len()];
        let (w, b) = p.split_at_mut(self.w_len());
        glorot_uniform(rng, w, self.input, self.output);
        b.fill(0.0);
    }

    pub fn forward(&self, p: &[f64], plan: &MessagePlan, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(plan.slots(), self.slots);
        let n = plan.nodes;
        let (co, wide) = (self.output, self.slots * self.output);
        let p = &p[self.offset..self.offset + self.param_len()];
        let (w, b) = p.split_at(self.w_len());
        let mut kx = vec![0.0; n * wide];
        gemm(n, self.input, wide, x, false, w, false, 0.0, &mut kx);
        let root = (self.slots - 1) * co;
        let mut y = Vec::with_capacity(n * co);
        for i in 0..n {
            let r = &kx[i * wide + root..i * wide + root + co];
            y.extend(b.iter().zip(r).map(|(b, r)| b + r));
        }
        for &(t, s, k, wgt) in &plan.entries {
            let src = &kx[s * wide + k * co..s * wide + (k + 1) * co];
            for (acc, v) in y[t * co..(t + 1) * co].iter_mut().zip(src) {
                *acc += wgt * v;
            }
        }
        y
    }

    pub fn backward(&self, p: &[f64], plan: &MessagePlan, x: &[f64], dy: &[f64], g: &mut [f64]) -> Vec<f64> {
        let n = plan.nodes;
        let (co, wide) = (self.output, self.slots * self.output);
        let root = (self.slots - 1) * co;
        let mut dkx = vec![0.0; n * wide];
        for i in 0..n {
            dkx[i * wide + root..i * wide + root + co].copy_from_slice(&dy[i * co..(i + 1) * co]);
        }
        for &(t, s, k, wgt) in &plan.entries {
            let d = &dy[t * co..(t + 1) * co];
            for (acc, v) in dkx[s * wide + k * co..s * wide + (k + 1) * co].iter_mut().zip(d) {
                *acc += wgt * v;
            }
        }
        let w_len = self.w_len();
        {
            let g = &mut g[self.offset..self.offset + self.param_len()];
            let (gw, gb) = g.split_at_mut(w_len);
            gemm(self.input, n, wide, x, true, &dkx, false, 1.0, gw);
            for row in dy.chunks_exact(co) {
                for (acc, d) in gb.iter_mut().zip(row) {
                    *acc += d;
                }
            }
        }
        let w = &p[self.offset..self.offset + w_len];
        let mut dx = vec![0.0; n * self.input];
        gemm(n, wide, self.input, &dkx, false, w, true, 0.0, &mut dx);
        dx
    }
}

pub const NORM_EPS: f64 = 1e-5;

/// Feature normalization over the nodes of one graph, with learned
/// per-channel scale and shift (`γ` then `β` in the parameter slice).
#[derive(Clone, Debug, PartialEq)]
pub struct GraphNorm {
    pub width: usize,
    offset: usize,
}

#[derive(Clone, Debug)]
pub struct NormTape {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl GraphNorm {
    pub fn new(width: usize, alloc: &mut ParamAlloc) -> Self {
        let offset = alloc.take(2 * width);
        Self { width, offset }
    }

    pub fn param_len(&self) -> usize {
        2 * self.width
    }

    pub fn init(&self, p: &mut [f64]) {
        let (gamma, beta) = p[self.offset..self.offset + 2 * self.width].split_at_mut(self.width);
        gamma.fill(1.0);
        beta.fill(0.0);
    }

    pub fn forward(&self, p: &[f64], x: &[f64], rows: usize) -> (Vec<f64>, NormTape) {
        let c = self.width;
        let (gamma, beta) = p[self.offset..self.offset + 2 * c].split_at(c);
        let inv_n = 1.0 / rows as f64;
        let mut mean = vec![0.0; c];
        for row in x.chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_n);
        let mut var = vec![0.0; c];
        for row in x.chunks_exact(c) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|s| 1.0 / (s * inv_n + NORM_EPS).sqrt()).collect();
        let mut xhat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for row in x.chunks_exact(c) {
            for o in 0..c {
                let h = (row[o] - mean[o]) * inv_std[o];
                xhat.push(h);
                y.push(gamma[o] * h + beta[o]);
            }
        }
        (y, NormTape { xhat, inv_std })
    }

    pub fn backward(&self, p: &[f64], tape: &NormTape, dy: &[f64], rows: usize, g: &mut [f64]) -> Vec<f64> {
        let c = self.width;
        let gamma = &p[self.offset..self.offset + c];
        let mut sum_d = vec![0.0; c];
        let mut sum_dh = vec![0.0; c];
        {
            let (gg, gb) = g[self.offset..self.offset + 2 * c].split_at_mut(c);
            for (drow, hrow) in dy.chunks_exact(c).zip(tape.xhat.chunks_exact(c)) {
                for o in 0..c {
                    gg[o] += drow[o] * hrow[o];
                    gb[o] += drow[o];
                    let dh = drow[o] * gamma[o];
                    sum_d[o] += dh;
                    sum_dh[o] += dh * hrow[o];
                }
            }
        }
        let inv_n = 1.0 / rows as f64;
        let mut dx = Vec::with_capacity(dy.len());
        for (drow, hrow) in dy.chunks_exact(c).zip(tape.xhat.chunks_exact(c)) {
            for o in 0..c {
                let dh = drow[o] * gamma[o];
                dx.push(tape.inv_std[o] * (dh - inv_n * sum_d[o] - hrow[o] * inv_n * sum_dh[o]));
            }
        }
        dx
    }
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of ELU expressed through its input.
pub fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Graph convolution followed by normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNorm {
    pub conv: SplineConv,
    pub norm: GraphNorm,
}

#[derive(Clone, Debug)]
pub struct ConvNormTape {
    norm: NormTape,
}

impl ConvNorm {
    pub fn new(input: usize, output: usize, kernel_size: usize, alloc: &mut ParamAlloc) -> Self {
        Self {
            conv: SplineConv::new(input, output, kernel_size, alloc),
            norm: GraphNorm::new(output, alloc),
        }
    }

    pub fn init(&self, rng: &mut impl Rng, p: &mut [f64]) {
        self.conv.init(rng, p);
        self.norm.init(p);
    }

    pub fn forward(&self, p: &[f64], plan: &MessagePlan, x: &[f64]) -> (Vec<f64>, ConvNormTape) {
        let c = self.conv.forward(p, plan, x);
        let (y, norm) = self.norm.forward(p, &c, plan.nodes);
        (y, ConvNormTape { norm })
    }

    pub fn backward(
        &self,
        p: &[f64],
        plan: &MessagePlan,
        x: &[f64],
        tape: &ConvNormTape,
        dy: &[f64],
        g: &mut [f64],
    ) -> Vec<f64> {
        let dc = self.norm.backward(p, &tape.norm, dy, plan.nodes, g);
        self.conv.backward(p, plan, x, &dc, g)
    }
}

/// `ELU(norm(conv(ELU(norm(conv(x))))) + skip(x))`, where the skip path is a
/// normalized convolution when the width changes and the identity otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock {
    pub input: usize,
    pub output: usize,
    first: ConvNorm,
    second: ConvNorm,
    skip: Option<ConvNorm>,
}

#[derive(Clone, Debug)]
pub struct BlockTape {
    first: ConvNormTape,
    first_pre: Vec<f64>,
    hidden: Vec<f64>,
    second: ConvNormTape,
    skip: Option<ConvNormTape>,
    sum: Vec<f64>,
}

impl ResidualBlock {
    pub fn new(input: usize, output: usize, kernel_size: usize, alloc: &mut ParamAlloc) -> Self {
        let first = ConvNorm::new(input, output, kernel_size, alloc);
        let second = ConvNorm::new(output, output, kernel_size, alloc);
        let skip = (input != output).then(|| ConvNorm::new(input, output, kernel_size, alloc));
        Self {
            input,
            output,
            first,
            second,
            skip,
        }
    }

    pub fn init(&self, rng: &mut impl Rng, p: &mut [f64]) {
        self.first.init(rng, p);
        self.second.init(rng, p);
        if let Some(s) = &self.skip {
            s.init(rng, p);
        }
    }

    pub fn forward(&self, p: &[f64], plan: &MessagePlan, x: &[f64]) -> (Vec<f64>, BlockTape) {
        let (first_pre, first) = self.first.forward(p, plan, x);
        let hidden: Vec<f64> = first_pre.iter().map(|&v| elu(v)).collect();
        let (mut sum, second) = self.second.forward(p, plan, &hidden);
        let skip = match &self.skip {
            Some(s) => {
                let (sy, st) = s.forward(p, plan, x);
                sum.iter_mut().zip(&sy).for_each(|(a, b)| *a += b);
                Some(st)
            }
            None => {
                sum.iter_mut().zip(x).for_each(|(a, b)| *a += b);
                None
            }
        };
        let y = sum.iter().map(|&v| elu(v)).collect();
        (
            y,
            BlockTape {
                first,
                first_pre,
                hidden,
                second,
                skip,
                sum,
            },
        )
    }

    pub fn backward(
        &self,
        p: &[f64],
        plan: &MessagePlan,
        x: &[f64],
        tape: &BlockTape,
        dy: &[f64],
        g: &mut [f64],
    ) -> Vec<f64> {
        let dsum: Vec<f64> = dy.iter().zip(&tape.sum).map(|(d, &s)| d * elu_grad(s)).collect();
        let dhidden = self.second.backward(p, plan, &tape.hidden, &tape.second, &dsum, g);
        let dfirst: Vec<f64> = dhidden
            .iter()
            .zip(&tape.first_pre)
            .map(|(d, &v)| d * elu_grad(v))
            .collect();
        let mut dx = self.first.backward(p, plan, x, &tape.first, &dfirst, g);
        match (&self.skip, &tape.skip) {
            (Some(s), Some(st)) => {
                let ds = s.backward(p, plan, x, st, &dsum, g);
                dx.iter_mut().zip(&ds).for_each(|(a, b)| *a += b);
            }
            _ => dx.iter_mut().zip(&dsum).for_each(|(a, b)| *a += b),
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{triangulate, Point, RectilinearPolygon};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn l_graph(h: f64) -> ShapeGraph {
        let l = RectilinearPolygon::new(
            "L",
            [(0., 0.), (2., 0.), (2., 1.), (1., 1.), (1., 2.), (0., 2.)]
                .iter()
                .map(|&(x, y)| Point::new(x, y))
                .collect(),
        )
        .unwrap();
        triangulate(&l, h).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Checks `loss = Σ r ⊙ f(p, x)` against central differences on a
    /// sample of parameters and inputs.
    fn check<F, B>(p: &mut [f64], x: &mut [f64], out_len: usize, f: F, b: B, rng: &mut ChaCha8Rng)
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64>,
        B: Fn(&[f64], &[f64], &[f64], &mut [f64]) -> Vec<f64>,
    {
        let r = random_vec(rng, out_len);
        let loss = |p: &[f64], x: &[f64]| f(p, x).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let mut g = vec![0.0; p.len()];
        let dx = b(p, x, &r, &mut g);
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        for _ in 0..25 {
            let i = rng.gen_range(0..p.len());
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(p, x);
            p[i] = orig - h;
            let down = loss(p, x);
            p[i] = orig;
            let num = (up - down) / (2.0 * h);
            assert!(rel(g[i], num) < 1e-4, "param {i}: {} vs {num}", g[i]);
        }
        for _ in 0..10 {
            let i = rng.gen_range(0..x.len());
            let orig = x[i];
            x[i] = orig + h;
            let up = loss(p, x);
            x[i] = orig - h;
            let down = loss(p, x);
            x[i] = orig;
            let num = (up - down) / (2.0 * h);
            assert!(rel(dx[i], num) < 1e-4, "input {i}: {} vs {num}", dx[i]);
        }
    }

    #[test]
    fn dense_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut alloc = ParamAlloc::default();
        let layer = Dense::new(5, 3, &mut alloc);
        let mut p = random_vec(&mut rng, alloc.total());
        let mut x = random_vec(&mut rng, 4 * 5);
        check(
            &mut p,
            &mut x,
            12,
            |p, x| layer.forward(p, x, 4),
            |p, x, dy, g| layer.backward(p, x, dy, 4, g),
            &mut rng,
        );
    }

    #[test]
    fn spline_conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let graph = l_graph(0.5);
        let plan = MessagePlan::new(&graph, 5);
        let mut alloc = ParamAlloc::default();
        let layer = SplineConv::new(3, 4, 5, &mut alloc);
        let mut p = random_vec(&mut rng, alloc.total());
        let mut x = random_vec(&mut rng, plan.nodes * 3);
        check(
            &mut p,
            &mut x,
            plan.nodes * 4,
            |p, x| layer.forward(p, &plan, x),
            |p, x, dy, g| layer.backward(p, &plan, x, dy, g),
            &mut rng,
        );
    }

    #[test]
    fn norm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut alloc = ParamAlloc::default();
        let layer = GraphNorm::new(3, &mut alloc);
        let mut p = random_vec(&mut rng, alloc.total());
        let mut x = random_vec(&mut rng, 7 * 3);
        check(
            &mut p,
            &mut x,
            21,
            |p, x| layer.forward(p, x, 7).0,
            |p, x, dy, g| {
                let (_, t) = layer.forward(p, x, 7);
                layer.backward(p, &t, dy, 7, g)
            },
            &mut rng,
        );
    }

    #[test]
    fn residual_block_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let graph = l_graph(1.0);
        let plan = MessagePlan::new(&graph, 5);
        for (ci, co) in [(3, 4), (4, 4)] {
            let mut alloc = ParamAlloc::default();
            let block = ResidualBlock::new(ci, co, 5, &mut alloc);
            let mut p = random_vec(&mut rng, alloc.total());
            let mut x = random_vec(&mut rng, plan.nodes * ci);
            check(
                &mut p,
                &mut x,
                plan.nodes * co,
                |p, x| block.forward(p, &plan, x).0,
                |p, x, dy, g| {
                    let (_, t) = block.forward(p, &plan, x);
                    block.backward(p, &plan, x, &t, dy, g)
                },
                &mut rng,
            );
        }
    }

    #[test]
    fn basis_weights_sum_to_one_per_edge() {
        let graph = l_graph(0.5);
        let plan = MessagePlan::new(&graph, 5);
        let mut per_target = vec![0.0; plan.nodes];
        for &(t, _, k, w) in &plan.entries {
            assert!(k < 25);
            per_target[t] += w;
        }
        for s in per_target {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_cell_edges() {
        assert_eq!(open_spline_cell(0.0, 5), (0, 0.0));
        assert_eq!(open_spline_cell(1.0, 5), (3, 1.0));
        assert_eq!(open_spline_cell(0.5, 5), (2, 0.0));
        assert_eq!(open_spline_cell(0.6, 5).0, 2);
    }

    #[test]
    fn elu_is_continuous_at_zero() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu_grad(0.0), 1.0);
        assert!((elu(-1.0) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
    }
}
