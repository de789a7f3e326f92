//! Stacked spatio-temporal blocks with a pooled linear classifier, plus the
//! recorded forward pass ([`Tape`]) and its exact reverse pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gconv::{gconv_backward, gconv_forward, SparseMix};
use super::loss::{cross_entropy, cross_entropy_grad};
use super::tconv::{tconv_backward, tconv_forward};
use super::{GraphConvParams, NetError, Real, TemporalConvParams, Tensor3};
use crate::graph::{normalize_adjacency, NormalizedAdjacency, PartitionLabels, SpatialGraph};

/// Network shape. Block `i` maps `widths[i-1]` (or `in_channels`) channels to
/// `widths[i]` with temporal stride `strides[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub in_channels: usize,
    pub widths: Vec<usize>,
    pub strides: Vec<usize>,
    pub kernel: usize,
    pub num_classes: usize,
    /// Add the block input to its output when the shapes agree.
    pub residual: bool,
    pub bias: bool,
}

impl Architecture {
    pub fn new(in_channels: usize, num_classes: usize) -> Self {
        Architecture {
            in_channels,
            widths: vec![64, 128, 256],
            strides: vec![1, 2, 2],
            kernel: 5,
            num_classes,
            residual: true,
            bias: true,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Architecture(m));
        if self.widths.is_empty() {
            return bad("at least one block is required".into());
        }
        if self.widths.len() != self.strides.len() {
            return bad(format!("{} widths but {} strides", self.widths.len(), self.strides.len()));
        }
        if self.kernel % 2 == 0 {
            return bad(format!("temporal kernel {} must be odd", self.kernel));
        }
        if self.in_channels == 0 || self.widths.contains(&0) {
            return bad("channel counts must be positive".into());
        }
        if self.strides.contains(&0) {
            return bad("strides must be at least 1".into());
        }
        if self.num_classes == 0 {
            return bad("need at least one class".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StBlock<R> {
    pub gconv: GraphConvParams<R>,
    pub tconv: TemporalConvParams<R>,
    pub residual: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<R> {
    arch: Architecture,
    graph: SpatialGraph,
    labels: PartitionLabels,
    adjacency: NormalizedAdjacency,
    mix: Vec<SparseMix<R>>,
    /// Fixed per-(channel, node) standardization applied to the input:
    /// `(x - shift) * scale`. Identity until [`Model::fit_input_norm`].
    pub input_shift: Vec<R>,
    pub input_scale: Vec<R>,
    pub blocks: Vec<StBlock<R>>,
    /// `(num_classes, C_last)` row-major.
    pub classifier_weight: Vec<R>,
    pub classifier_bias: Vec<R>,
}

/// Per-parameter-tensor gradients, in [`Model::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<R> {
    pub tensors: Vec<Vec<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn zeros_like(model: &Model<R>) -> Self {
        Gradients {
            tensors: model.params().iter().map(|(_, p)| vec![R::zero(); p.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: R) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

#[derive(Debug, Clone)]
struct BlockTape<R> {
    input: Tensor3<R>,
    /// Graph-conv output before the ReLU.
    pre_spatial: Vec<R>,
    spatial_shape: (usize, usize, usize),
    col: Vec<R>,
    /// Block output before the final ReLU.
    pre_out: Vec<R>,
    residual: bool,
}

/// Forward values recorded for one input.
#[derive(Debug, Clone)]
pub struct Tape<R> {
    blocks: Vec<BlockTape<R>>,
    final_shape: (usize, usize, usize),
    pooled: Vec<R>,
    pub logits: Vec<R>,
}

fn relu_inplace<R: Real>(v: &mut [R]) {
    for x in v {
        if *x < R::zero() {
            *x = R::zero();
        }
    }
}

fn relu_mask<R: Real>(grad: &mut [R], pre: &[R]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= R::zero() {
            *g = R::zero();
        }
    }
}

fn uniform_init<R: Real>(rng: &mut ChaCha8Rng, len: usize, fan_in: usize, fan_out: usize) -> Vec<R> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| R::of(rng.gen_range(-bound..bound))).collect()
}

impl<R: Real> Model<R> {
    /// All-zero parameters with the given shape.
    pub fn zeros(arch: Architecture, graph: SpatialGraph, labels: PartitionLabels) -> Result<Self, NetError> {
        arch.validate()?;
        if graph.nodes() != labels.nodes() {
            return Err(NetError::ShapeMismatch(format!(
                "graph has {} nodes, labels {}",
                graph.nodes(),
                labels.nodes()
            )));
        }
        let adjacency = normalize_adjacency(&graph, &labels);
        let mix = SparseMix::stack(&adjacency);
        let p = labels.partitions();
        let mut c_in = arch.in_channels;
        let blocks = arch
            .widths
            .iter()
            .zip(&arch.strides)
            .map(|(&c_out, &stride)| {
                let block = StBlock {
                    gconv: GraphConvParams::zeros(c_in, c_out, p, arch.bias),
                    tconv: TemporalConvParams::zeros(c_out, c_out, arch.kernel, stride, arch.bias),
                    residual: arch.residual && c_in == c_out && stride == 1,
                };
                c_in = c_out;
                block
            })
            .collect();
        let cj = arch.in_channels * graph.nodes();
        Ok(Model {
            input_shift: vec![R::zero(); cj],
            input_scale: vec![R::one(); cj],
            classifier_weight: vec![R::zero(); arch.num_classes * c_in],
            classifier_bias: vec![R::zero(); arch.num_classes],
            arch,
            graph,
            labels,
            adjacency,
            mix,
            blocks,
        })
    }

    /// Seeded uniform initialization in `±sqrt(6 / (fan_in + fan_out))` per
    /// weight matrix; biases start at zero.
    pub fn init(arch: Architecture, graph: SpatialGraph, labels: PartitionLabels, seed: u64) -> Result<Self, NetError> {
        let mut model = Model::zeros(arch, graph, labels)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in &mut model.blocks {
            let g = &mut b.gconv;
            g.weight = uniform_init(&mut rng, g.weight.len(), g.c_in, g.c_out);
            let t = &mut b.tconv;
            t.weight = uniform_init(&mut rng, t.weight.len(), t.c_in * t.kernel, t.c_out);
        }
        let c_last = model.last_width();
        model.classifier_weight = uniform_init(&mut rng, model.classifier_weight.len(), c_last, model.arch.num_classes);
        Ok(model)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn graph(&self) -> &SpatialGraph {
        &self.graph
    }

    pub fn labels(&self) -> &PartitionLabels {
        &self.labels
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adjacency
    }

    pub fn nodes(&self) -> usize {
        self.graph.nodes()
    }

    fn last_width(&self) -> usize {
        *self.arch.widths.last().unwrap()
    }

    /// Named parameter tensors in declaration order.
    pub fn params(&self) -> Vec<(String, &[R])> {
        let mut out: Vec<(String, &[R])> = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.gconv.weight"), &b.gconv.weight));
            if let Some(bias) = &b.gconv.bias {
                out.push((format!("block{i}.gconv.bias"), bias));
            }
            out.push((format!("block{i}.tconv.weight"), &b.tconv.weight));
            if let Some(bias) = &b.tconv.bias {
                out.push((format!("block{i}.tconv.bias"), bias));
            }
        }
        out.push(("classifier.weight".into(), &self.classifier_weight));
        out.push(("classifier.bias".into(), &self.classifier_bias));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [R]> {
        let mut out: Vec<&mut [R]> = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.gconv.weight);
            if let Some(bias) = &mut b.gconv.bias {
                out.push(bias);
            }
            out.push(&mut b.tconv.weight);
            if let Some(bias) = &mut b.tconv.bias {
                out.push(bias);
            }
        }
        out.push(&mut self.classifier_weight);
        out.push(&mut self.classifier_bias);
        out
    }

    /// Non-trainable tensors stored with the parameters.
    pub fn buffers(&self) -> Vec<(String, &[R])> {
        vec![("input.shift".into(), &self.input_shift), ("input.scale".into(), &self.input_scale)]
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [R]> {
        vec![&mut self.input_shift, &mut self.input_scale]
    }

    /// Sets the input standardization to the per-(channel, node) mean and
    /// `1 / sqrt(var + 1e-5)` over all frames of `inputs`.
    pub fn fit_input_norm<'a>(&mut self, inputs: impl IntoIterator<Item = &'a Tensor3<R>>) -> Result<(), NetError>
    where
        R: 'a,
    {
        let cj = self.input_shift.len();
        let mut sum = vec![0.0f64; cj];
        let mut sq = vec![0.0f64; cj];
        let mut count = 0usize;
        for x in inputs {
            self.check_input(x)?;
            for (row, v) in x.data.chunks(x.t).enumerate() {
                for &e in v {
                    let e = e.as_f64();
                    sum[row] += e;
                    sq[row] += e * e;
                }
            }
            count += x.t;
        }
        if count == 0 {
            return Ok(());
        }
        let n = count as f64;
        for i in 0..cj {
            let mean = sum[i] / n;
            let var = (sq[i] / n - mean * mean).max(0.0);
            self.input_shift[i] = R::of(mean);
            self.input_scale[i] = R::of(1.0 / (var + 1e-5).sqrt());
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    fn check_input(&self, x: &Tensor3<R>) -> Result<(), NetError> {
        if x.c != self.arch.in_channels || x.j != self.nodes() || x.t == 0 {
            return Err(NetError::ShapeMismatch(format!(
                "input shape {:?}, model expects ({}, {}, T>0)",
                x.shape(),
                self.arch.in_channels,
                self.nodes()
            )));
        }
        Ok(())
    }

    /// Runs the network and records what the reverse pass needs.
    pub fn forward_tape(&self, x: &Tensor3<R>) -> Result<Tape<R>, NetError> {
        self.check_input(x)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for (row, v) in h.data.chunks_mut(x.t).enumerate() {
            let (m, s) = (self.input_shift[row], self.input_scale[row]);
            v.iter_mut().for_each(|e| *e = (*e - m) * s);
        }
        for b in &self.blocks {
            let g = gconv_forward(&h, &b.gconv, &self.mix);
            let pre_spatial = g.data.clone();
            let mut a = g;
            relu_inplace(&mut a.data);
            let spatial_shape = a.shape();
            let (mut u, col) = tconv_forward(&a, &b.tconv);
            if b.residual {
                for (v, &r) in u.data.iter_mut().zip(&h.data) {
                    *v += r;
                }
            }
            let pre_out = u.data.clone();
            relu_inplace(&mut u.data);
            blocks.push(BlockTape {
                input: h,
                pre_spatial,
                spatial_shape,
                col,
                pre_out,
                residual: b.residual,
            });
            h = u;
        }
        let area = R::of((h.j * h.t) as f64);
        let jt = h.j * h.t;
        let pooled: Vec<R> = (0..h.c)
            .map(|c| h.data[c * jt..(c + 1) * jt].iter().copied().sum::<R>() / area)
            .collect();
        let c_last = pooled.len();
        let logits = (0..self.arch.num_classes)
            .map(|k| {
                let row = &self.classifier_weight[k * c_last..(k + 1) * c_last];
                row.iter().zip(&pooled).map(|(&w, &p)| w * p).sum::<R>() + self.classifier_bias[k]
            })
            .collect();
        Ok(Tape {
            blocks,
            final_shape: h.shape(),
            pooled,
            logits,
        })
    }

    pub fn forward(&self, x: &Tensor3<R>) -> Result<Vec<R>, NetError> {
        Ok(self.forward_tape(x)?.logits)
    }

    /// Reverse pass from the loss gradient with respect to the logits.
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, tape: &Tape<R>, d_logits: &[R]) -> Result<(Gradients<R>, Tensor3<R>), NetError> {
        if tape.blocks.len() != self.blocks.len()
            || tape.logits.len() != self.arch.num_classes
            || d_logits.len() != self.arch.num_classes
            || tape.pooled.len() != self.last_width()
        {
            return Err(NetError::TapeIncomplete);
        }
        let c_last = tape.pooled.len();
        let mut d_cls_w = vec![R::zero(); self.classifier_weight.len()];
        let mut d_pooled = vec![R::zero(); c_last];
        for (k, &dl) in d_logits.iter().enumerate() {
            for c in 0..c_last {
                d_cls_w[k * c_last + c] = dl * tape.pooled[c];
                d_pooled[c] += dl * self.classifier_weight[k * c_last + c];
            }
        }
        let d_cls_b = d_logits.to_vec();

        let (c, j, t) = tape.final_shape;
        let area = R::of((j * t) as f64);
        let mut d_h: Vec<R> = (0..c)
            .flat_map(|ch| std::iter::repeat_n(d_pooled[ch] / area, j * t))
            .collect();

        let mut per_block: Vec<Vec<Vec<R>>> = Vec::with_capacity(self.blocks.len());
        for (b, bt) in self.blocks.iter().zip(&tape.blocks).rev() {
            if bt.pre_out.len() != d_h.len() || bt.residual != b.residual {
                return Err(NetError::TapeIncomplete);
            }
            relu_mask(&mut d_h, &bt.pre_out);
            let (d_tw, d_tb, mut d_a) = tconv_backward(&bt.col, bt.spatial_shape, &b.tconv, &d_h);
            relu_mask(&mut d_a, &bt.pre_spatial);
            let (d_gw, d_gb, mut d_x) = gconv_backward(&bt.input, &b.gconv, &self.mix, &d_a);
            if b.residual {
                for (dx, &dv) in d_x.iter_mut().zip(&d_h) {
                    *dx += dv;
                }
            }
            let mut grads = vec![d_gw];
            grads.extend(d_gb);
            grads.push(d_tw);
            grads.extend(d_tb);
            per_block.push(grads);
            d_h = d_x;
        }
        let mut tensors: Vec<Vec<R>> = per_block.into_iter().rev().flatten().collect();
        tensors.push(d_cls_w);
        tensors.push(d_cls_b);
        let input = &tape.blocks[0].input;
        for (row, v) in d_h.chunks_mut(input.t).enumerate() {
            let s = self.input_scale[row];
            v.iter_mut().for_each(|e| *e *= s);
        }
        let d_input = Tensor3::from_vec(input.c, input.j, input.t, d_h)?;
        Ok((Gradients { tensors }, d_input))
    }

    /// Cross-entropy loss, logits and parameter gradients for one sample.
    pub fn loss_and_gradients(&self, x: &Tensor3<R>, label: usize) -> Result<(R, Vec<R>, Gradients<R>), NetError> {
        let tape = self.forward_tape(x)?;
        let loss = cross_entropy(&tape.logits, label)?;
        let d_logits = cross_entropy_grad(&tape.logits, label)?;
        let (grads, _) = self.backward(&tape, &d_logits)?;
        Ok((loss, tape.logits, grads))
    }

    /// Same parameters with node `i` relabeled `perm[i]` in the graph.
    pub fn with_permuted_nodes(&self, perm: &[usize]) -> Result<Self, NetError> {
        let mut m = Model::zeros(self.arch.clone(), self.graph.permuted(perm), self.labels.permuted(perm))?;
        let (c, j) = (self.arch.in_channels, self.nodes());
        for ch in 0..c {
            for (i, &p) in perm.iter().enumerate() {
                m.input_shift[ch * j + p] = self.input_shift[ch * j + i];
                m.input_scale[ch * j + p] = self.input_scale[ch * j + i];
            }
        }
        m.blocks = self.blocks.clone();
        m.classifier_weight = self.classifier_weight.clone();
        m.classifier_bias = self.classifier_bias.clone();
        Ok(m)
    }

    /// Converts parameters to another precision.
    pub fn cast<S: Real>(&self) -> Model<S> {
        let conv = |v: &[R]| v.iter().map(|&x| S::of(x.as_f64())).collect::<Vec<S>>();
        let mut m = Model::<S>::zeros(self.arch.clone(), self.graph.clone(), self.labels.clone())
            .expect("architecture already validated");
        for (dst, (_, src)) in m.params_mut().into_iter().zip(self.params()) {
            dst.copy_from_slice(&conv(src));
        }
        for (dst, (_, src)) in m.buffers_mut().into_iter().zip(self.buffers()) {
            dst.copy_from_slice(&conv(src));
        }
        m
    }
}
