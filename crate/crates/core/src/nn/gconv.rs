//! Spatial graph convolution.
//!
//! The fast path computes `sum_p M_p (W_p X)` with one stacked GEMM for all
//! partitions followed by sparse node mixing. The reference path evaluates the
//! per-vertex sum directly and exists to check the fast path.

use super::real::{gemm, MatRef};
use super::{NetError, Real, Tensor3};
use crate::graph::{NormalizedAdjacency, PartitionLabels};

/// Per-partition weights stacked as `(P, C_out, C_in)`, plus optional bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConvParams<R> {
    pub c_in: usize,
    pub c_out: usize,
    pub partitions: usize,
    pub weight: Vec<R>,
    pub bias: Option<Vec<R>>,
}

impl<R: Real> GraphConvParams<R> {
    pub fn zeros(c_in: usize, c_out: usize, partitions: usize, bias: bool) -> Self {
        GraphConvParams {
            c_in,
            c_out,
            partitions,
            weight: vec![R::zero(); partitions * c_out * c_in],
            bias: bias.then(|| vec![R::zero(); c_out]),
        }
    }

    pub fn w(&self, p: usize, o: usize, c: usize) -> R {
        self.weight[(p * self.c_out + o) * self.c_in + c]
    }

    pub fn w_mut(&mut self, p: usize, o: usize, c: usize) -> &mut R {
        &mut self.weight[(p * self.c_out + o) * self.c_in + c]
    }
}

/// Sparse rows of one normalized adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseMix<R> {
    rows: Vec<Vec<(usize, R)>>,
}

impl<R: Real> SparseMix<R> {
    pub(crate) fn from_dense(nodes: usize, m: &[f64]) -> Self {
        let rows = (0..nodes)
            .map(|i| {
                (0..nodes)
                    .filter(|&j| m[i * nodes + j] != 0.0)
                    .map(|j| (j, R::of(m[i * nodes + j])))
                    .collect()
            })
            .collect();
        SparseMix { rows }
    }

    pub(crate) fn stack(norm: &NormalizedAdjacency) -> Vec<Self> {
        (0..norm.partitions())
            .map(|p| SparseMix::from_dense(norm.nodes(), norm.matrix(p)))
            .collect()
    }

    /// `out[c, i, :] += sum_j M[i, j] x[c, j, :]` for `channels` channels.
    fn apply_add(&self, x: &[R], channels: usize, t: usize, out: &mut [R]) {
        let j = self.rows.len();
        for c in 0..channels {
            let base = c * j * t;
            for (i, row) in self.rows.iter().enumerate() {
                let dst = base + i * t;
                for &(src_j, w) in row {
                    let src = base + src_j * t;
                    for k in 0..t {
                        out[dst + k] += w * x[src + k];
                    }
                }
            }
        }
    }

    /// `out[c, j, :] += sum_i M[i, j] y[c, i, :]`.
    fn apply_transpose_add(&self, y: &[R], channels: usize, t: usize, out: &mut [R]) {
        let j = self.rows.len();
        for c in 0..channels {
            let base = c * j * t;
            for (i, row) in self.rows.iter().enumerate() {
                let src = base + i * t;
                for &(dst_j, w) in row {
                    let dst = base + dst_j * t;
                    for k in 0..t {
                        out[dst + k] += w * y[src + k];
                    }
                }
            }
        }
    }
}

fn check_shapes<R: Real>(x: &Tensor3<R>, params: &GraphConvParams<R>, nodes: usize, partitions: usize) -> Result<(), NetError> {
    if x.c != params.c_in {
        return Err(NetError::ShapeMismatch(format!(
            "graph conv expects {} input channels, got {}",
            params.c_in, x.c
        )));
    }
    if x.j != nodes {
        return Err(NetError::ShapeMismatch(format!("input has {} nodes, graph has {nodes}", x.j)));
    }
    if params.partitions != partitions {
        return Err(NetError::PartitionMismatch {
            weights: params.partitions,
            graph: partitions,
        });
    }
    Ok(())
}

pub(crate) fn gconv_forward<R: Real>(x: &Tensor3<R>, params: &GraphConvParams<R>, mix: &[SparseMix<R>]) -> Tensor3<R> {
    let (c_out, jt) = (params.c_out, x.j * x.t);
    let mut stacked = vec![R::zero(); params.partitions * c_out * jt];
    gemm(
        MatRef::new(&params.weight, params.partitions * c_out, params.c_in),
        MatRef::new(&x.data, x.c, jt),
        R::zero(),
        &mut stacked,
    );
    let mut out = Tensor3::zeros(c_out, x.j, x.t);
    for (p, m) in mix.iter().enumerate() {
        m.apply_add(&stacked[p * c_out * jt..(p + 1) * c_out * jt], c_out, x.t, &mut out.data);
    }
    if let Some(b) = &params.bias {
        for (o, &bo) in b.iter().enumerate() {
            out.data[o * jt..(o + 1) * jt].iter_mut().for_each(|v| *v += bo);
        }
    }
    out
}

/// Gradients of the graph convolution given the upstream gradient `d_out`.
/// Returns `(d_weight, d_bias, d_input)`.
pub(crate) fn gconv_backward<R: Real>(
    x: &Tensor3<R>,
    params: &GraphConvParams<R>,
    mix: &[SparseMix<R>],
    d_out: &[R],
) -> (Vec<R>, Option<Vec<R>>, Vec<R>) {
    let (c_out, jt) = (params.c_out, x.j * x.t);
    let mut d_stacked = vec![R::zero(); params.partitions * c_out * jt];
    for (p, m) in mix.iter().enumerate() {
        m.apply_transpose_add(d_out, c_out, x.t, &mut d_stacked[p * c_out * jt..(p + 1) * c_out * jt]);
    }
    let mut d_weight = vec![R::zero(); params.weight.len()];
    gemm(
        MatRef::new(&d_stacked, params.partitions * c_out, jt),
        MatRef::new(&x.data, x.c, jt).t(),
        R::zero(),
        &mut d_weight,
    );
    let mut d_x = vec![R::zero(); x.data.len()];
    gemm(
        MatRef::new(&params.weight, params.partitions * c_out, params.c_in).t(),
        MatRef::new(&d_stacked, params.partitions * c_out, jt),
        R::zero(),
        &mut d_x,
    );
    let d_bias = params
        .bias
        .as_ref()
        .map(|_| (0..c_out).map(|o| d_out[o * jt..(o + 1) * jt].iter().copied().sum()).collect());
    (d_weight, d_bias, d_x)
}

/// Matrix-form graph convolution: `f_out = sum_p N_p f_in W_p`, contracted
/// over the node axis at every time step.
pub fn graph_conv<R: Real>(
    f_in: &Tensor3<R>,
    params: &GraphConvParams<R>,
    norm: &NormalizedAdjacency,
) -> Result<Tensor3<R>, NetError> {
    check_shapes(f_in, params, norm.nodes(), norm.partitions())?;
    Ok(gconv_forward(f_in, params, &SparseMix::stack(norm)))
}

/// Per-pair normalization used by [`graph_conv_reference`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceNorm {
    /// `1 / Z_ij`, the size of `j`'s label subset within `B_i`.
    Cardinality,
    /// `1 / sqrt(|B_i| |B_j|)`, the symmetric degree weighting of the matrix form.
    Degree,
}

/// Direct per-vertex evaluation:
/// `f_out(i, t) = sum_{j in B_i} norm(i, j) * W_{l(i,j)} f_in(j, t)`.
pub fn graph_conv_reference<R: Real>(
    f_in: &Tensor3<R>,
    params: &GraphConvParams<R>,
    labels: &PartitionLabels,
    cardinality: &[Vec<usize>],
    norm: ReferenceNorm,
) -> Result<Tensor3<R>, NetError> {
    check_shapes(f_in, params, labels.nodes(), labels.partitions())?;
    let n = labels.nodes();
    let area: Vec<usize> = cardinality.iter().map(|z| z.iter().sum()).collect();
    let mut out = Tensor3::zeros(params.c_out, n, f_in.t);
    for i in 0..n {
        for t in 0..f_in.t {
            for o in 0..params.c_out {
                let mut acc = params.bias.as_ref().map_or(R::zero(), |b| b[o]);
                for j in 0..n {
                    let Some(l) = labels.label(i, j) else { continue };
                    let scale = match norm {
                        ReferenceNorm::Cardinality => 1.0 / cardinality[i][l] as f64,
                        ReferenceNorm::Degree => 1.0 / ((area[i] * area[j]) as f64).sqrt(),
                    };
                    let mut dot = R::zero();
                    for c in 0..params.c_in {
                        dot += params.w(l, o, c) * f_in.at(c, j, t);
                    }
                    acc += R::of(scale) * dot;
                }
                out.set(o, i, t, acc);
            }
        }
    }
    Ok(out)
}
