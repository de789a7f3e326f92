//! Temporal convolution along the frame axis, implemented as im2col + GEMM.

use super::real::{gemm, MatRef};
use super::{NetError, Real, Tensor3};

/// Kernel `(C_out, C_in, K)` with odd `K`, stride `s` and `K/2` zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConvParams<R> {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<R>,
    pub bias: Option<Vec<R>>,
}

impl<R: Real> TemporalConvParams<R> {
    pub fn zeros(c_in: usize, c_out: usize, kernel: usize, stride: usize, bias: bool) -> Self {
        TemporalConvParams {
            c_in,
            c_out,
            kernel,
            stride,
            weight: vec![R::zero(); c_out * c_in * kernel],
            bias: bias.then(|| vec![R::zero(); c_out]),
        }
    }

    pub fn w_mut(&mut self, o: usize, c: usize, k: usize) -> &mut R {
        &mut self.weight[(o * self.c_in + c) * self.kernel + k]
    }

    pub fn output_len(&self, t: usize) -> usize {
        t.div_ceil(self.stride)
    }

    fn validate(&self) -> Result<(), NetError> {
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(NetError::ShapeMismatch(format!("temporal kernel {} must be odd", self.kernel)));
        }
        if self.stride == 0 {
            return Err(NetError::ShapeMismatch("temporal stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Column matrix `(C_in * K) x (J * T')`.
fn im2col<R: Real>(x: &Tensor3<R>, params: &TemporalConvParams<R>, t_out: usize) -> Vec<R> {
    let k_len = params.kernel;
    let pad = k_len / 2;
    let cols = x.j * t_out;
    let mut col = vec![R::zero(); x.c * k_len * cols];
    for c in 0..x.c {
        for k in 0..k_len {
            let row = (c * k_len + k) * cols;
            for j in 0..x.j {
                let src = x.idx(c, j, 0);
                for tp in 0..t_out {
                    let ts = (tp * params.stride + k) as isize - pad as isize;
                    if ts >= 0 && (ts as usize) < x.t {
                        col[row + j * t_out + tp] = x.data[src + ts as usize];
                    }
                }
            }
        }
    }
    col
}

fn col2im<R: Real>(d_col: &[R], params: &TemporalConvParams<R>, shape: (usize, usize, usize), t_out: usize) -> Vec<R> {
    let (c_in, j_len, t_len) = shape;
    let k_len = params.kernel;
    let pad = k_len / 2;
    let cols = j_len * t_out;
    let mut d_x = vec![R::zero(); c_in * j_len * t_len];
    for c in 0..c_in {
        for k in 0..k_len {
            let row = (c * k_len + k) * cols;
            for j in 0..j_len {
                let dst = (c * j_len + j) * t_len;
                for tp in 0..t_out {
                    let ts = (tp * params.stride + k) as isize - pad as isize;
                    if ts >= 0 && (ts as usize) < t_len {
                        d_x[dst + ts as usize] += d_col[row + j * t_out + tp];
                    }
                }
            }
        }
    }
    d_x
}

/// Forward pass; also returns the column matrix needed for the backward pass.
pub(crate) fn tconv_forward<R: Real>(x: &Tensor3<R>, params: &TemporalConvParams<R>) -> (Tensor3<R>, Vec<R>) {
    let t_out = params.output_len(x.t);
    let col = im2col(x, params, t_out);
    let cols = x.j * t_out;
    let mut out = Tensor3::zeros(params.c_out, x.j, t_out);
    gemm(
        MatRef::new(&params.weight, params.c_out, params.c_in * params.kernel),
        MatRef::new(&col, params.c_in * params.kernel, cols),
        R::zero(),
        &mut out.data,
    );
    if let Some(b) = &params.bias {
        for (o, &bo) in b.iter().enumerate() {
            out.data[o * cols..(o + 1) * cols].iter_mut().for_each(|v| *v += bo);
        }
    }
    (out, col)
}

/// Returns `(d_weight, d_bias, d_input)`.
pub(crate) fn tconv_backward<R: Real>(
    col: &[R],
    input_shape: (usize, usize, usize),
    params: &TemporalConvParams<R>,
    d_out: &[R],
) -> (Vec<R>, Option<Vec<R>>, Vec<R>) {
    let t_out = params.output_len(input_shape.2);
    let cols = input_shape.1 * t_out;
    let rows = params.c_in * params.kernel;
    let mut d_weight = vec![R::zero(); params.weight.len()];
    gemm(
        MatRef::new(d_out, params.c_out, cols),
        MatRef::new(col, rows, cols).t(),
        R::zero(),
        &mut d_weight,
    );
    let mut d_col = vec![R::zero(); rows * cols];
    gemm(
        MatRef::new(&params.weight, params.c_out, rows).t(),
        MatRef::new(d_out, params.c_out, cols),
        R::zero(),
        &mut d_col,
    );
    let d_bias = params
        .bias
        .as_ref()
        .map(|_| (0..params.c_out).map(|o| d_out[o * cols..(o + 1) * cols].iter().copied().sum()).collect());
    (d_weight, d_bias, col2im(&d_col, params, input_shape, t_out))
}

/// 1-D convolution along T for every landmark, mixing channels through the
/// kernel. Output length is `ceil(T / stride)`.
pub fn temporal_conv<R: Real>(f: &Tensor3<R>, params: &TemporalConvParams<R>) -> Result<Tensor3<R>, NetError> {
    params.validate()?;
    if f.c != params.c_in {
        return Err(NetError::ShapeMismatch(format!(
            "temporal conv expects {} input channels, got {}",
            params.c_in, f.c
        )));
    }
    Ok(tconv_forward(f, params).0)
}
