use super::{NetError, Real};
use crate::patch::FeatureTensor;

/// Dense `(C, J, T)` tensor; element `(c, j, t)` lives at `(c * J + j) * T + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<R> {
    pub c: usize,
    pub j: usize,
    pub t: usize,
    pub data: Vec<R>,
}

impl<R: Real> Tensor3<R> {
    pub fn zeros(c: usize, j: usize, t: usize) -> Self {
        Tensor3 {
            c,
            j,
            t,
            data: vec![R::zero(); c * j * t],
        }
    }

    pub fn from_vec(c: usize, j: usize, t: usize, data: Vec<R>) -> Result<Self, NetError> {
        if data.len() != c * j * t {
            return Err(NetError::ShapeMismatch(format!(
                "{} values for shape ({c}, {j}, {t})",
                data.len()
            )));
        }
        Ok(Tensor3 { c, j, t, data })
    }

    pub fn from_features(f: &FeatureTensor) -> Self {
        Tensor3 {
            c: f.channels,
            j: f.landmarks,
            t: f.frames,
            data: f.values.iter().map(|&v| R::of(f64::from(v))).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.j, self.t)
    }

    #[inline]
    pub fn idx(&self, c: usize, j: usize, t: usize) -> usize {
        (c * self.j + j) * self.t + t
    }

    pub fn at(&self, c: usize, j: usize, t: usize) -> R {
        self.data[self.idx(c, j, t)]
    }

    pub fn set(&mut self, c: usize, j: usize, t: usize, v: R) {
        let i = self.idx(c, j, t);
        self.data[i] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `alpha * self + beta * other`.
    pub fn combine(&self, alpha: R, other: &Self, beta: R) -> Self {
        assert_eq!(self.shape(), other.shape());
        Tensor3 {
            c: self.c,
            j: self.j,
            t: self.t,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| alpha * a + beta * b)
                .collect(),
        }
    }

    /// Relabels landmark `j` as `perm[j]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Self {
        let mut out = Tensor3::zeros(self.c, self.j, self.t);
        for c in 0..self.c {
            for j in 0..self.j {
                let src = self.idx(c, j, 0);
                let dst = out.idx(c, perm[j], 0);
                out.data[dst..dst + self.t].copy_from_slice(&self.data[src..src + self.t]);
            }
        }
        out
    }
}
