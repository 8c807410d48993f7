//! Uniform access to a model's trainable tensors.
//!
//! Gradients share the model's own type: a gradient is a zeroed clone whose
//! tensors are accumulated in place. Optimizers, finite-difference checks, and
//! checkpoints all walk tensors in the order given by [`ParamSet::tensors`].

use super::tensor::{Matrix, Vector};
use crate::error::{dim_err, Result};

/// Read-only view of one named tensor.
#[derive(Debug, Clone)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

pub trait ParamSet: Clone {
    /// Named tensors, in a fixed order.
    fn tensors(&self) -> Vec<TensorRef<'_>>;

    /// Mutable tensors, same order as [`ParamSet::tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }

    /// `self += scale · other`.
    fn axpy(&mut self, scale: f64, other: &Self) -> Result<()> {
        let src = other.flatten();
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            if offset + n > src.len() {
                return dim_err("axpy: parameter sets differ in size");
            }
            for (d, s) in t.iter_mut().zip(&src[offset..offset + n]) {
                *d += scale * s;
            }
            offset += n;
        }
        if offset != src.len() {
            return dim_err("axpy: parameter sets differ in size");
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn mref(name: impl Into<String>, m: &Matrix) -> TensorRef<'_> {
    TensorRef {
        name: name.into(),
        shape: m.shape(),
        data: m.as_slice(),
    }
}

pub(crate) fn vref(name: impl Into<String>, v: &Vector) -> TensorRef<'_> {
    TensorRef {
        name: name.into(),
        shape: (v.len(), 1),
        data: v.as_slice(),
    }
}

/// Dense layer weights: `y = act(W x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Vector,
}

impl DenseParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(out_dim, in_dim),
            b: Vector::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub(crate) fn push_refs<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(mref(format!("{prefix}.w"), &self.w));
        out.push(vref(format!("{prefix}.b"), &self.b));
    }

    pub(crate) fn push_muts<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(self.w.as_mut_slice());
        out.push(self.b.as_mut_slice());
    }
}
