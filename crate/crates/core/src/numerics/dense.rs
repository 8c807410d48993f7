use super::activation::Activation;
use super::params::DenseParams;
use super::tensor::{matvec, Vector};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct DenseCache {
    pub input: Vector,
    pub output: Vector,
}

pub fn dense_forward(p: &DenseParams, act: Activation, x: &Vector) -> Result<(Vector, DenseCache)> {
    let z = matvec(&p.w, x)?.add(&p.b)?;
    let a = act.apply(&z);
    Ok((
        a.clone(),
        DenseCache {
            input: x.clone(),
            output: a,
        },
    ))
}

/// Accumulates into `grad` and returns the gradient w.r.t. the layer input.
pub fn dense_backward(
    p: &DenseParams,
    act: Activation,
    cache: &DenseCache,
    d_out: &Vector,
    grad: &mut DenseParams,
) -> Result<Vector> {
    let dz = Vector::from_raw(
        d_out
            .iter()
            .zip(cache.output.iter())
            .map(|(&g, &a)| g * act.derivative_from_output(a))
            .collect(),
    );
    grad.w.add_outer(&dz, &cache.input)?;
    grad.b.add_assign(&dz)?;
    p.w.tr_matvec(&dz)
}

/// Runs a stack of layers sharing one activation.
pub fn stack_forward(
    layers: &[DenseParams],
    act: Activation,
    x: &Vector,
) -> Result<(Vector, Vec<DenseCache>)> {
    let mut h = x.clone();
    let mut caches = Vec::with_capacity(layers.len());
    for layer in layers {
        let (out, cache) = dense_forward(layer, act, &h)?;
        caches.push(cache);
        h = out;
    }
    Ok((h, caches))
}

pub fn stack_backward(
    layers: &[DenseParams],
    act: Activation,
    caches: &[DenseCache],
    d_out: &Vector,
    grads: &mut [DenseParams],
) -> Result<Vector> {
    let mut d = d_out.clone();
    for ((layer, cache), grad) in layers.iter().zip(caches).zip(grads.iter_mut()).rev() {
        d = dense_backward(layer, act, cache, &d, grad)?;
    }
    Ok(d)
}
