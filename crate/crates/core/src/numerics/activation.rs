use serde::{Deserialize, Serialize};

use super::tensor::Vector;
use crate::error::{dim_err, Result};

/// Sigmoid inputs are clamped to this magnitude before exponentiation.
pub const SIGMOID_CLAMP: f64 = 500.0;

#[inline]
pub fn sigmoid_scalar(z: f64) -> f64 {
    let z = z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

pub fn sigmoid(v: &Vector) -> Vector {
    v.map(sigmoid_scalar)
}

pub fn relu(v: &Vector) -> Vector {
    v.map(|z| z.max(0.0))
}

pub fn tanh_act(v: &Vector) -> Vector {
    v.map(f64::tanh)
}

/// Softmax with max-subtraction. Adding a constant to every input leaves the
/// shifted logits, and therefore the output, unchanged.
pub fn softmax(v: &Vector) -> Result<Vector> {
    if v.is_empty() {
        return dim_err("softmax of empty vector");
    }
    Ok(Vector::from_raw(softmax_slice(v.as_slice())))
}

pub(crate) fn softmax_slice(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Pointwise activation used by dense layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, v: &Vector) -> Vector {
        match self {
            Activation::Sigmoid => sigmoid(v),
            Activation::Relu => relu(v),
            Activation::Tanh => tanh_act(v),
            Activation::Identity => v.clone(),
        }
    }

    /// Derivative expressed through the activation's output `a`.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(&v(&[0.0])).as_slice(), &[0.5]);
        assert!((sigmoid(&v(&[700.0]))[0] - 1.0).abs() <= 1e-12);
        assert_eq!(sigmoid(&v(&[-700.0]))[0], sigmoid_scalar(-500.0));
        // 40-digit reference values.
        let s = sigmoid(&v(&[-1.0, 1.0]));
        assert!((s[0] - 0.268_941_421_369_995_120_7).abs() < 1e-15);
        assert!((s[1] - 0.731_058_578_630_004_879_3).abs() < 1e-15);
    }

    #[test]
    fn relu_values() {
        assert_eq!(relu(&v(&[-1.0, 0.0, 2.0])).as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(relu(&v(&[-3.0, -0.5])).as_slice(), &[0.0, 0.0]);
        assert_eq!(relu(&v(&[3.5])).as_slice(), &[3.5]);
    }

    #[test]
    fn tanh_values() {
        assert_eq!(tanh_act(&v(&[0.0])).as_slice(), &[0.0]);
        let x = 0.731;
        assert_eq!(tanh_act(&v(&[-x]))[0], -tanh_act(&v(&[x]))[0]);
        assert!((tanh_act(&v(&[1.0]))[0] - 0.761_594_155_955_764_888_1).abs() < 1e-15);
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&v(&[0.0, 0.0])).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(
            softmax(&v(&[2.5; 4])).unwrap().as_slice(),
            &[0.25, 0.25, 0.25, 0.25]
        );
        let s = softmax(&v(&[1000.0, 0.0])).unwrap();
        assert!(s.is_finite());
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1] < 1e-300);
        assert!(softmax(&Vector::zeros(0)).is_err());
    }

    #[test]
    fn softmax_shift_invariance_is_bitwise() {
        // Dyadic inputs keep the shift exact, so the max-subtracted logits match.
        let base = v(&[0.25, -1.5, 2.0, 0.0]);
        let shifted = base.map(|x| x + 17.3);
        let shifted2 = base.map(|x| x + 8.0);
        let a = softmax(&base).unwrap();
        assert!((a.sum() - 1.0).abs() <= 1e-12);
        assert_eq!(a, softmax(&shifted2).unwrap());
        let b = softmax(&shifted).unwrap();
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-15);
        }
    }
}
