//! Deterministic numeric kernel: tensors, activations, dense layers, an LSTM
//! cell with hand-derived BPTT, optimizers, initializers, seeded RNG, and
//! finite-difference gradient checking.

pub mod activation;
pub mod dense;
pub mod gradcheck;
pub mod init;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;

pub use activation::{relu, sigmoid, softmax, tanh_act, Activation};
pub use dense::{dense_backward, dense_forward, stack_backward, stack_forward, DenseCache};
pub use gradcheck::{grad_check, GradCheckReport};
pub use init::{init_glorot_uniform, init_orthogonal};
pub use lstm::{
    lstm_backward, lstm_backward_seq, lstm_run, lstm_step, lstm_step_cached, Gates, LstmCellParams,
    LstmGrads, LstmState, LstmStep,
};
pub use optim::{adam_update, sgd_update, AdamConfig, AdamState};
pub use params::{DenseParams, ParamSet, TensorRef};
pub use rng::Rng;
pub use tensor::{matvec, Matrix, Vector};

#[cfg(test)]
mod gradient_tests {
    use super::*;
    use crate::error::Result;

    #[derive(Clone)]
    struct Flat(Vector);

    impl ParamSet for Flat {
        fn tensors(&self) -> Vec<TensorRef<'_>> {
            vec![params::vref("theta", &self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![self.0.as_mut_slice()]
        }
    }

    #[test]
    fn quadratic_and_linear_are_exact() {
        let theta = Flat(Vector::new(vec![0.3, -1.7, 2.2, 0.05]).unwrap());
        let grad = Flat(theta.0.scale(2.0));
        let r = grad_check(&theta, &grad, 1e-5, |p: &Flat| Ok(p.0.norm_sq())).unwrap();
        assert!(r.max_rel_error < 1e-8, "{r:?}");

        let c = Vector::new(vec![1.5, -0.5, 3.0, 0.25]).unwrap();
        let r = grad_check(&theta, &Flat(c.clone()), 1e-5, |p: &Flat| p.0.dot(&c)).unwrap();
        assert!(r.max_rel_error < 1e-10, "{r:?}");
    }

    #[test]
    fn epsilon_and_loss_validation() {
        let theta = Flat(Vector::zeros(2));
        let g = theta.clone();
        assert!(grad_check(&theta, &g, 0.0, |_: &Flat| Ok(0.0)).is_err());
        assert!(grad_check(&theta, &g, 1e-2, |_: &Flat| Ok(0.0)).is_err());
        assert!(matches!(
            grad_check(&theta, &g, 1e-6, |_: &Flat| Ok(f64::NAN)),
            Err(crate::Error::Numerical(_))
        ));
    }

    #[derive(Clone)]
    struct TwoLayer {
        a: DenseParams,
        b: DenseParams,
    }

    impl ParamSet for TwoLayer {
        fn tensors(&self) -> Vec<TensorRef<'_>> {
            let mut out = Vec::new();
            self.a.push_refs("a", &mut out);
            self.b.push_refs("b", &mut out);
            out
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            let mut out = Vec::new();
            self.a.push_muts(&mut out);
            self.b.push_muts(&mut out);
            out
        }
    }

    fn two_layer_loss(net: &TwoLayer, x: &Vector, y: &Vector) -> Result<(f64, TwoLayer)> {
        let (h, c1) = dense_forward(&net.a, Activation::Tanh, x)?;
        let (out, c2) = dense_forward(&net.b, Activation::Sigmoid, &h)?;
        let diff = out.sub(y)?;
        let mut g = net.zeros_like();
        let d_h = dense_backward(&net.b, Activation::Sigmoid, &c2, &diff.scale(2.0), &mut g.b)?;
        dense_backward(&net.a, Activation::Tanh, &c1, &d_h, &mut g.a)?;
        Ok((diff.norm_sq(), g))
    }

    #[test]
    fn randomized_two_layer_net() {
        for seed in 0..5 {
            let mut rng = Rng::new(seed);
            let net = TwoLayer {
                a: DenseParams {
                    w: init_glorot_uniform(&mut rng, 5, 4),
                    b: Vector::new((0..5).map(|_| rng.normal() * 0.1).collect()).unwrap(),
                },
                b: DenseParams {
                    w: init_glorot_uniform(&mut rng, 3, 5),
                    b: Vector::zeros(3),
                },
            };
            let x = Vector::new((0..4).map(|_| rng.normal()).collect()).unwrap();
            let y = Vector::new((0..3).map(|_| rng.uniform()).collect()).unwrap();
            let (_, g) = two_layer_loss(&net, &x, &y).unwrap();
            let r = grad_check(&net, &g, 1e-6, |n: &TwoLayer| Ok(two_layer_loss(n, &x, &y)?.0)).unwrap();
            assert!(r.max_rel_error < 1e-5, "seed {seed}: {r:?}");
        }
    }

    fn lstm_projection_loss(p: &LstmCellParams, xs: &[Vector], w: &Vector) -> Result<f64> {
        let steps = lstm_run(p, xs)?;
        steps.last().unwrap().next.h.dot(w)
    }

    fn check_lstm(seed: u64, input: usize, hidden: usize, len: usize, tol: f64) {
        let mut rng = Rng::new(seed);
        let mut p = LstmCellParams::init(&mut rng, input, hidden, true);
        for b in [&mut p.b_i, &mut p.b_f, &mut p.b_o, &mut p.b_c] {
            *b = Vector::new((0..hidden).map(|_| rng.normal() * 0.3).collect()).unwrap();
        }
        let xs: Vec<Vector> = (0..len)
            .map(|_| Vector::new((0..input).map(|_| rng.normal()).collect()).unwrap())
            .collect();
        let w = Vector::new((0..hidden).map(|_| rng.normal()).collect()).unwrap();
        let steps = lstm_run(&p, &xs).unwrap();
        let g = lstm_backward(&p, &steps, &w).unwrap();
        let r = grad_check(&p, &g.params, 1e-6, |q: &LstmCellParams| {
            lstm_projection_loss(q, &xs, &w)
        })
        .unwrap();
        assert!(r.max_rel_error < tol, "seed {seed}: {r:?}");
    }

    #[test]
    fn lstm_single_step_scalar() {
        for seed in 0..5 {
            check_lstm(seed, 1, 1, 1, 1e-5);
        }
    }

    #[test]
    fn lstm_five_steps() {
        for seed in 0..5 {
            check_lstm(seed, 4, 3, 5, 1e-4);
        }
    }

    #[test]
    fn lstm_input_gradients() {
        let mut rng = Rng::new(21);
        let p = LstmCellParams::init(&mut rng, 3, 2, false);
        let xs: Vec<Vector> = (0..3)
            .map(|_| Vector::new((0..3).map(|_| rng.normal()).collect()).unwrap())
            .collect();
        let w = Vector::new(vec![0.7, -1.3]).unwrap();
        let g = lstm_backward(&p, &lstm_run(&p, &xs).unwrap(), &w).unwrap();
        let eps = 1e-6;
        for t in 0..3 {
            for k in 0..3 {
                let mut hi = xs.clone();
                hi[t][k] += eps;
                let mut lo = xs.clone();
                lo[t][k] -= eps;
                let num = (lstm_projection_loss(&p, &hi, &w).unwrap()
                    - lstm_projection_loss(&p, &lo, &w).unwrap())
                    / (2.0 * eps);
                assert!((num - g.d_x[t][k]).abs() < 1e-8);
            }
        }
    }
}
