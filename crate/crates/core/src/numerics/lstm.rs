//! LSTM cell with analytic backpropagation through time.
//!
//! Forward step:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
//! o = σ(W_o x + U_o h + b_o)    g = tanh(W_c x + U_c h + b_c)
//! c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
//! ```

use super::activation::sigmoid_scalar;
use super::init::{init_glorot_uniform, init_orthogonal};
use super::params::{mref, vref, ParamSet, TensorRef};
use super::rng::Rng;
use super::tensor::{matvec, Matrix, Vector};
use crate::error::{dim_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_c: Matrix,
    pub u_i: Matrix,
    pub u_f: Matrix,
    pub u_o: Matrix,
    pub u_c: Matrix,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_o: Vector,
    pub b_c: Vector,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, input);
        let u = || Matrix::zeros(hidden, hidden);
        let b = || Vector::zeros(hidden);
        Self {
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_c: w(),
            u_i: u(),
            u_f: u(),
            u_o: u(),
            u_c: u(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    /// Glorot-uniform input kernels, zero biases, and recurrent kernels either
    /// orthogonal or Glorot-uniform.
    pub fn init(rng: &mut Rng, input: usize, hidden: usize, orthogonal_recurrent: bool) -> Self {
        let mut p = Self::zeros(input, hidden);
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_o, &mut p.w_c] {
            *w = init_glorot_uniform(rng, hidden, input);
        }
        for u in [&mut p.u_i, &mut p.u_f, &mut p.u_o, &mut p.u_c] {
            *u = if orthogonal_recurrent {
                init_orthogonal(rng, hidden)
            } else {
                init_glorot_uniform(rng, hidden, hidden)
            };
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_i.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_i.rows()
    }

    pub fn recurrent_sq_norm(&self) -> f64 {
        [&self.u_i, &self.u_f, &self.u_o, &self.u_c]
            .iter()
            .map(|u| u.frobenius_sq())
            .sum()
    }

    fn check(&self) -> Result<()> {
        let (d, r) = (self.hidden_size(), self.input_size());
        let ws = [&self.w_i, &self.w_f, &self.w_o, &self.w_c];
        let us = [&self.u_i, &self.u_f, &self.u_o, &self.u_c];
        let bs = [&self.b_i, &self.b_f, &self.b_o, &self.b_c];
        if ws.iter().any(|w| w.shape() != (d, r))
            || us.iter().any(|u| u.shape() != (d, d))
            || bs.iter().any(|b| b.len() != d)
        {
            return dim_err("inconsistent LSTM parameter shapes");
        }
        Ok(())
    }

    pub(crate) fn push_refs<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        for (n, m) in [
            ("w_i", &self.w_i),
            ("w_f", &self.w_f),
            ("w_o", &self.w_o),
            ("w_c", &self.w_c),
            ("u_i", &self.u_i),
            ("u_f", &self.u_f),
            ("u_o", &self.u_o),
            ("u_c", &self.u_c),
        ] {
            out.push(mref(format!("{prefix}.{n}"), m));
        }
        for (n, v) in [
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_o", &self.b_o),
            ("b_c", &self.b_c),
        ] {
            out.push(vref(format!("{prefix}.{n}"), v));
        }
    }

    pub(crate) fn push_muts<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        for m in [
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_c,
            &mut self.u_i,
            &mut self.u_f,
            &mut self.u_o,
            &mut self.u_c,
        ] {
            out.push(m.as_mut_slice());
        }
        for v in [&mut self.b_i, &mut self.b_f, &mut self.b_o, &mut self.b_c] {
            out.push(v.as_mut_slice());
        }
    }
}

impl ParamSet for LstmCellParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::with_capacity(12);
        self.push_refs("lstm", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(12);
        self.push_muts(&mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vector,
    pub c: Vector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Vector::zeros(hidden),
            c: Vector::zeros(hidden),
        }
    }
}

/// Gate activations of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Gates {
    pub i: Vector,
    pub f: Vector,
    pub o: Vector,
    pub g: Vector,
}

/// Everything backprop needs about one forward step.
#[derive(Clone, Debug)]
pub struct LstmStep {
    pub x: Vector,
    pub prev: LstmState,
    pub gates: Gates,
    pub next: LstmState,
}

pub fn lstm_step(p: &LstmCellParams, x: &Vector, prev: &LstmState) -> Result<(LstmState, Gates)> {
    p.check()?;
    let d = p.hidden_size();
    if x.len() != p.input_size() {
        return dim_err(format!(
            "lstm input has {} entries, expected {}",
            x.len(),
            p.input_size()
        ));
    }
    if prev.h.len() != d || prev.c.len() != d {
        return dim_err(format!("lstm state must have {d} entries"));
    }
    let pre = |w: &Matrix, u: &Matrix, b: &Vector| -> Result<Vector> {
        matvec(w, x)?.add(&matvec(u, &prev.h)?)?.add(b)
    };
    let i = pre(&p.w_i, &p.u_i, &p.b_i)?.map(sigmoid_scalar);
    let f = pre(&p.w_f, &p.u_f, &p.b_f)?.map(sigmoid_scalar);
    let o = pre(&p.w_o, &p.u_o, &p.b_o)?.map(sigmoid_scalar);
    let g = pre(&p.w_c, &p.u_c, &p.b_c)?.map(f64::tanh);
    let c = f.mul(&prev.c)?.add(&i.mul(&g)?)?;
    let h = o.mul(&c.map(f64::tanh))?;
    Ok((LstmState { h, c }, Gates { i, f, o, g }))
}

/// Forward step that keeps its cache.
pub fn lstm_step_cached(p: &LstmCellParams, x: &Vector, prev: &LstmState) -> Result<LstmStep> {
    let (next, gates) = lstm_step(p, x, prev)?;
    Ok(LstmStep {
        x: x.clone(),
        prev: prev.clone(),
        gates,
        next,
    })
}

#[derive(Clone, Debug)]
pub struct LstmGrads {
    pub params: LstmCellParams,
    /// Gradient w.r.t. each step's input.
    pub d_x: Vec<Vector>,
    /// Total gradient w.r.t. each step's emitted hidden state, including the
    /// contribution flowing back from later steps.
    pub d_h: Vec<Vector>,
    pub d_h0: Vector,
    pub d_c0: Vector,
}

/// BPTT for a loss that depends only on the final hidden state.
pub fn lstm_backward(p: &LstmCellParams, steps: &[LstmStep], d_h_final: &Vector) -> Result<LstmGrads> {
    let d = p.hidden_size();
    let mut d_h = vec![Vector::zeros(d); steps.len()];
    if let Some(last) = d_h.last_mut() {
        *last = d_h_final.clone();
    }
    lstm_backward_seq(p, steps, &d_h, None)
}

/// BPTT with an external hidden-state gradient at every step and an optional
/// gradient on the final cell state.
///
/// A caller that perturbs `h` between steps (adds a vector before feeding it
/// to the next step) must record the perturbed state as the next step's
/// `prev`; the perturbation then receives exactly `d_h[t]`.
pub fn lstm_backward_seq(
    p: &LstmCellParams,
    steps: &[LstmStep],
    d_h_ext: &[Vector],
    d_c_final: Option<&Vector>,
) -> Result<LstmGrads> {
    p.check()?;
    if steps.is_empty() {
        return dim_err("lstm_backward needs at least one cached step");
    }
    if d_h_ext.len() != steps.len() {
        return dim_err(format!(
            "{} hidden gradients for {} steps",
            d_h_ext.len(),
            steps.len()
        ));
    }
    let d = p.hidden_size();
    let mut grads = p.zeros_like();
    let mut d_x = vec![Vector::zeros(0); steps.len()];
    let mut d_h_total = vec![Vector::zeros(0); steps.len()];
    let mut dh_next = Vector::zeros(d);
    let mut dc_next = match d_c_final {
        Some(dc) if dc.len() != d => return dim_err("final cell gradient width"),
        Some(dc) => dc.clone(),
        None => Vector::zeros(d),
    };

    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        if s.x.len() != p.input_size() || s.prev.h.len() != d || d_h_ext[t].len() != d {
            return dim_err(format!("cached step {t} does not match parameters"));
        }
        let Gates { i, f, o, g } = &s.gates;
        let tanh_c = s.next.c.map(f64::tanh);
        let dh = d_h_ext[t].add(&dh_next)?;

        let mut da_i = Vector::zeros(d);
        let mut da_f = Vector::zeros(d);
        let mut da_o = Vector::zeros(d);
        let mut da_g = Vector::zeros(d);
        let mut dc_prev = Vector::zeros(d);
        for k in 0..d {
            let dc = dc_next[k] + dh[k] * o[k] * (1.0 - tanh_c[k] * tanh_c[k]);
            let d_o = dh[k] * tanh_c[k];
            let d_i = dc * g[k];
            let d_f = dc * s.prev.c[k];
            let d_g = dc * i[k];
            da_i[k] = d_i * i[k] * (1.0 - i[k]);
            da_f[k] = d_f * f[k] * (1.0 - f[k]);
            da_o[k] = d_o * o[k] * (1.0 - o[k]);
            da_g[k] = d_g * (1.0 - g[k] * g[k]);
            dc_prev[k] = dc * f[k];
        }

        let mut dx = Vector::zeros(p.input_size());
        let mut dh_prev = Vector::zeros(d);
        for (da, w, u, gw, gu, gb) in [
            (&da_i, &p.w_i, &p.u_i, &mut grads.w_i, &mut grads.u_i, &mut grads.b_i),
            (&da_f, &p.w_f, &p.u_f, &mut grads.w_f, &mut grads.u_f, &mut grads.b_f),
            (&da_o, &p.w_o, &p.u_o, &mut grads.w_o, &mut grads.u_o, &mut grads.b_o),
            (&da_g, &p.w_c, &p.u_c, &mut grads.w_c, &mut grads.u_c, &mut grads.b_c),
        ] {
            gw.add_outer(da, &s.x)?;
            gu.add_outer(da, &s.prev.h)?;
            gb.add_assign(da)?;
            dx.add_assign(&w.tr_matvec(da)?)?;
            dh_prev.add_assign(&u.tr_matvec(da)?)?;
        }
        d_x[t] = dx;
        d_h_total[t] = dh;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    Ok(LstmGrads {
        params: grads,
        d_x,
        d_h: d_h_total,
        d_h0: dh_next,
        d_c0: dc_next,
    })
}

/// Runs the cell over `inputs` from a zero state, caching every step.
pub fn lstm_run(p: &LstmCellParams, inputs: &[Vector]) -> Result<Vec<LstmStep>> {
    let mut state = LstmState::zeros(p.hidden_size());
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let step = lstm_step_cached(p, x, &state)?;
        state = step.next.clone();
        steps.push(step);
    }
    Ok(steps)
}
