//! Unsupervised embedding of attributed sequences.
//!
//! An attribute autoencoder (ReLU encoder, sigmoid decoder) produces a code
//! `V`, which is added to the first hidden state of an LSTM trained to predict
//! each next item. The LSTM's final cell state is the embedding.
//!
//! The input at step 1 is a zero vector, so `y^(1)` predicts the first item
//! from the attribute code alone; at step `t ≥ 2` the input is item `t−1`.

use serde::{Deserialize, Serialize};

use crate::data::{AttributedSequence, Dataset, EncodedSequence};
use crate::error::{config_err, dim_err, Error, Result};
use crate::numerics::activation::softmax_slice;
use crate::numerics::{
    init_glorot_uniform, lstm_backward_seq, lstm_step_cached, matvec, sgd_update, stack_backward,
    stack_forward, Activation, DenseCache, DenseParams, LstmCellParams, LstmState, LstmStep,
    ParamSet, Rng, TensorRef, Vector,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NasConfig {
    /// Embedding width `d`, shared by the encoder output and the LSTM.
    pub hidden: usize,
    /// Encoder depth `M`; the decoder mirrors it.
    pub layers: usize,
    /// When false the attribute code never reaches the LSTM (sequence-only
    /// ablation).
    pub conditioned: bool,
}

impl Default for NasConfig {
    fn default() -> Self {
        Self {
            hidden: 15,
            layers: 1,
            conditioned: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NasModel {
    pub encoder: Vec<DenseParams>,
    pub decoder: Vec<DenseParams>,
    pub lstm: LstmCellParams,
    /// `W_y` (r×d) and `b_y` (r).
    pub output: DenseParams,
    pub conditioned: bool,
}

impl NasModel {
    pub fn zeros(attr_dim: usize, vocab_size: usize, cfg: &NasConfig) -> Result<Self> {
        if cfg.hidden == 0 || cfg.layers == 0 {
            return config_err("nas hidden width and layer count must be >= 1");
        }
        let d = cfg.hidden;
        let encoder = (0..cfg.layers)
            .map(|m| DenseParams::zeros(d, if m == 0 { attr_dim } else { d }))
            .collect();
        let decoder = (0..cfg.layers)
            .map(|m| DenseParams::zeros(if m + 1 == cfg.layers { attr_dim } else { d }, d))
            .collect();
        Ok(Self {
            encoder,
            decoder,
            lstm: LstmCellParams::zeros(vocab_size, d),
            output: DenseParams::zeros(vocab_size, d),
            conditioned: cfg.conditioned,
        })
    }

    /// Uniform (Glorot) weights, zero biases.
    pub fn init(rng: &mut Rng, attr_dim: usize, vocab_size: usize, cfg: &NasConfig) -> Result<Self> {
        let mut m = Self::zeros(attr_dim, vocab_size, cfg)?;
        for layer in m.encoder.iter_mut().chain(m.decoder.iter_mut()) {
            layer.w = init_glorot_uniform(rng, layer.out_dim(), layer.in_dim());
        }
        m.lstm = LstmCellParams::init(rng, vocab_size, cfg.hidden, false);
        m.output.w = init_glorot_uniform(rng, vocab_size, cfg.hidden);
        Ok(m)
    }

    pub fn config(&self) -> NasConfig {
        NasConfig {
            hidden: self.hidden(),
            layers: self.encoder.len(),
            conditioned: self.conditioned,
        }
    }

    pub fn attr_dim(&self) -> usize {
        self.encoder[0].in_dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.lstm.input_size()
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden_size()
    }

    fn zero_attribute_part(&mut self) {
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            *layer = DenseParams::zeros(layer.out_dim(), layer.in_dim());
        }
    }
}

impl ParamSet for NasModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (m, layer) in self.encoder.iter().enumerate() {
            layer.push_refs(&format!("enc{m}"), &mut out);
        }
        for (m, layer) in self.decoder.iter().enumerate() {
            layer.push_refs(&format!("dec{m}"), &mut out);
        }
        self.lstm.push_refs("lstm", &mut out);
        self.output.push_refs("out", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            layer.push_muts(&mut out);
        }
        self.lstm.push_muts(&mut out);
        self.output.push_muts(&mut out);
        out
    }
}

#[derive(Clone, Debug)]
pub struct AttForward {
    /// Encoder output `V^(M)`.
    pub code: Vector,
    pub reconstruction: Vector,
    enc: Vec<DenseCache>,
    dec: Vec<DenseCache>,
}

pub fn att_forward(model: &NasModel, x: &Vector) -> Result<AttForward> {
    if x.len() != model.attr_dim() {
        return dim_err(format!(
            "record has {} attributes, model expects {}",
            x.len(),
            model.attr_dim()
        ));
    }
    let (code, enc) = stack_forward(&model.encoder, Activation::Relu, x)?;
    let (reconstruction, dec) = stack_forward(&model.decoder, Activation::Sigmoid, &code)?;
    Ok(AttForward {
        code,
        reconstruction,
        enc,
        dec,
    })
}

#[derive(Clone, Debug)]
pub struct SeqForward {
    /// `y^(1..l)`, one distribution over items per step.
    pub predictions: Vec<Vector>,
    /// Final cell state `c^(l)`.
    pub cell: Vector,
    steps: Vec<LstmStep>,
    /// Hidden state fed to the output layer at each step.
    hidden: Vec<Vector>,
}

/// Runs the unmasked steps of `enc`, adding `code` to `h^(1)`.
pub fn seq_forward(model: &NasModel, enc: &EncodedSequence, code: &Vector) -> Result<SeqForward> {
    let l = enc.true_len;
    if l == 0 {
        return Err(Error::EmptySequence(String::new()));
    }
    if enc.vocab_size() != model.vocab_size() {
        return dim_err("encoded sequence width differs from model vocabulary");
    }
    if code.len() != model.hidden() {
        return dim_err("attribute code width differs from LSTM hidden width");
    }
    let mut state = LstmState::zeros(model.hidden());
    let mut steps = Vec::with_capacity(l);
    let mut predictions = Vec::with_capacity(l);
    let mut hidden = Vec::with_capacity(l);
    for t in 0..l {
        let x = if t == 0 {
            Vector::zeros(model.vocab_size())
        } else {
            enc.step(t - 1)
        };
        let step = lstm_step_cached(&model.lstm, &x, &state)?;
        state = step.next.clone();
        if t == 0 {
            state.h.add_assign(code)?;
        }
        let logits = matvec(&model.output.w, &state.h)?.add(&model.output.b)?;
        predictions.push(Vector::from_raw(softmax_slice(logits.as_slice())));
        hidden.push(state.h.clone());
        steps.push(step);
    }
    Ok(SeqForward {
        predictions,
        cell: state.c,
        steps,
        hidden,
    })
}

fn code_for(model: &NasModel, att: &AttForward) -> Vector {
    if model.conditioned {
        att.code.clone()
    } else {
        Vector::zeros(model.hidden())
    }
}

fn check_finite(what: &str, id: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("{what} is {v} on record {id:?}")))
    }
}

fn attr_loss(x: &Vector, att: &AttForward) -> f64 {
    x.iter()
        .zip(att.reconstruction.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn seq_loss(enc: &EncodedSequence, seq: &SeqForward) -> f64 {
    (0..enc.true_len)
        .map(|t| {
            let target = enc.onehots.row(t).iter().position(|&v| v == 1.0).unwrap_or(0);
            -seq.predictions[t][target].ln()
        })
        .sum()
}

/// `(L_A, L_S)`: squared reconstruction error and teacher-forced next-item
/// negative log-likelihood.
pub fn nas_losses(model: &NasModel, record: &AttributedSequence) -> Result<(f64, f64)> {
    record.require_nonempty()?;
    let enc = record.encode(model.vocab_size())?;
    let att = att_forward(model, &record.attributes)?;
    let seq = seq_forward(model, &enc, &code_for(model, &att))?;
    Ok((attr_loss(&record.attributes, &att), seq_loss(&enc, &seq)))
}

/// Gradient of `L_A` (touches the autoencoder only).
pub fn attr_gradient(model: &NasModel, record: &AttributedSequence) -> Result<(f64, NasModel)> {
    let x = &record.attributes;
    let att = att_forward(model, x)?;
    let mut grads = model.zeros_like();
    let d_recon = att.reconstruction.sub(x)?.scale(2.0);
    let d_code = stack_backward(&model.decoder, Activation::Sigmoid, &att.dec, &d_recon, &mut grads.decoder)?;
    stack_backward(&model.encoder, Activation::Relu, &att.enc, &d_code, &mut grads.encoder)?;
    Ok((attr_loss(x, &att), grads))
}

/// Gradient of `L_S`, including the part reaching the encoder through the
/// attribute code.
pub fn seq_gradient(model: &NasModel, record: &AttributedSequence) -> Result<(f64, NasModel)> {
    record.require_nonempty()?;
    let enc = record.encode(model.vocab_size())?;
    let att = att_forward(model, &record.attributes)?;
    let seq = seq_forward(model, &enc, &code_for(model, &att))?;
    let mut grads = model.zeros_like();
    let mut d_h = Vec::with_capacity(enc.true_len);
    for t in 0..enc.true_len {
        let mut dz = seq.predictions[t].clone();
        let target = enc.onehots.row(t).iter().position(|&v| v == 1.0).unwrap_or(0);
        dz[target] -= 1.0;
        grads.output.w.add_outer(&dz, &seq.hidden[t])?;
        grads.output.b.add_assign(&dz)?;
        d_h.push(model.output.w.tr_matvec(&dz)?);
    }
    let lstm_grads = lstm_backward_seq(&model.lstm, &seq.steps, &d_h, None)?;
    grads.lstm = lstm_grads.params;
    if model.conditioned {
        stack_backward(&model.encoder, Activation::Relu, &att.enc, &lstm_grads.d_h[0], &mut grads.encoder)?;
    }
    Ok((seq_loss(&enc, &seq), grads))
}

/// `(L_A, L_S, ∇(L_A + L_S))` over every parameter.
pub fn nas_gradients(model: &NasModel, record: &AttributedSequence) -> Result<(f64, f64, NasModel)> {
    let (la, mut grads) = attr_gradient(model, record)?;
    let (ls, gs) = seq_gradient(model, record)?;
    grads.axpy(1.0, &gs)?;
    Ok((la, ls, grads))
}

/// Final cell state `c^(l)` for the record.
pub fn nas_embed(model: &NasModel, record: &AttributedSequence) -> Result<Vector> {
    record.require_nonempty()?;
    nas_embed_encoded(model, &record.attributes, &record.encode(model.vocab_size())?)
}

/// Embedding of an already padded encoding; padding rows are ignored.
pub fn nas_embed_encoded(model: &NasModel, x: &Vector, enc: &EncodedSequence) -> Result<Vector> {
    let att = att_forward(model, x)?;
    Ok(seq_forward(model, enc, &code_for(model, &att))?.cell)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NasSchedule {
    /// Per record: up to `T_A` attribute steps, then up to `T_S` sequence steps.
    #[default]
    PerRecord,
    /// Per record: exactly one attribute step and one sequence step.
    CorpusEpoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NasTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub t_a: usize,
    pub t_s: usize,
    pub eps_a: f64,
    pub eps_s: f64,
    pub schedule: NasSchedule,
}

impl Default for NasTrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 5,
            t_a: 3,
            t_s: 3,
            eps_a: 1e-6,
            eps_s: 1e-6,
            schedule: NasSchedule::PerRecord,
        }
    }
}

/// Corpus means after one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NasEpoch {
    pub epoch: usize,
    pub l_a: f64,
    pub l_s: f64,
    /// `L_A + L_S` on the validation records, if any.
    pub validation: Option<f64>,
}

/// Mean `(L_A, L_S)` over a corpus.
pub fn nas_corpus_losses(model: &NasModel, records: &[AttributedSequence]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return config_err("no records to evaluate");
    }
    let mut sa = 0.0;
    let mut ss = 0.0;
    for r in records {
        let (la, ls) = nas_losses(model, r)?;
        sa += check_finite("L_A", &r.id, la)?;
        ss += check_finite("L_S", &r.id, ls)?;
    }
    let n = records.len() as f64;
    Ok((sa / n, ss / n))
}

fn attr_phase(model: &mut NasModel, r: &AttributedSequence, lr: f64, iters: usize, eps: f64) -> Result<()> {
    let mut last = f64::INFINITY;
    for _ in 0..iters {
        let (la, grads) = attr_gradient(model, r)?;
        check_finite("L_A", &r.id, la)?;
        if (last - la).abs() < eps {
            break;
        }
        sgd_update(model, &grads, lr)?;
        last = la;
    }
    Ok(())
}

fn seq_phase(model: &mut NasModel, r: &AttributedSequence, lr: f64, iters: usize, eps: f64) -> Result<()> {
    let mut last = f64::INFINITY;
    for _ in 0..iters {
        let (ls, mut grads) = seq_gradient(model, r)?;
        check_finite("L_S", &r.id, ls)?;
        if (last - ls).abs() < eps {
            break;
        }
        grads.zero_attribute_part();
        sgd_update(model, &grads, lr)?;
        last = ls;
    }
    Ok(())
}

/// Alternating optimization over `train`; returns one row per epoch.
pub fn nas_train(
    model: &mut NasModel,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &NasTrainConfig,
) -> Result<Vec<NasEpoch>> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return config_err(format!("learning rate must be > 0, got {}", cfg.lr));
    }
    for r in train.records.iter().chain(validation.iter().flat_map(|v| v.records.iter())) {
        r.require_nonempty()?;
    }
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for r in &train.records {
            match cfg.schedule {
                NasSchedule::PerRecord => {
                    attr_phase(model, r, cfg.lr, cfg.t_a, cfg.eps_a)?;
                    seq_phase(model, r, cfg.lr, cfg.t_s, cfg.eps_s)?;
                }
                NasSchedule::CorpusEpoch => {
                    attr_phase(model, r, cfg.lr, 1, 0.0)?;
                    seq_phase(model, r, cfg.lr, 1, 0.0)?;
                }
            }
        }
        if !model.all_finite() {
            return Err(Error::Numerical(format!("non-finite parameters after epoch {epoch}")));
        }
        let (l_a, l_s) = nas_corpus_losses(model, &train.records)?;
        let validation = match validation {
            Some(v) if !v.is_empty() => {
                let (a, s) = nas_corpus_losses(model, &v.records)?;
                Some(a + s)
            }
            _ => None,
        };
        history.push(NasEpoch {
            epoch,
            l_a,
            l_s,
            validation,
        });
    }
    Ok(history)
}
