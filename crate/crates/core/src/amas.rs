//! Attention-based classification of attributed sequences.
//!
//! AttNet `r = tanh(W_r v + b_r)` and an LSTM over the items feed an attention
//! block. ASA attends over the hidden states and appends `r` to the last
//! attended vector; ASHA attends over `r ⊕ h^(t)`. A no-attention baseline
//! classifies `r ⊕ h^(T)` directly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AttributedSequence, Dataset};
use crate::error::{config_err, dim_err, Error, Result};
use crate::history::EpochLoss;
use crate::numerics::activation::{sigmoid_scalar, softmax_slice};
use crate::numerics::{
    adam_update, dense_backward, dense_forward, init_glorot_uniform, lstm_backward_seq, lstm_run, Activation,
    AdamConfig, AdamState, DenseCache, DenseParams, LstmCellParams, LstmStep, ParamSet, Rng, TensorRef, Vector,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attention {
    NoAttention,
    Asa,
    #[default]
    Asha,
}

/// How attention scores are normalized over time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionScore {
    /// Separate softmax over steps for every coordinate.
    #[default]
    PerDimension,
    /// One score per step, the sum of the attended vector's coordinates.
    Scalar,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    #[default]
    Softmax,
    /// One logistic unit; only for two classes.
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmasConfig {
    pub attention: Attention,
    pub score: AttentionScore,
    pub head: Head,
    pub attr_hidden: usize,
    pub lstm_hidden: usize,
    pub dropout_attr: f64,
    pub dropout_head: f64,
    /// Weight of `Σ‖U‖²` over the LSTM recurrent kernels.
    pub l2_recurrent: f64,
}

impl Default for AmasConfig {
    fn default() -> Self {
        Self {
            attention: Attention::Asha,
            score: AttentionScore::PerDimension,
            head: Head::Softmax,
            attr_hidden: 32,
            lstm_hidden: 32,
            dropout_attr: 0.5,
            dropout_head: 0.2,
            l2_recurrent: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmasModel {
    pub attnet: DenseParams,
    pub lstm: LstmCellParams,
    /// `W_p, b_p`.
    pub head: DenseParams,
    pub classes: Vec<String>,
    pub attention: Attention,
    pub score: AttentionScore,
    pub head_kind: Head,
    pub dropout_attr: f64,
    pub dropout_head: f64,
    pub l2_recurrent: f64,
}

impl AmasModel {
    pub fn zeros(attr_dim: usize, vocab_size: usize, classes: Vec<String>, cfg: &AmasConfig) -> Result<Self> {
        if classes.is_empty() {
            return config_err("amas needs at least one class");
        }
        if cfg.attr_hidden == 0 || cfg.lstm_hidden == 0 {
            return config_err("amas widths must be >= 1");
        }
        if cfg.head == Head::Sigmoid && classes.len() != 2 {
            return config_err("the sigmoid head needs exactly two classes");
        }
        for rate in [cfg.dropout_attr, cfg.dropout_head] {
            if !(0.0..1.0).contains(&rate) {
                return config_err(format!("dropout rate must lie in [0, 1), got {rate}"));
            }
        }
        if !(cfg.l2_recurrent >= 0.0) {
            return config_err("l2_recurrent must be >= 0");
        }
        // ASA and the baseline see r ⊕ (α or h); ASHA sees α over r ⊕ h.
        let head_in = cfg.attr_hidden + cfg.lstm_hidden;
        let head_out = match cfg.head {
            Head::Softmax => classes.len(),
            Head::Sigmoid => 1,
        };
        Ok(Self {
            attnet: DenseParams::zeros(cfg.attr_hidden, attr_dim),
            lstm: LstmCellParams::zeros(vocab_size, cfg.lstm_hidden),
            head: DenseParams::zeros(head_out, head_in),
            classes,
            attention: cfg.attention,
            score: cfg.score,
            head_kind: cfg.head,
            dropout_attr: cfg.dropout_attr,
            dropout_head: cfg.dropout_head,
            l2_recurrent: cfg.l2_recurrent,
        })
    }

    pub fn init(
        rng: &mut Rng,
        attr_dim: usize,
        vocab_size: usize,
        classes: Vec<String>,
        cfg: &AmasConfig,
    ) -> Result<Self> {
        let mut m = Self::zeros(attr_dim, vocab_size, classes, cfg)?;
        m.attnet.w = init_glorot_uniform(rng, m.attnet.out_dim(), attr_dim);
        m.lstm = LstmCellParams::init(rng, vocab_size, cfg.lstm_hidden, true);
        m.head.w = init_glorot_uniform(rng, m.head.out_dim(), m.head.in_dim());
        Ok(m)
    }

    pub fn config(&self) -> AmasConfig {
        AmasConfig {
            attention: self.attention,
            score: self.score,
            head: self.head_kind,
            attr_hidden: self.attnet.out_dim(),
            lstm_hidden: self.lstm.hidden_size(),
            dropout_attr: self.dropout_attr,
            dropout_head: self.dropout_head,
            l2_recurrent: self.l2_recurrent,
        }
    }

    pub fn attr_dim(&self) -> usize {
        self.attnet.in_dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.lstm.input_size()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

impl ParamSet for AmasModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        self.attnet.push_refs("att", &mut out);
        self.lstm.push_refs("lstm", &mut out);
        self.head.push_refs("head", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.attnet.push_muts(&mut out);
        self.lstm.push_muts(&mut out);
        self.head.push_muts(&mut out);
        out
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 − rate)`.
pub fn dropout_mask(rng: &mut Rng, n: usize, rate: f64) -> Vector {
    let keep = 1.0 / (1.0 - rate);
    Vector::from_raw((0..n).map(|_| if rng.bernoulli(rate) { 0.0 } else { keep }).collect())
}

/// Attention weights `μ^(t)` and attended vectors `α^(t)` for one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    /// One entry per step. Per-dimension scoring gives a vector as wide as
    /// the attended representation, scalar scoring a single weight.
    pub weights: Vec<Vector>,
    pub vectors: Vec<Vector>,
}

impl AttentionTrace {
    /// Weights zero-padded to `t_max` steps.
    pub fn padded_weights(&self, t_max: usize) -> Vec<Vector> {
        let width = self.weights.first().map_or(0, Vector::len);
        let mut out = self.weights.clone();
        out.resize(t_max.max(out.len()), Vector::zeros(width));
        out
    }
}

/// Intermediates of one forward pass.
#[derive(Clone, Debug)]
pub struct AmasCache {
    att: DenseCache,
    attr_mask: Option<Vector>,
    r: Vector,
    steps: Vec<LstmStep>,
    /// `x^(t)`: `h^(t)` for ASA, `r ⊕ h^(t)` for ASHA.
    attended: Vec<Vector>,
    weights: Vec<Vector>,
    head_mask: Option<Vector>,
    head: DenseCache,
}

#[derive(Clone, Debug)]
pub struct AmasForward {
    /// Class distribution.
    pub scores: Vector,
    /// Head pre-activation.
    pub logits: Vector,
    pub trace: Option<AttentionTrace>,
    pub cache: AmasCache,
}

fn softmax_over_steps(scores: &[Vector]) -> Vec<Vector> {
    let width = scores[0].len();
    let mut out = vec![Vector::zeros(width); scores.len()];
    let mut column = vec![0.0; scores.len()];
    for k in 0..width {
        for (t, s) in scores.iter().enumerate() {
            column[t] = s[k];
        }
        for (t, w) in softmax_slice(&column).into_iter().enumerate() {
            out[t][k] = w;
        }
    }
    out
}

fn attention_weights(score: AttentionScore, attended: &[Vector]) -> Vec<Vector> {
    match score {
        AttentionScore::PerDimension => softmax_over_steps(attended),
        AttentionScore::Scalar => {
            let sums: Vec<Vector> = attended.iter().map(|x| Vector::from_raw(vec![x.sum()])).collect();
            softmax_over_steps(&sums)
        }
    }
}

fn weighted(score: AttentionScore, w: &Vector, x: &Vector) -> Result<Vector> {
    match score {
        AttentionScore::PerDimension => w.mul(x),
        AttentionScore::Scalar => Ok(x.scale(w[0])),
    }
}

fn apply_mask(v: &Vector, mask: &Option<Vector>) -> Result<Vector> {
    match mask {
        Some(m) => v.mul(m),
        None => Ok(v.clone()),
    }
}

/// Forward pass. `dropout` supplies the mask stream during training; `None`
/// runs the deterministic inference path.
pub fn amas_forward(model: &AmasModel, record: &AttributedSequence, mut dropout: Option<&mut Rng>) -> Result<AmasForward> {
    record.require_nonempty()?;
    if record.attributes.len() != model.attr_dim() {
        return dim_err(format!(
            "record has {} attributes, model expects {}",
            record.attributes.len(),
            model.attr_dim()
        ));
    }
    let inputs = record.encode(model.vocab_size())?.steps();
    let (r_raw, att) = dense_forward(&model.attnet, Activation::Tanh, &record.attributes)?;
    let attr_mask = match dropout.as_deref_mut() {
        Some(rng) if model.dropout_attr > 0.0 => Some(dropout_mask(rng, r_raw.len(), model.dropout_attr)),
        _ => None,
    };
    let r = apply_mask(&r_raw, &attr_mask)?;
    let steps = lstm_run(&model.lstm, &inputs)?;
    let last = steps.len() - 1;

    let (p, attended, weights) = match model.attention {
        Attention::NoAttention => (r.concat(&steps[last].next.h), Vec::new(), Vec::new()),
        Attention::Asa | Attention::Asha => {
            let attended: Vec<Vector> = steps
                .iter()
                .map(|s| match model.attention {
                    Attention::Asha => r.concat(&s.next.h),
                    _ => s.next.h.clone(),
                })
                .collect();
            let weights = attention_weights(model.score, &attended);
            let alpha = weighted(model.score, &weights[last], &attended[last])?;
            let p = match model.attention {
                Attention::Asa => r.concat(&alpha),
                _ => alpha,
            };
            (p, attended, weights)
        }
    };

    let head_mask = match dropout {
        Some(rng) if model.dropout_head > 0.0 => Some(dropout_mask(rng, p.len(), model.dropout_head)),
        _ => None,
    };
    let p_in = apply_mask(&p, &head_mask)?;
    let (logits, head) = dense_forward(&model.head, Activation::Identity, &p_in)?;
    let scores = match model.head_kind {
        Head::Softmax => Vector::from_raw(softmax_slice(logits.as_slice())),
        Head::Sigmoid => {
            let s = sigmoid_scalar(logits[0]);
            Vector::from_raw(vec![1.0 - s, s])
        }
    };
    let trace = if weights.is_empty() {
        None
    } else {
        let vectors = weights
            .iter()
            .zip(&attended)
            .map(|(w, x)| weighted(model.score, w, x))
            .collect::<Result<_>>()?;
        Some(AttentionTrace {
            weights: weights.clone(),
            vectors,
        })
    };
    Ok(AmasForward {
        scores,
        logits,
        trace,
        cache: AmasCache {
            att,
            attr_mask,
            r,
            steps,
            attended,
            weights,
            head_mask,
            head,
        },
    })
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Cross-entropy of the true class and its gradient on the logits.
fn head_loss(model: &AmasModel, logits: &Vector, scores: &Vector, target: usize) -> (f64, Vector) {
    match model.head_kind {
        Head::Softmax => {
            let loss = log_sum_exp(logits.as_slice()) - logits[target];
            let mut d = scores.clone();
            d[target] -= 1.0;
            (loss, d)
        }
        Head::Sigmoid => {
            let z = logits[0];
            let y = target as f64;
            let loss = y * softplus(-z) + (1.0 - y) * softplus(z);
            (loss, Vector::from_raw(vec![sigmoid_scalar(z) - y]))
        }
    }
}

/// Adds the attention block's backward pass for `α^(T) = μ^(T) ⊙ x^(T)` to
/// `d_x`, the per-step gradients on the attended vectors.
fn attention_backward(score: AttentionScore, cache: &AmasCache, d_alpha: &Vector, d_x: &mut [Vector]) -> Result<()> {
    let last = cache.attended.len() - 1;
    let x_last = &cache.attended[last];
    let w = &cache.weights;
    match score {
        AttentionScore::PerDimension => {
            for k in 0..x_last.len() {
                let g = d_alpha[k] * x_last[k] * w[last][k];
                for t in 0..=last {
                    let delta = if t == last { 1.0 } else { 0.0 };
                    d_x[t][k] += g * (delta - w[t][k]);
                }
                d_x[last][k] += d_alpha[k] * w[last][k];
            }
        }
        AttentionScore::Scalar => {
            let d_mu = d_alpha.dot(x_last)?;
            for t in 0..=last {
                let delta = if t == last { 1.0 } else { 0.0 };
                let d_score = d_mu * w[last][0] * (delta - w[t][0]);
                for v in d_x[t].as_mut_slice() {
                    *v += d_score;
                }
            }
            d_x[last].add_assign(&d_alpha.scale(w[last][0]))?;
        }
    }
    Ok(())
}

/// Loss `CE + λ·Σ‖U‖²` for one record and its gradient.
pub fn amas_gradient(
    model: &AmasModel,
    record: &AttributedSequence,
    target: usize,
    dropout: Option<&mut Rng>,
) -> Result<(f64, AmasModel)> {
    if target >= model.n_classes() {
        return config_err(format!("target {target} out of range for {} classes", model.n_classes()));
    }
    let fwd = amas_forward(model, record, dropout)?;
    let c = &fwd.cache;
    let (ce, d_logits) = head_loss(model, &fwd.logits, &fwd.scores, target);
    let mut grads = model.zeros_like();
    let d_p_in = dense_backward(&model.head, Activation::Identity, &c.head, &d_logits, &mut grads.head)?;
    let d_p = apply_mask(&d_p_in, &c.head_mask)?;

    let dr_width = c.r.len();
    let d_hid = model.lstm.hidden_size();
    let n = c.steps.len();
    let mut d_h = vec![Vector::zeros(d_hid); n];
    let mut d_r = Vector::zeros(dr_width);
    match model.attention {
        Attention::NoAttention => {
            let (dr, dh) = d_p.split_at(dr_width);
            d_r = dr;
            d_h[n - 1] = dh;
        }
        Attention::Asa => {
            let (dr, d_alpha) = d_p.split_at(dr_width);
            d_r = dr;
            attention_backward(model.score, c, &d_alpha, &mut d_h)?;
        }
        Attention::Asha => {
            let mut d_x = vec![Vector::zeros(dr_width + d_hid); n];
            attention_backward(model.score, c, &d_p, &mut d_x)?;
            for (t, dx) in d_x.into_iter().enumerate() {
                let (dr, dh) = dx.split_at(dr_width);
                d_r.add_assign(&dr)?;
                d_h[t] = dh;
            }
        }
    }
    let lg = lstm_backward_seq(&model.lstm, &c.steps, &d_h, None)?;
    grads.lstm = lg.params;
    let d_r_raw = apply_mask(&d_r, &c.attr_mask)?;
    dense_backward(&model.attnet, Activation::Tanh, &c.att, &d_r_raw, &mut grads.attnet)?;

    let l2 = model.l2_recurrent;
    if l2 > 0.0 {
        for (g, u) in [
            (&mut grads.lstm.u_i, &model.lstm.u_i),
            (&mut grads.lstm.u_f, &model.lstm.u_f),
            (&mut grads.lstm.u_o, &model.lstm.u_o),
            (&mut grads.lstm.u_c, &model.lstm.u_c),
        ] {
            for (gv, uv) in g.as_mut_slice().iter_mut().zip(u.as_slice()) {
                *gv += 2.0 * l2 * uv;
            }
        }
    }
    let loss = ce + l2 * model.lstm.recurrent_sq_norm();
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("amas loss is {loss}")));
    }
    Ok((loss, grads))
}

/// Inference-path loss without dropout.
pub fn amas_loss(model: &AmasModel, record: &AttributedSequence, target: usize) -> Result<f64> {
    let fwd = amas_forward(model, record, None)?;
    let (ce, _) = head_loss(model, &fwd.logits, &fwd.scores, target);
    Ok(ce + model.l2_recurrent * model.lstm.recurrent_sq_norm())
}

fn targets(model: &AmasModel, dataset: &Dataset) -> Result<Vec<usize>> {
    dataset
        .records
        .iter()
        .map(|r| {
            let label = r
                .label
                .as_deref()
                .ok_or_else(|| Error::Config(format!("record {:?} has no label", r.id)))?;
            model
                .class_index(label)
                .ok_or_else(|| Error::Config(format!("record {:?} has unknown class {label:?}", r.id)))
        })
        .collect()
}

/// Mean cross-entropy over a labeled dataset, dropout off.
pub fn amas_mean_loss(model: &AmasModel, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return config_err("no records to evaluate");
    }
    let ys = targets(model, dataset)?;
    let total: f64 = dataset
        .records
        .par_iter()
        .zip(ys.par_iter())
        .map(|(r, &y)| {
            let fwd = amas_forward(model, r, None)?;
            Ok(head_loss(model, &fwd.logits, &fwd.scores, y).0)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(total / dataset.len() as f64)
}

/// `floor(N_1 · λ^(τ−1))` for `τ = 1..=epochs`, capped at `cap` and at least 1.
pub fn adaptive_schedule(n1: usize, lambda: f64, epochs: usize, cap: usize) -> Result<Vec<usize>> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return config_err(format!("adaptive rate must be >= 1, got {lambda}"));
    }
    if n1 == 0 {
        return config_err("initial sample count must be >= 1");
    }
    Ok((0..epochs)
        .map(|tau| {
            let exact = n1 as f64 * lambda.powi(tau as i32);
            // Products such as 1000·1.01 land a hair below the integer.
            let n = (exact * (1.0 + 1e-12)).floor() as usize;
            n.clamp(1, cap.max(1))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmasTrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// `N_1`; all training records when absent.
    pub initial_samples: Option<usize>,
    /// Adaptive rate `λ`.
    pub lambda: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for AmasTrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            epochs: 20,
            batch_size: 16,
            initial_samples: None,
            lambda: 1.0,
            patience: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmasEpoch {
    pub loss: EpochLoss,
    pub samples: usize,
}

/// Mini-batch Adam. Each epoch draws `N_τ` training records without
/// replacement; dropout masks come from the same stream as the draws. With
/// `patience` set, training stops once the validation loss has not improved
/// for that many epochs.
pub fn amas_train(
    model: &mut AmasModel,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &AmasTrainConfig,
    rng: &mut Rng,
) -> Result<Vec<AmasEpoch>> {
    if cfg.batch_size == 0 {
        return config_err("batch_size must be >= 1");
    }
    if train.is_empty() {
        return config_err("amas training needs at least one record");
    }
    let ys = targets(model, train)?;
    let schedule = adaptive_schedule(
        cfg.initial_samples.unwrap_or(train.len()),
        cfg.lambda,
        cfg.epochs,
        train.len(),
    )?;
    let mut adam = AdamState::new(model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for (tau, &n_tau) in schedule.iter().enumerate() {
        rng.shuffle(&mut order);
        for batch in order[..n_tau].chunks(cfg.batch_size) {
            let mut acc = model.zeros_like();
            for &i in batch {
                let (_, g) = amas_gradient(model, &train.records[i], ys[i], Some(rng))?;
                acc.axpy(1.0 / batch.len() as f64, &g)?;
            }
            adam_update(&mut adam, model, &acc, &cfg.adam)?;
        }
        let val = match validation {
            Some(v) if !v.is_empty() => Some(amas_mean_loss(model, v)?),
            _ => None,
        };
        history.push(AmasEpoch {
            loss: EpochLoss {
                epoch: tau + 1,
                train: amas_mean_loss(model, train)?,
                validation: val,
            },
            samples: n_tau,
        });
        if let (Some(patience), Some(v)) = (cfg.patience, val) {
            if v < best {
                best = v;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok(history)
}

/// Predicted class index (lowest index on ties) and the class distribution.
pub fn classify(model: &AmasModel, record: &AttributedSequence) -> Result<(usize, Vector)> {
    let scores = amas_forward(model, record, None)?.scores;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok((best, scores))
}

pub fn classify_all(model: &AmasModel, records: &[AttributedSequence]) -> Result<Vec<(usize, Vector)>> {
    records.par_iter().map(|r| classify(model, r)).collect()
}

/// Attention trace of the inference path; `None` for the baseline.
pub fn attention_trace(model: &AmasModel, record: &AttributedSequence) -> Result<Option<AttentionTrace>> {
    Ok(amas_forward(model, record, None)?.trace)
}

/// True class among the `k` highest scores. Ties in score rank by class index.
pub fn in_top_k(scores: &Vector, target: usize, k: usize) -> bool {
    let above = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > scores[target] || (s == scores[target] && j < target))
        .count();
    above < k
}

pub fn topk_accuracy(model: &AmasModel, dataset: &Dataset, k: usize) -> Result<f64> {
    if k == 0 || k > model.n_classes() {
        return config_err(format!("k must lie in [1, {}], got {k}", model.n_classes()));
    }
    if dataset.is_empty() {
        return config_err("no records to evaluate");
    }
    let ys = targets(model, dataset)?;
    let predictions = classify_all(model, &dataset.records)?;
    let hits = predictions
        .iter()
        .zip(&ys)
        .filter(|((_, scores), &y)| in_top_k(scores, y, k))
        .count();
    Ok(hits as f64 / dataset.len() as f64)
}
