//! Metric learning from pairwise feedback.
//!
//! A dense attribute network (AttNet) and an LSTM (SeqNet) are fused into one
//! embedding tower in one of three ways; both records of a pair pass through
//! the same tower and a contrastive loss on their Euclidean distance drives
//! training.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{AttributedSequence, Dataset, FeedbackTriplet};
use crate::error::{config_err, dim_err, Error, Result};
use crate::history::EpochLoss;
use crate::numerics::activation::softmax_slice;
use crate::numerics::{
    dense_backward, dense_forward, init_glorot_uniform, lstm_backward, lstm_backward_seq,
    lstm_run, lstm_step_cached, sgd_update, stack_backward, stack_forward, Activation, DenseCache,
    DenseParams, LstmCellParams, LstmState, LstmStep, ParamSet, Rng, TensorRef, Vector,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    /// `z = δ(W_z (V^(M) ⊕ h^(T)) + b_z)`.
    #[default]
    Balanced,
    /// The final hidden state joins the attributes at the AttNet input; the
    /// AttNet output is the embedding.
    AttCentric,
    /// `V^(M)` is added to `h^(1)`; the final hidden state is the embedding.
    SeqCentric,
}

/// How `∂D/∂Θ` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceGrad {
    /// `(Θ_i − Θ_j) / D`, the derivative of the Euclidean norm.
    #[default]
    Exact,
    /// `(Θ_i − Θ_j) ⊙ (1 − (Θ_i − Θ_j))` in place of the norm derivative.
    Surrogate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlasConfig {
    pub fusion: Fusion,
    /// AttNet depth `M`.
    pub layers: usize,
    /// AttNet width `d_M`.
    pub attr_hidden: usize,
    /// SeqNet width `d_S`.
    pub seq_hidden: usize,
    /// Embedding width of the balanced design (rows of `W_z`).
    pub out_dim: usize,
    pub activation: Activation,
    /// Contrastive margin `g`.
    pub margin: f64,
    pub distance_grad: DistanceGrad,
}

impl Default for MlasConfig {
    fn default() -> Self {
        Self {
            fusion: Fusion::Balanced,
            layers: 1,
            attr_hidden: 16,
            seq_hidden: 16,
            out_dim: 10,
            activation: Activation::Sigmoid,
            margin: 1.0,
            distance_grad: DistanceGrad::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlasModel {
    pub attnet: Vec<DenseParams>,
    pub seqnet: LstmCellParams,
    /// `W_z, b_z`; present only for the balanced design.
    pub fuse: Option<DenseParams>,
    pub fusion: Fusion,
    pub activation: Activation,
    pub margin: f64,
    pub distance_grad: DistanceGrad,
}

impl MlasModel {
    pub fn zeros(attr_dim: usize, vocab_size: usize, cfg: &MlasConfig) -> Result<Self> {
        if cfg.layers == 0 || cfg.attr_hidden == 0 || cfg.seq_hidden == 0 || cfg.out_dim == 0 {
            return config_err("mlas layer count and widths must be >= 1");
        }
        if !(cfg.margin > 0.0 && cfg.margin.is_finite()) {
            return config_err(format!("margin must be > 0, got {}", cfg.margin));
        }
        if cfg.fusion == Fusion::SeqCentric && cfg.attr_hidden != cfg.seq_hidden {
            return config_err("seq-centric fusion needs attr_hidden == seq_hidden");
        }
        let first_in = match cfg.fusion {
            Fusion::AttCentric => attr_dim + cfg.seq_hidden,
            _ => attr_dim,
        };
        let attnet = (0..cfg.layers)
            .map(|m| DenseParams::zeros(cfg.attr_hidden, if m == 0 { first_in } else { cfg.attr_hidden }))
            .collect();
        let fuse = (cfg.fusion == Fusion::Balanced)
            .then(|| DenseParams::zeros(cfg.out_dim, cfg.attr_hidden + cfg.seq_hidden));
        Ok(Self {
            attnet,
            seqnet: LstmCellParams::zeros(vocab_size, cfg.seq_hidden),
            fuse,
            fusion: cfg.fusion,
            activation: cfg.activation,
            margin: cfg.margin,
            distance_grad: cfg.distance_grad,
        })
    }

    /// Glorot weights, zero biases, orthogonal recurrent kernels.
    pub fn init(rng: &mut Rng, attr_dim: usize, vocab_size: usize, cfg: &MlasConfig) -> Result<Self> {
        let mut m = Self::zeros(attr_dim, vocab_size, cfg)?;
        for layer in m.attnet.iter_mut().chain(m.fuse.iter_mut()) {
            layer.w = init_glorot_uniform(rng, layer.out_dim(), layer.in_dim());
        }
        m.seqnet = LstmCellParams::init(rng, vocab_size, cfg.seq_hidden, true);
        Ok(m)
    }

    pub fn config(&self) -> MlasConfig {
        MlasConfig {
            fusion: self.fusion,
            layers: self.attnet.len(),
            attr_hidden: self.attnet[0].out_dim(),
            seq_hidden: self.seqnet.hidden_size(),
            out_dim: self.fuse.as_ref().map_or(10, DenseParams::out_dim),
            activation: self.activation,
            margin: self.margin,
            distance_grad: self.distance_grad,
        }
    }

    pub fn attr_dim(&self) -> usize {
        match self.fusion {
            Fusion::AttCentric => self.attnet[0].in_dim() - self.seqnet.hidden_size(),
            _ => self.attnet[0].in_dim(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.seqnet.input_size()
    }

    pub fn embedding_dim(&self) -> usize {
        match (&self.fuse, self.fusion) {
            (Some(f), _) => f.out_dim(),
            (None, Fusion::SeqCentric) => self.seqnet.hidden_size(),
            (None, _) => self.attnet.last().map_or(0, DenseParams::out_dim),
        }
    }
}

impl ParamSet for MlasModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (m, layer) in self.attnet.iter().enumerate() {
            layer.push_refs(&format!("att{m}"), &mut out);
        }
        self.seqnet.push_refs("lstm", &mut out);
        if let Some(f) = &self.fuse {
            f.push_refs("fuse", &mut out);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in self.attnet.iter_mut() {
            layer.push_muts(&mut out);
        }
        self.seqnet.push_muts(&mut out);
        if let Some(f) = &mut self.fuse {
            f.push_muts(&mut out);
        }
        out
    }
}

/// Forward intermediates of one tower pass.
#[derive(Clone, Debug)]
pub struct FusionCache {
    att: Vec<DenseCache>,
    steps: Vec<LstmStep>,
    fuse: Option<DenseCache>,
}

fn check_record(model: &MlasModel, record: &AttributedSequence) -> Result<Vec<Vector>> {
    record.require_nonempty()?;
    if record.attributes.len() != model.attr_dim() {
        return dim_err(format!(
            "record has {} attributes, model expects {}",
            record.attributes.len(),
            model.attr_dim()
        ));
    }
    Ok(record.encode(model.vocab_size())?.steps())
}

/// `Θ(p)` and the cache needed to backpropagate through it.
pub fn fusion_forward(model: &MlasModel, record: &AttributedSequence) -> Result<(Vector, FusionCache)> {
    let inputs = check_record(model, record)?;
    let x = &record.attributes;
    let act = model.activation;
    match model.fusion {
        Fusion::Balanced => {
            let (v, att) = stack_forward(&model.attnet, act, x)?;
            let steps = lstm_run(&model.seqnet, &inputs)?;
            let h = &steps[steps.len() - 1].next.h;
            let fuse = model.fuse.as_ref().ok_or_else(|| Error::Config("balanced fusion without W_z".into()))?;
            let (z, fc) = dense_forward(fuse, act, &v.concat(h))?;
            Ok((
                z,
                FusionCache {
                    att,
                    steps,
                    fuse: Some(fc),
                },
            ))
        }
        Fusion::AttCentric => {
            let steps = lstm_run(&model.seqnet, &inputs)?;
            let h = &steps[steps.len() - 1].next.h;
            let (v, att) = stack_forward(&model.attnet, act, &x.concat(h))?;
            Ok((v, FusionCache { att, steps, fuse: None }))
        }
        Fusion::SeqCentric => {
            let (v, att) = stack_forward(&model.attnet, act, x)?;
            let mut state = LstmState::zeros(model.seqnet.hidden_size());
            let mut steps = Vec::with_capacity(inputs.len());
            for (t, xt) in inputs.iter().enumerate() {
                let step = lstm_step_cached(&model.seqnet, xt, &state)?;
                state = step.next.clone();
                if t == 0 {
                    state.h.add_assign(&v)?;
                }
                steps.push(step);
            }
            Ok((state.h, FusionCache { att, steps, fuse: None }))
        }
    }
}

/// Accumulates `∂/∂θ` of `d_emb · Θ(p)` into `grads`.
pub fn fusion_backward(model: &MlasModel, cache: &FusionCache, d_emb: &Vector, grads: &mut MlasModel) -> Result<()> {
    let act = model.activation;
    match model.fusion {
        Fusion::Balanced => {
            let (fuse, gfuse, fc) = match (&model.fuse, &mut grads.fuse, &cache.fuse) {
                (Some(f), Some(g), Some(c)) => (f, g, c),
                _ => return config_err("balanced fusion without W_z"),
            };
            let d_in = dense_backward(fuse, act, fc, d_emb, gfuse)?;
            let (dv, dh) = d_in.split_at(model.attnet.last().map_or(0, DenseParams::out_dim));
            stack_backward(&model.attnet, act, &cache.att, &dv, &mut grads.attnet)?;
            let lg = lstm_backward(&model.seqnet, &cache.steps, &dh)?;
            grads.seqnet.axpy(1.0, &lg.params)?;
        }
        Fusion::AttCentric => {
            let d_in = stack_backward(&model.attnet, act, &cache.att, d_emb, &mut grads.attnet)?;
            let (_, dh) = d_in.split_at(model.attr_dim());
            let lg = lstm_backward(&model.seqnet, &cache.steps, &dh)?;
            grads.seqnet.axpy(1.0, &lg.params)?;
        }
        Fusion::SeqCentric => {
            let d = model.seqnet.hidden_size();
            let mut d_h = vec![Vector::zeros(d); cache.steps.len()];
            if let Some(last) = d_h.last_mut() {
                *last = d_emb.clone();
            }
            let lg = lstm_backward_seq(&model.seqnet, &cache.steps, &d_h, None)?;
            grads.seqnet.axpy(1.0, &lg.params)?;
            stack_backward(&model.attnet, act, &cache.att, &lg.d_h[0], &mut grads.attnet)?;
        }
    }
    Ok(())
}

pub fn mlas_embed(model: &MlasModel, record: &AttributedSequence) -> Result<Vector> {
    Ok(fusion_forward(model, record)?.0)
}

/// `D_Θ = ‖Θ(p_i) − Θ(p_j)‖₂`.
pub fn pair_distance(model: &MlasModel, left: &AttributedSequence, right: &AttributedSequence) -> Result<f64> {
    let a = mlas_embed(model, left)?;
    let b = mlas_embed(model, right)?;
    Ok(a.sub(&b)?.norm())
}

/// `½(1−ℓ)·D² + ½·ℓ·max(0, g−D)²`, with `ℓ = 1` marking a dissimilar pair.
pub fn contrastive_loss(dist: f64, label: u8, margin: f64) -> f64 {
    let l = label as f64;
    let hinge = (margin - dist).max(0.0);
    0.5 * (1.0 - l) * dist * dist + 0.5 * l * hinge * hinge
}

/// `∂L/∂D = (1−ℓ)·D − ℓ·max(0, g−D)`.
pub fn contrastive_loss_grad(dist: f64, label: u8, margin: f64) -> f64 {
    let l = label as f64;
    (1.0 - l) * dist - l * (margin - dist).max(0.0)
}

/// Pair loss and its gradient over the shared tower parameters.
pub fn pair_gradient(
    model: &MlasModel,
    left: &AttributedSequence,
    right: &AttributedSequence,
    label: u8,
) -> Result<(f64, MlasModel)> {
    let (ei, ci) = fusion_forward(model, left)?;
    let (ej, cj) = fusion_forward(model, right)?;
    let diff = ei.sub(&ej)?;
    let dist = diff.norm();
    let loss = contrastive_loss(dist, label, model.margin);
    let dl_dd = contrastive_loss_grad(dist, label, model.margin);
    let d_ei = match model.distance_grad {
        DistanceGrad::Exact if dist > 0.0 => diff.scale(dl_dd / dist),
        DistanceGrad::Exact => Vector::zeros(diff.len()),
        DistanceGrad::Surrogate => diff.map(|v| v * (1.0 - v)).scale(dl_dd),
    };
    let mut grads = model.zeros_like();
    fusion_backward(model, &ci, &d_ei, &mut grads)?;
    fusion_backward(model, &cj, &d_ei.scale(-1.0), &mut grads)?;
    Ok((loss, grads))
}

/// Triplet with both ids resolved to dataset positions.
type ResolvedPair = (usize, usize, u8);

pub(crate) fn resolve_pairs(dataset: &Dataset, triplets: &[FeedbackTriplet]) -> Result<Vec<ResolvedPair>> {
    let index: HashMap<&str, usize> = dataset.id_index();
    triplets
        .iter()
        .map(|t| {
            let find = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("feedback refers to unknown id {id:?}")))
            };
            if t.label > 1 {
                return config_err(format!("feedback label must be 0 or 1, got {}", t.label));
            }
            Ok((find(&t.left_id)?, find(&t.right_id)?, t.label))
        })
        .collect()
}

/// Mean contrastive loss over the given feedback.
pub fn mlas_mean_loss(model: &MlasModel, dataset: &Dataset, triplets: &[FeedbackTriplet]) -> Result<f64> {
    let pairs = resolve_pairs(dataset, triplets)?;
    if pairs.is_empty() {
        return config_err("no feedback pairs to evaluate");
    }
    let mut total = 0.0;
    for &(i, j, l) in &pairs {
        let d = pair_distance(model, &dataset.records[i], &dataset.records[j])?;
        total += contrastive_loss(d, l, model.margin);
    }
    let mean = total / pairs.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Numerical(format!("mean pair loss is {mean}")));
    }
    Ok(mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlasTrainConfig {
    pub lr: f64,
    /// Passes over the feedback set.
    pub epochs: usize,
    /// A pair whose loss moved less than this since its previous visit is
    /// skipped for the rest of the epoch.
    pub eps: f64,
}

impl Default for MlasTrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 20,
            eps: 1e-8,
        }
    }
}

/// Per-pair SGD through the shared tower. Pairs are visited in a seeded
/// shuffle each epoch.
pub fn mlas_train(
    model: &mut MlasModel,
    dataset: &Dataset,
    train: &[FeedbackTriplet],
    validation: Option<&[FeedbackTriplet]>,
    cfg: &MlasTrainConfig,
    rng: &mut Rng,
) -> Result<Vec<EpochLoss>> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return config_err(format!("learning rate must be > 0, got {}", cfg.lr));
    }
    let pairs = resolve_pairs(dataset, train)?;
    if pairs.is_empty() {
        return config_err("mlas training needs at least one feedback pair");
    }
    let mut previous = vec![f64::NAN; pairs.len()];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for &p in &order {
            let (i, j, l) = pairs[p];
            let (loss, grads) = pair_gradient(model, &dataset.records[i], &dataset.records[j], l)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("pair loss is {loss} in epoch {epoch}")));
            }
            let converged = (loss - previous[p]).abs() < cfg.eps;
            previous[p] = loss;
            if converged {
                continue;
            }
            sgd_update(model, &grads, cfg.lr)?;
        }
        let train_loss = mlas_mean_loss(model, dataset, train)?;
        let validation = match validation {
            Some(v) if !v.is_empty() => Some(mlas_mean_loss(model, dataset, v)?),
            _ => None,
        };
        history.push(EpochLoss {
            epoch,
            train: train_loss,
            validation,
        });
    }
    Ok(history)
}

/// Throwaway reconstruction head used for pre-training: an attribute decoder
/// `σ(W z + b)` and an item predictor `softmax(W z + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainHead {
    pub attr: DenseParams,
    pub items: DenseParams,
}

impl PretrainHead {
    pub fn init(rng: &mut Rng, model: &MlasModel) -> Self {
        let d = model.embedding_dim();
        Self {
            attr: DenseParams {
                w: init_glorot_uniform(rng, model.attr_dim(), d),
                b: Vector::zeros(model.attr_dim()),
            },
            items: DenseParams {
                w: init_glorot_uniform(rng, model.vocab_size(), d),
                b: Vector::zeros(model.vocab_size()),
            },
        }
    }
}

impl ParamSet for PretrainHead {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        self.attr.push_refs("head_attr", &mut out);
        self.items.push_refs("head_items", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.attr.push_muts(&mut out);
        self.items.push_muts(&mut out);
        out
    }
}

/// `ω_A · MSE(x, x̂) + (1−ω_A) · mean_t CE(item_t, ŷ)` and its gradients.
pub fn pretrain_gradient(
    model: &MlasModel,
    head: &PretrainHead,
    record: &AttributedSequence,
    omega_a: f64,
) -> Result<(f64, MlasModel, PretrainHead)> {
    let (z, cache) = fusion_forward(model, record)?;
    let mut g_head = head.zeros_like();
    let mut d_z = Vector::zeros(z.len());

    let (x_hat, ac) = dense_forward(&head.attr, Activation::Sigmoid, &z)?;
    let u = x_hat.len() as f64;
    let resid = x_hat.sub(&record.attributes)?;
    let mse = resid.norm_sq() / u;
    d_z.add_assign(&dense_backward(
        &head.attr,
        Activation::Sigmoid,
        &ac,
        &resid.scale(2.0 * omega_a / u),
        &mut g_head.attr,
    )?)?;

    let logits = crate::numerics::matvec(&head.items.w, &z)?.add(&head.items.b)?;
    let y = softmax_slice(logits.as_slice());
    let l = record.sequence.len() as f64;
    let mut ce = 0.0;
    let mut d_logits = Vector::from_raw(y.iter().map(|p| p * (1.0 - omega_a)).collect());
    for &item in &record.sequence {
        ce -= y[item].ln() / l;
        d_logits[item] -= (1.0 - omega_a) / l;
    }
    g_head.items.w.add_outer(&d_logits, &z)?;
    g_head.items.b.add_assign(&d_logits)?;
    d_z.add_assign(&head.items.w.tr_matvec(&d_logits)?)?;

    let mut g_model = model.zeros_like();
    fusion_backward(model, &cache, &d_z, &mut g_model)?;
    Ok((omega_a * mse + (1.0 - omega_a) * ce, g_model, g_head))
}

/// Reconstruction pre-training; the head is discarded afterwards. Returns
/// the mean pre-training loss per epoch.
pub fn mlas_pretrain(
    model: &mut MlasModel,
    dataset: &Dataset,
    omega_a: f64,
    epochs: usize,
    lr: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&omega_a) {
        return config_err(format!("omega_a must lie in [0, 1], got {omega_a}"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return config_err(format!("learning rate must be > 0, got {lr}"));
    }
    let mut head = PretrainHead::init(&mut rng.split(0), model);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for &k in &order {
            let (loss, gm, gh) = pretrain_gradient(model, &head, &dataset.records[k], omega_a)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("pre-training loss is {loss} in epoch {epoch}")));
            }
            total += loss;
            sgd_update(model, &gm, lr)?;
            sgd_update(&mut head, &gh, lr)?;
        }
        history.push(total / dataset.len().max(1) as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    fn record(id: &str, attrs: &[f64], seq: &[usize]) -> AttributedSequence {
        AttributedSequence::new(id, Vector::new(attrs.to_vec()).unwrap(), seq.to_vec())
    }

    fn random_record(rng: &mut Rng, id: &str, u: usize, r: usize, len: usize) -> AttributedSequence {
        let attrs: Vec<f64> = (0..u).map(|_| rng.uniform()).collect();
        let seq: Vec<usize> = (0..len).map(|_| rng.below(r)).collect();
        record(id, &attrs, &seq)
    }

    fn toy(fusion: Fusion, rng: &mut Rng) -> MlasModel {
        let cfg = MlasConfig {
            fusion,
            layers: 2,
            attr_hidden: 4,
            seq_hidden: 4,
            out_dim: 3,
            ..Default::default()
        };
        MlasModel::init(rng, 5, 6, &cfg).unwrap()
    }

    #[test]
    fn contrastive_values() {
        assert!((contrastive_loss(0.3, 0, 1.0) - 0.045).abs() < 1e-15);
        assert_eq!(contrastive_loss(1.2, 1, 1.0), 0.0);
        assert!((contrastive_loss(0.4, 1, 1.0) - 0.18).abs() < 1e-15);
        assert_eq!(contrastive_loss(1.0, 1, 1.0), 0.0);
    }

    #[test]
    fn balanced_zero_fusion_gives_half() {
        let mut m = toy(Fusion::Balanced, &mut Rng::new(0));
        if let Some(f) = &mut m.fuse {
            *f = DenseParams::zeros(f.out_dim(), f.in_dim());
        }
        let e = mlas_embed(&m, &record("a", &[0.1; 5], &[1, 2])).unwrap();
        assert_eq!(e.as_slice(), &[0.5; 3]);
    }

    #[test]
    fn embedding_widths() {
        let mut rng = Rng::new(1);
        let a = toy(Fusion::AttCentric, &mut rng);
        for len in [1, 4] {
            let r = random_record(&mut rng, "x", 5, 6, len);
            assert_eq!(mlas_embed(&a, &r).unwrap().len(), 4);
        }
        let bad = MlasConfig {
            fusion: Fusion::SeqCentric,
            attr_hidden: 3,
            seq_hidden: 4,
            ..Default::default()
        };
        assert!(MlasModel::zeros(5, 6, &bad).is_err());
    }

    #[test]
    fn distance_properties() {
        let mut rng = Rng::new(2);
        let m = toy(Fusion::Balanced, &mut rng);
        let a = random_record(&mut rng, "a", 5, 6, 3);
        let b = random_record(&mut rng, "b", 5, 6, 4);
        assert_eq!(pair_distance(&m, &a, &a).unwrap(), 0.0);
        assert_eq!(pair_distance(&m, &a, &b).unwrap(), pair_distance(&m, &b, &a).unwrap());
    }

    #[test]
    fn pair_gradients_match_finite_differences() {
        for fusion in [Fusion::Balanced, Fusion::AttCentric, Fusion::SeqCentric] {
            for seed in 0..4 {
                let mut rng = Rng::new(seed);
                let m = toy(fusion, &mut rng);
                let (la, lb) = (1 + rng.below(5), 1 + rng.below(5));
                let a = random_record(&mut rng, "a", 5, 6, la);
                let b = random_record(&mut rng, "b", 5, 6, lb);
                for label in [0, 1] {
                    let (_, grads) = pair_gradient(&m, &a, &b, label).unwrap();
                    let report = grad_check(&m, &grads, 1e-6, |p| {
                        Ok(contrastive_loss(pair_distance(p, &a, &b)?, label, p.margin))
                    })
                    .unwrap();
                    assert!(report.max_rel_error < 1e-4, "{fusion:?} seed {seed}: {report:?}");
                }
            }
        }
    }

    #[test]
    fn inactive_margin_gives_zero_gradient() {
        let mut rng = Rng::new(4);
        let mut m = toy(Fusion::Balanced, &mut rng);
        m.margin = 1e-9;
        let a = random_record(&mut rng, "a", 5, 6, 3);
        let b = random_record(&mut rng, "b", 5, 6, 3);
        let (loss, grads) = pair_gradient(&m, &a, &b, 1).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn pretrain_gradients_match_finite_differences() {
        let mut rng = Rng::new(6);
        let m = toy(Fusion::Balanced, &mut rng);
        let head = PretrainHead::init(&mut rng, &m);
        let r = random_record(&mut rng, "a", 5, 6, 4);
        let (_, gm, gh) = pretrain_gradient(&m, &head, &r, 0.3).unwrap();
        let rep = grad_check(&m, &gm, 1e-6, |p| Ok(pretrain_gradient(p, &head, &r, 0.3)?.0)).unwrap();
        assert!(rep.max_rel_error < 1e-4, "{rep:?}");
        let rep = grad_check(&head, &gh, 1e-6, |h| Ok(pretrain_gradient(&m, h, &r, 0.3)?.0)).unwrap();
        assert!(rep.max_rel_error < 1e-4, "{rep:?}");
    }

    #[test]
    fn omega_one_silences_item_head() {
        let mut rng = Rng::new(7);
        let m = toy(Fusion::Balanced, &mut rng);
        let head = PretrainHead::init(&mut rng, &m);
        let r = random_record(&mut rng, "a", 5, 6, 4);
        let (_, _, gh) = pretrain_gradient(&m, &head, &r, 1.0).unwrap();
        assert!(gh.items.w.as_slice().iter().all(|&g| g == 0.0));
        assert!(gh.items.b.iter().all(|&g| g == 0.0));
    }
}
