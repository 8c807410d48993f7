//! One-shot classification of attributed sequences.
//!
//! CoreNet maps a record to a feature `p = tanh(W_p(α_m ⊕ h^(t)) + b_p)`,
//! where `α_m` is the output of a stack of tanh layers over the attributes and
//! `h^(t)` the last hidden state of an LSTM over the items. The network is
//! trained on similar/dissimilar pairs from seen classes; records of unseen
//! classes are then labeled by their nearest entry in a one-per-class gallery.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AttributedSequence, Dataset, FeedbackTriplet};
use crate::error::{config_err, dim_err, Error, Result};
use crate::history::EpochLoss;
use crate::mlas::{resolve_pairs, DistanceGrad};
use crate::numerics::{
    dense_backward, dense_forward, init_glorot_uniform, lstm_backward, lstm_run, sgd_update, stack_backward,
    stack_forward, Activation, DenseCache, DenseParams, LstmCellParams, LstmStep, ParamSet, Rng, TensorRef,
    Vector,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    Manhattan,
}

impl Distance {
    pub fn between(self, a: &Vector, b: &Vector) -> Result<f64> {
        let diff = a.sub(b)?;
        Ok(match self {
            Distance::Euclidean => diff.norm(),
            Distance::Manhattan => diff.iter().map(|v| v.abs()).sum(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OlasConfig {
    /// Depth `m` of the attribute stack.
    pub layers: usize,
    /// Width `n_m` of every attribute layer.
    pub fc_hidden: usize,
    /// LSTM width `n_l`.
    pub lstm_hidden: usize,
    /// Feature width `n`.
    pub out_dim: usize,
    /// Contrastive margin `ξ`.
    pub margin: f64,
    pub distance: Distance,
    pub distance_grad: DistanceGrad,
}

impl Default for OlasConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            fc_hidden: 50,
            lstm_hidden: 50,
            out_dim: 50,
            margin: 1.0,
            distance: Distance::Euclidean,
            distance_grad: DistanceGrad::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlasModel {
    pub fc: Vec<DenseParams>,
    pub lstm: LstmCellParams,
    /// `W_p, b_p`.
    pub head: DenseParams,
    pub margin: f64,
    pub distance: Distance,
    pub distance_grad: DistanceGrad,
}

impl OlasModel {
    pub fn zeros(attr_dim: usize, vocab_size: usize, cfg: &OlasConfig) -> Result<Self> {
        if cfg.layers == 0 || cfg.fc_hidden == 0 || cfg.lstm_hidden == 0 || cfg.out_dim == 0 {
            return config_err("olas layer count and widths must be >= 1");
        }
        if !(cfg.margin > 0.0 && cfg.margin.is_finite()) {
            return config_err(format!("margin must be > 0, got {}", cfg.margin));
        }
        let fc = (0..cfg.layers)
            .map(|m| DenseParams::zeros(cfg.fc_hidden, if m == 0 { attr_dim } else { cfg.fc_hidden }))
            .collect();
        Ok(Self {
            fc,
            lstm: LstmCellParams::zeros(vocab_size, cfg.lstm_hidden),
            head: DenseParams::zeros(cfg.out_dim, cfg.fc_hidden + cfg.lstm_hidden),
            margin: cfg.margin,
            distance: cfg.distance,
            distance_grad: cfg.distance_grad,
        })
    }

    pub fn init(rng: &mut Rng, attr_dim: usize, vocab_size: usize, cfg: &OlasConfig) -> Result<Self> {
        let mut m = Self::zeros(attr_dim, vocab_size, cfg)?;
        for layer in m.fc.iter_mut().chain(std::iter::once(&mut m.head)) {
            layer.w = init_glorot_uniform(rng, layer.out_dim(), layer.in_dim());
        }
        m.lstm = LstmCellParams::init(rng, vocab_size, cfg.lstm_hidden, true);
        Ok(m)
    }

    pub fn config(&self) -> OlasConfig {
        OlasConfig {
            layers: self.fc.len(),
            fc_hidden: self.fc[0].out_dim(),
            lstm_hidden: self.lstm.hidden_size(),
            out_dim: self.head.out_dim(),
            margin: self.margin,
            distance: self.distance,
            distance_grad: self.distance_grad,
        }
    }

    pub fn attr_dim(&self) -> usize {
        self.fc[0].in_dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.lstm.input_size()
    }

    pub fn feature_dim(&self) -> usize {
        self.head.out_dim()
    }
}

impl ParamSet for OlasModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (m, layer) in self.fc.iter().enumerate() {
            layer.push_refs(&format!("fc{m}"), &mut out);
        }
        self.lstm.push_refs("lstm", &mut out);
        self.head.push_refs("head", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in self.fc.iter_mut() {
            layer.push_muts(&mut out);
        }
        self.lstm.push_muts(&mut out);
        self.head.push_muts(&mut out);
        out
    }
}

#[derive(Clone, Debug)]
pub struct CoreNetCache {
    fc: Vec<DenseCache>,
    steps: Vec<LstmStep>,
    head: DenseCache,
}

/// Feature `p` of one record.
pub fn corenet_forward(model: &OlasModel, record: &AttributedSequence) -> Result<(Vector, CoreNetCache)> {
    record.require_nonempty()?;
    if record.attributes.len() != model.attr_dim() {
        return dim_err(format!(
            "record has {} attributes, model expects {}",
            record.attributes.len(),
            model.attr_dim()
        ));
    }
    let inputs = record.encode(model.vocab_size())?.steps();
    let (alpha, fc) = stack_forward(&model.fc, Activation::Tanh, &record.attributes)?;
    let steps = lstm_run(&model.lstm, &inputs)?;
    let h = &steps[steps.len() - 1].next.h;
    let (p, head) = dense_forward(&model.head, Activation::Tanh, &alpha.concat(h))?;
    Ok((p, CoreNetCache { fc, steps, head }))
}

/// Accumulates `∂/∂Ω` of `d_p · p` into `grads`.
pub fn corenet_backward(model: &OlasModel, cache: &CoreNetCache, d_p: &Vector, grads: &mut OlasModel) -> Result<()> {
    let d_in = dense_backward(&model.head, Activation::Tanh, &cache.head, d_p, &mut grads.head)?;
    let (d_alpha, d_h) = d_in.split_at(model.fc.last().map_or(0, DenseParams::out_dim));
    stack_backward(&model.fc, Activation::Tanh, &cache.fc, &d_alpha, &mut grads.fc)?;
    let lg = lstm_backward(&model.lstm, &cache.steps, &d_h)?;
    grads.lstm.axpy(1.0, &lg.params)
}

pub fn olas_feature(model: &OlasModel, record: &AttributedSequence) -> Result<Vector> {
    Ok(corenet_forward(model, record)?.0)
}

/// `½ℓ·max(0, ξ−d)² + ½(1−ℓ)·d²`, with `ℓ = 1` for a dissimilar pair.
pub fn olas_loss(d: f64, label: u8, margin: f64) -> f64 {
    let l = label as f64;
    let hinge = (margin - d).max(0.0);
    0.5 * l * hinge * hinge + 0.5 * (1.0 - l) * d * d
}

fn olas_loss_grad(d: f64, label: u8, margin: f64) -> f64 {
    let l = label as f64;
    -l * (margin - d).max(0.0) + (1.0 - l) * d
}

pub fn olas_pair_loss(model: &OlasModel, left: &AttributedSequence, right: &AttributedSequence, label: u8) -> Result<f64> {
    let a = olas_feature(model, left)?;
    let b = olas_feature(model, right)?;
    Ok(olas_loss(model.distance.between(&a, &b)?, label, model.margin))
}

/// Pair loss and its gradient, both branches sharing one set of weights.
pub fn olas_pair_gradient(
    model: &OlasModel,
    left: &AttributedSequence,
    right: &AttributedSequence,
    label: u8,
) -> Result<(f64, OlasModel)> {
    let (pi, ci) = corenet_forward(model, left)?;
    let (pj, cj) = corenet_forward(model, right)?;
    let diff = pi.sub(&pj)?;
    let d = model.distance.between(&pi, &pj)?;
    let loss = olas_loss(d, label, model.margin);
    let dl_dd = olas_loss_grad(d, label, model.margin);
    let mut grads = model.zeros_like();
    if dl_dd == 0.0 {
        return Ok((loss, grads));
    }
    let d_pi = match (model.distance_grad, model.distance) {
        (DistanceGrad::Surrogate, _) => diff.map(|v| v * (1.0 - v)).scale(dl_dd),
        (DistanceGrad::Exact, Distance::Euclidean) if d > 0.0 => diff.scale(dl_dd / d),
        (DistanceGrad::Exact, Distance::Euclidean) => Vector::zeros(diff.len()),
        (DistanceGrad::Exact, Distance::Manhattan) => diff.map(|v| dl_dd * v.signum() * (v != 0.0) as u8 as f64),
    };
    corenet_backward(model, &ci, &d_pi, &mut grads)?;
    corenet_backward(model, &cj, &d_pi.scale(-1.0), &mut grads)?;
    Ok((loss, grads))
}

pub fn olas_mean_loss(model: &OlasModel, dataset: &Dataset, triplets: &[FeedbackTriplet]) -> Result<f64> {
    let pairs = resolve_pairs(dataset, triplets)?;
    if pairs.is_empty() {
        return config_err("no pairs to evaluate");
    }
    let mut total = 0.0;
    for &(i, j, l) in &pairs {
        total += olas_pair_loss(model, &dataset.records[i], &dataset.records[j], l)?;
    }
    let mean = total / pairs.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Numerical(format!("mean pair loss is {mean}")));
    }
    Ok(mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OlasTrainConfig {
    pub lr: f64,
    /// `φ`, passes over the pair set.
    pub epochs: usize,
    /// A pair whose loss moved less than this since its previous visit gets
    /// no update that epoch.
    pub eps: f64,
}

impl Default for OlasTrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 20,
            eps: 1e-8,
        }
    }
}

pub fn olas_train(
    model: &mut OlasModel,
    dataset: &Dataset,
    train: &[FeedbackTriplet],
    validation: Option<&[FeedbackTriplet]>,
    cfg: &OlasTrainConfig,
    rng: &mut Rng,
) -> Result<Vec<EpochLoss>> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return config_err(format!("learning rate must be > 0, got {}", cfg.lr));
    }
    let pairs = resolve_pairs(dataset, train)?;
    if pairs.is_empty() {
        return config_err("olas training needs at least one pair");
    }
    let mut previous = vec![f64::NAN; pairs.len()];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for &p in &order {
            let (i, j, l) = pairs[p];
            let (loss, grads) = olas_pair_gradient(model, &dataset.records[i], &dataset.records[j], l)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("pair loss is {loss} in epoch {epoch}")));
            }
            let settled = (loss - previous[p]).abs() < cfg.eps;
            previous[p] = loss;
            if !settled {
                sgd_update(model, &grads, cfg.lr)?;
            }
        }
        let validation = match validation {
            Some(v) if !v.is_empty() => Some(olas_mean_loss(model, dataset, v)?),
            _ => None,
        };
        history.push(EpochLoss {
            epoch,
            train: olas_mean_loss(model, dataset, train)?,
            validation,
        });
    }
    Ok(history)
}

/// One labeled example per class.
#[derive(Clone, Debug, PartialEq)]
pub struct Gallery {
    entries: Vec<(AttributedSequence, String)>,
}

impl Gallery {
    pub fn new(entries: Vec<(AttributedSequence, String)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (_, label) in &entries {
            if !seen.insert(label.as_str()) {
                return config_err(format!("gallery holds class {label:?} twice"));
            }
        }
        Ok(Self { entries })
    }

    /// Every record must carry a label, and labels must be unique.
    pub fn from_records(records: &[AttributedSequence]) -> Result<Self> {
        let entries = records
            .iter()
            .map(|r| match &r.label {
                Some(l) => Ok((r.clone(), l.clone())),
                None => config_err(format!("gallery record {:?} has no label", r.id)),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// The first record of each class in dataset order.
    pub fn first_per_class(dataset: &Dataset) -> Result<Self> {
        let mut seen = HashSet::new();
        let picked: Vec<_> = dataset
            .records
            .iter()
            .filter(|r| r.label.as_ref().is_some_and(|l| seen.insert(l.clone())))
            .cloned()
            .collect();
        Self::from_records(&picked)
    }

    /// One uniformly drawn record per class, classes in sorted order.
    pub fn sample_per_class(dataset: &Dataset, rng: &mut Rng) -> Result<Self> {
        let mut by_class: BTreeMap<&str, Vec<&AttributedSequence>> = BTreeMap::new();
        for r in &dataset.records {
            if let Some(l) = &r.label {
                by_class.entry(l).or_default().push(r);
            }
        }
        let picked: Vec<_> = by_class
            .values()
            .map(|members| members[rng.below(members.len())].clone())
            .collect();
        Self::from_records(&picked)
    }

    pub fn entries(&self) -> &[(AttributedSequence, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> HashSet<&str> {
        self.entries.iter().map(|(r, _)| r.id.as_str()).collect()
    }
}

/// Gallery features computed once for a fixed model.
#[derive(Clone, Debug)]
pub struct GalleryFeatures {
    labels: Vec<String>,
    features: Vec<Vector>,
    distance: Distance,
}

impl GalleryFeatures {
    pub fn new(model: &OlasModel, gallery: &Gallery) -> Result<Self> {
        Self::with(gallery, model.distance, |r| olas_feature(model, r))
    }

    /// Features from any record encoder, e.g. an unsupervised embedding.
    pub fn with(
        gallery: &Gallery,
        distance: Distance,
        encode: impl Fn(&AttributedSequence) -> Result<Vector>,
    ) -> Result<Self> {
        if gallery.is_empty() {
            return config_err("gallery is empty");
        }
        let features = gallery.entries.iter().map(|(r, _)| encode(r)).collect::<Result<_>>()?;
        Ok(Self {
            labels: gallery.entries.iter().map(|(_, l)| l.clone()).collect(),
            features,
            distance,
        })
    }

    /// Label of the nearest entry. Only an exact tie keeps the earlier entry.
    pub fn nearest(&self, feature: &Vector) -> Result<&str> {
        let mut best = f64::INFINITY;
        let mut at = 0;
        for (g, f) in self.features.iter().enumerate() {
            let d = self.distance.between(feature, f)?;
            if d < best {
                best = d;
                at = g;
            }
        }
        Ok(&self.labels[at])
    }
}

pub fn oneshot_label(model: &OlasModel, gallery: &Gallery, query: &AttributedSequence) -> Result<String> {
    let gf = GalleryFeatures::new(model, gallery)?;
    Ok(gf.nearest(&olas_feature(model, query)?)?.to_string())
}

/// Labels for many queries against one gallery, in query order.
pub fn oneshot_label_all(model: &OlasModel, gallery: &Gallery, queries: &[AttributedSequence]) -> Result<Vec<String>> {
    let gf = GalleryFeatures::new(model, gallery)?;
    queries
        .par_iter()
        .map(|q| Ok(gf.nearest(&olas_feature(model, q)?)?.to_string()))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassTally {
    pub correct: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneShotReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<String, ClassTally>,
    pub n_queries: usize,
}

pub fn oneshot_report(predicted: &[String], queries: &[AttributedSequence]) -> Result<OneShotReport> {
    if queries.is_empty() {
        return config_err("no queries to evaluate");
    }
    let mut per_class: BTreeMap<String, ClassTally> = BTreeMap::new();
    let mut correct = 0;
    for (q, p) in queries.iter().zip(predicted) {
        let truth = q
            .label
            .as_ref()
            .ok_or_else(|| Error::Config(format!("query {:?} has no label", q.id)))?;
        let tally = per_class.entry(truth.clone()).or_default();
        tally.total += 1;
        if truth == p {
            tally.correct += 1;
            correct += 1;
        }
    }
    Ok(OneShotReport {
        accuracy: correct as f64 / queries.len() as f64,
        per_class,
        n_queries: queries.len(),
    })
}

pub fn oneshot_eval(model: &OlasModel, gallery: &Gallery, queries: &[AttributedSequence]) -> Result<OneShotReport> {
    let predicted = oneshot_label_all(model, gallery, queries)?;
    oneshot_report(&predicted, queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    fn record(id: &str, attrs: &[f64], seq: &[usize]) -> AttributedSequence {
        AttributedSequence::new(id, Vector::new(attrs.to_vec()).unwrap(), seq.to_vec())
    }

    fn random_record(rng: &mut Rng, id: &str, u: usize, r: usize, len: usize) -> AttributedSequence {
        let attrs: Vec<f64> = (0..u).map(|_| rng.normal()).collect();
        let seq: Vec<usize> = (0..len).map(|_| rng.below(r)).collect();
        record(id, &attrs, &seq)
    }

    fn toy(rng: &mut Rng) -> OlasModel {
        let cfg = OlasConfig {
            layers: 3,
            fc_hidden: 4,
            lstm_hidden: 3,
            out_dim: 5,
            ..Default::default()
        };
        OlasModel::init(rng, 6, 5, &cfg).unwrap()
    }

    #[test]
    fn zero_params_give_zero_feature() {
        let m = OlasModel::zeros(3, 4, &OlasConfig { out_dim: 7, ..Default::default() }).unwrap();
        let p = olas_feature(&m, &record("a", &[1.0, 2.0, 3.0], &[0, 3])).unwrap();
        assert_eq!(p.as_slice(), &[0.0; 7]);
    }

    #[test]
    fn scalar_hand_trace() {
        // m = 1, n = 1, one LSTM unit, one item from a vocabulary of one.
        let cfg = OlasConfig {
            layers: 1,
            fc_hidden: 1,
            lstm_hidden: 1,
            out_dim: 1,
            ..Default::default()
        };
        let mut m = OlasModel::zeros(1, 1, &cfg).unwrap();
        m.fc[0].w.set(0, 0, 0.5);
        m.fc[0].b[0] = 0.1;
        m.lstm.w_c.set(0, 0, 1.0);
        m.head.w.set(0, 0, 2.0);
        m.head.w.set(0, 1, -1.0);
        m.head.b[0] = 0.3;
        let p = olas_feature(&m, &record("a", &[2.0], &[0])).unwrap();

        let alpha = (0.5f64 * 2.0 + 0.1).tanh();
        // Zero gate weights: every gate is σ(0) = ½, and c = ½·tanh(1).
        let c = 0.5 * 1.0f64.tanh();
        let h = 0.5 * c.tanh();
        let expected = (2.0 * alpha - h + 0.3).tanh();
        assert!((p[0] - expected).abs() < 1e-14, "{} vs {expected}", p[0]);
    }

    #[test]
    fn loss_values() {
        assert_eq!(olas_loss(0.0, 0, 1.0), 0.0);
        assert_eq!(olas_loss(1.3, 1, 1.0), 0.0);
        assert_eq!(olas_loss(1.0, 1, 1.0), 0.0);
        assert!((olas_loss(0.5, 1, 1.0) - 0.125).abs() < 1e-15);
        assert!((olas_loss(0.4, 0, 1.0) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn identical_similar_pair_is_free() {
        let mut rng = Rng::new(0);
        let m = toy(&mut rng);
        let a = random_record(&mut rng, "a", 6, 5, 4);
        assert_eq!(olas_pair_loss(&m, &a, &a, 0).unwrap(), 0.0);
    }

    #[test]
    fn pair_gradients_match_finite_differences() {
        for distance in [Distance::Euclidean, Distance::Manhattan] {
            for seed in 0..5 {
                let mut rng = Rng::new(seed);
                let mut m = toy(&mut rng);
                m.distance = distance;
                m.margin = 4.0;
                let (la, lb) = (1 + rng.below(5), 1 + rng.below(5));
                let a = random_record(&mut rng, "a", 6, 5, la);
                let b = random_record(&mut rng, "b", 6, 5, lb);
                for label in [0, 1] {
                    let (_, g) = olas_pair_gradient(&m, &a, &b, label).unwrap();
                    let r = grad_check(&m, &g, 1e-6, |q: &OlasModel| olas_pair_loss(q, &a, &b, label)).unwrap();
                    assert!(r.max_rel_error < 1e-4, "{distance:?} seed {seed} label {label}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn margin_inactive_gradient_is_zero() {
        let mut rng = Rng::new(4);
        let mut m = toy(&mut rng);
        let a = random_record(&mut rng, "a", 6, 5, 3);
        let b = random_record(&mut rng, "b", 6, 5, 2);
        let d = Distance::Euclidean.between(&olas_feature(&m, &a).unwrap(), &olas_feature(&m, &b).unwrap()).unwrap();
        assert!(d > 0.0);
        m.margin = d * 0.9;
        let (loss, g) = olas_pair_gradient(&m, &a, &b, 1).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gallery_rules() {
        let a = record("a", &[0.0], &[0]).with_label("x");
        let b = record("b", &[1.0], &[0]).with_label("x");
        assert!(Gallery::from_records(&[a.clone(), b]).is_err());
        assert!(Gallery::from_records(&[record("c", &[0.0], &[0])]).is_err());
        let m = OlasModel::zeros(1, 1, &OlasConfig::default()).unwrap();
        let empty = Gallery::new(vec![]).unwrap();
        assert!(matches!(oneshot_label(&m, &empty, &a), Err(Error::Config(_))));
        let single = Gallery::from_records(&[a.clone()]).unwrap();
        assert_eq!(oneshot_label(&m, &single, &record("q", &[9.0], &[0])).unwrap(), "x");
    }

    #[test]
    fn labeling_matches_brute_force_argmin() {
        let mut rng = Rng::new(11);
        let m = toy(&mut rng);
        let entries: Vec<_> = (0..4)
            .map(|k| random_record(&mut rng, &format!("g{k}"), 6, 5, 3).with_label(format!("c{k}")))
            .collect();
        let gallery = Gallery::from_records(&entries).unwrap();
        let queries: Vec<_> = (0..30)
            .map(|k| {
                let len = 1 + rng.below(4);
                random_record(&mut rng, &format!("q{k}"), 6, 5, len)
            })
            .collect();
        let got = oneshot_label_all(&m, &gallery, &queries).unwrap();
        for (q, label) in queries.iter().zip(&got) {
            let pq = olas_feature(&m, q).unwrap();
            let dists: Vec<f64> = entries
                .iter()
                .map(|g| olas_feature(&m, g).unwrap().sub(&pq).unwrap().norm())
                .collect();
            let best = (0..4).min_by(|&i, &j| dists[i].partial_cmp(&dists[j]).unwrap()).unwrap();
            assert_eq!(label, &format!("c{best}"));
        }
    }

    #[test]
    fn gallery_against_itself_is_perfect() {
        let mut rng = Rng::new(12);
        let m = toy(&mut rng);
        let entries: Vec<_> = (0..5)
            .map(|k| random_record(&mut rng, &format!("g{k}"), 6, 5, 3).with_label(format!("c{k}")))
            .collect();
        let gallery = Gallery::from_records(&entries).unwrap();
        let report = oneshot_eval(&m, &gallery, &entries).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.n_queries, 5);
        assert!(report.per_class.values().all(|t| t.correct == 1 && t.total == 1));

        // Swapping labels between the first two entries makes both wrong.
        let mut swapped = entries.clone();
        swapped[0].label = Some("c1".into());
        swapped[1].label = Some("c0".into());
        let report = oneshot_eval(&m, &gallery, &swapped[..2]).unwrap();
        assert_eq!(report.accuracy, 0.0);
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let mut rng = Rng::new(13);
        let mut m = toy(&mut rng);
        let before = m.clone();
        let records: Vec<_> = (0..4)
            .map(|k| random_record(&mut rng, &format!("r{k}"), 6, 5, 2).with_label(format!("c{}", k % 2)))
            .collect();
        let ds = Dataset::new(crate::data::Vocabulary::numbered(5).unwrap(), 6, records, None).unwrap();
        let fb = crate::data::make_feedback(&ds, &mut rng, 4).unwrap();
        let cfg = OlasTrainConfig { epochs: 0, ..Default::default() };
        let h = olas_train(&mut m, &ds, &fb, None, &cfg, &mut rng).unwrap();
        assert!(h.is_empty());
        assert_eq!(m, before);
    }
}
