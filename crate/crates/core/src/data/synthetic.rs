//! Planted-class corpora.
//!
//! Every class owns an attribute prototype and a first-order Markov chain over
//! a subset of the vocabulary. Each chain state has one preferred successor
//! (weight [`PREFERRED_WEIGHT`]); the remaining mass is spread uniformly over
//! the class support, so item order carries class information.

use serde::{Deserialize, Serialize};

use super::{AttributedSequence, Dataset, Vocabulary};
use crate::error::{config_err, Result};
use crate::numerics::{Rng, Vector};

const PREFERRED_WEIGHT: f64 = 0.7;

/// Label given to planted outliers.
pub const OUTLIER_LABEL: &str = "outlier";

/// Which part of a record carries the class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSignal {
    #[default]
    Both,
    /// All classes share one chain; only attributes differ.
    AttributesOnly,
    /// All classes share one attribute prototype; only chains differ.
    SequenceOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub attr_dim: usize,
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of replacing each item / attribute with a uniform draw.
    pub noise: f64,
    /// Standard deviation of Gaussian jitter around attribute prototypes.
    pub attr_jitter: f64,
    pub signal: ClassSignal,
    /// The last `distractors` attribute columns carry no class signal: every
    /// record draws them uniformly from [0, 1].
    pub distractors: usize,
    /// Extra records labeled `outlier`, each with its own attribute prototype
    /// and uniformly random items.
    pub outliers: usize,
}

impl Default for SyntheticConfig {
    /// Desk-scale stand-in for the session-log corpora: 11 attributes, 288
    /// items, sequences averaging 18 steps.
    fn default() -> Self {
        Self {
            n_classes: 4,
            per_class: 50,
            attr_dim: 11,
            vocab_size: 288,
            min_len: 12,
            max_len: 24,
            noise: 0.1,
            attr_jitter: 0.05,
            signal: ClassSignal::Both,
            distractors: 0,
            outliers: 0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return config_err("n_classes must be >= 1");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return config_err(format!(
                "length range [{}, {}] is empty or admits empty sequences",
                self.min_len, self.max_len
            ));
        }
        if self.vocab_size < 2 {
            return config_err("vocab_size must be >= 2");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return config_err("noise must lie in [0, 1]");
        }
        if !(self.attr_jitter >= 0.0) {
            return config_err("attr_jitter must be >= 0");
        }
        if self.distractors > self.attr_dim {
            return config_err("distractors cannot exceed attr_dim");
        }
        Ok(())
    }
}

struct Chain {
    support: Vec<usize>,
    /// `preferred[k]` is the position in `support` that follows position `k`.
    preferred: Vec<usize>,
}

impl Chain {
    fn new(rng: &mut Rng, support: Vec<usize>) -> Self {
        let mut order: Vec<usize> = (0..support.len()).collect();
        rng.shuffle(&mut order);
        let mut preferred = vec![0; support.len()];
        for w in 0..order.len() {
            preferred[order[w]] = order[(w + 1) % order.len()];
        }
        Self { support, preferred }
    }

    fn sample(&self, rng: &mut Rng, len: usize) -> Vec<usize> {
        let n = self.support.len();
        let mut pos = rng.below(n);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.support[pos]);
            pos = if n == 1 || rng.bernoulli(PREFERRED_WEIGHT) {
                self.preferred[pos]
            } else {
                rng.below(n)
            };
        }
        out
    }
}

fn class_supports(rng: &mut Rng, n_classes: usize, r: usize) -> Vec<Vec<usize>> {
    let mut items: Vec<usize> = (0..r).collect();
    rng.shuffle(&mut items);
    if r >= 2 * n_classes {
        let chunk = r / n_classes;
        (0..n_classes)
            .map(|k| items[k * chunk..(k + 1) * chunk].to_vec())
            .collect()
    } else {
        let size = (r / 2).max(2);
        (0..n_classes)
            .map(|_| {
                rng.shuffle(&mut items);
                items[..size].to_vec()
            })
            .collect()
    }
}

/// Draws `n_classes × per_class` labeled records, grouped by class.
pub fn generate_synthetic(rng: &mut Rng, cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut proto_rng = rng.split(1);
    let mut sample_rng = rng.split(2);

    let shared_proto: Vec<f64> = (0..cfg.attr_dim).map(|_| proto_rng.uniform()).collect();
    let prototypes: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| match cfg.signal {
            ClassSignal::SequenceOnly => shared_proto.clone(),
            _ => (0..cfg.attr_dim).map(|_| proto_rng.uniform()).collect(),
        })
        .collect();
    let chains: Vec<Chain> = match cfg.signal {
        ClassSignal::AttributesOnly => {
            let shared = Chain::new(&mut proto_rng, (0..cfg.vocab_size).collect());
            (0..cfg.n_classes)
                .map(|_| Chain {
                    support: shared.support.clone(),
                    preferred: shared.preferred.clone(),
                })
                .collect()
        }
        _ => class_supports(&mut proto_rng, cfg.n_classes, cfg.vocab_size)
            .into_iter()
            .map(|s| Chain::new(&mut proto_rng, s))
            .collect(),
    };

    let mut records = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for k in 0..cfg.n_classes {
        for _ in 0..cfg.per_class {
            let informative = cfg.attr_dim - cfg.distractors;
            let attrs: Vec<f64> = prototypes[k]
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    if j >= informative || sample_rng.bernoulli(cfg.noise) {
                        sample_rng.uniform()
                    } else {
                        (p + cfg.attr_jitter * sample_rng.normal()).clamp(0.0, 1.0)
                    }
                })
                .collect();
            let len = cfg.min_len + sample_rng.below(cfg.max_len - cfg.min_len + 1);
            let mut seq = chains[k].sample(&mut sample_rng, len);
            for item in seq.iter_mut() {
                if sample_rng.bernoulli(cfg.noise) {
                    *item = sample_rng.below(cfg.vocab_size);
                }
            }
            let id = format!("s{:05}", records.len());
            records.push(
                AttributedSequence::new(id, Vector::new(attrs)?, seq).with_label(format!("c{k}")),
            );
        }
    }
    for _ in 0..cfg.outliers {
        let attrs: Vec<f64> = (0..cfg.attr_dim).map(|_| sample_rng.uniform()).collect();
        let len = cfg.min_len + sample_rng.below(cfg.max_len - cfg.min_len + 1);
        let seq = (0..len).map(|_| sample_rng.below(cfg.vocab_size)).collect();
        let id = format!("s{:05}", records.len());
        records.push(AttributedSequence::new(id, Vector::new(attrs)?, seq).with_label(OUTLIER_LABEL));
    }
    Dataset::new(Vocabulary::numbered(cfg.vocab_size)?, cfg.attr_dim, records, None)
}
