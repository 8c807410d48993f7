use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amas::{AmasConfig, AmasTrainConfig};
use crate::checkpoint::Framework;
use crate::data::{SyntheticConfig, OUTLIER_LABEL};
use crate::error::{Error, Result};
use crate::mlas::{MlasConfig, MlasTrainConfig};
use crate::nas::{NasConfig, NasTrainConfig};
use crate::olas::{OlasConfig, OlasTrainConfig};

/// Reconstruction pre-training run before MLAS metric learning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    /// 0 disables pre-training.
    pub epochs: usize,
    pub omega_a: f64,
    pub lr: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 0,
            omega_a: 0.5,
            lr: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Neighbour counts for the k-NN outlier sweep.
    pub k: Vec<usize>,
    pub min_cluster_size: Vec<usize>,
    /// Linking radius for density clustering. When absent, the median
    /// distance from each point to its `(min_cluster_size − 1)`-th nearest
    /// neighbour is used.
    pub radius: Option<f64>,
    /// Records with this label count as outliers; everything else as inliers.
    pub outlier_label: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: vec![5, 10],
            min_cluster_size: vec![5, 10],
            radius: None,
            outlier_label: OUTLIER_LABEL.to_string(),
        }
    }
}

/// Everything a run can be configured with. Loaded from TOML; unknown keys
/// are rejected. The resolved value is written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub framework: Framework,
    pub synthetic: SyntheticConfig,
    /// Feedback pairs written by `generate`, or derived from labels by
    /// `train` when no feedback file is given.
    pub feedback_pairs: usize,
    /// Share of training data (records or pairs) held out for validation.
    pub validation_fraction: f64,
    pub nas: NasConfig,
    pub nas_train: NasTrainConfig,
    pub mlas: MlasConfig,
    pub mlas_train: MlasTrainConfig,
    pub pretrain: PretrainConfig,
    pub olas: OlasConfig,
    pub olas_train: OlasTrainConfig,
    pub amas: AmasConfig,
    pub amas_train: AmasTrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            framework: Framework::Nas,
            synthetic: SyntheticConfig::default(),
            feedback_pairs: 200,
            validation_fraction: 0.2,
            nas: NasConfig::default(),
            nas_train: NasTrainConfig::default(),
            mlas: MlasConfig::default(),
            mlas_train: MlasTrainConfig::default(),
            pretrain: PretrainConfig::default(),
            olas: OlasConfig::default(),
            olas_train: OlasTrainConfig::default(),
            amas: AmasConfig::default(),
            amas_train: AmasTrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub framework: Option<Framework>,
    pub dim: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub margin: Option<f64>,
    pub omega_a: Option<f64>,
    pub lambda: Option<f64>,
    pub k: Option<Vec<usize>>,
    pub min_cluster_size: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// `dim`, `lr` and `epochs` land on the selected framework only. `dim`
    /// is the embedding width: NAS hidden size, MLAS/OLAS output width, and
    /// both AMAS hidden widths.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(f) = o.framework {
            self.framework = f;
        }
        if let Some(d) = o.dim {
            match self.framework {
                Framework::Nas => self.nas.hidden = d,
                Framework::Mlas => self.mlas.out_dim = d,
                Framework::Olas => self.olas.out_dim = d,
                Framework::Amas => {
                    self.amas.attr_hidden = d;
                    self.amas.lstm_hidden = d;
                }
            }
        }
        if let Some(lr) = o.lr {
            match self.framework {
                Framework::Nas => self.nas_train.lr = lr,
                Framework::Mlas => self.mlas_train.lr = lr,
                Framework::Olas => self.olas_train.lr = lr,
                Framework::Amas => self.amas_train.adam.rho = lr,
            }
        }
        if let Some(e) = o.epochs {
            match self.framework {
                Framework::Nas => self.nas_train.epochs = e,
                Framework::Mlas => self.mlas_train.epochs = e,
                Framework::Olas => self.olas_train.epochs = e,
                Framework::Amas => self.amas_train.epochs = e,
            }
        }
        if let Some(m) = o.margin {
            self.mlas.margin = m;
            self.olas.margin = m;
        }
        if let Some(w) = o.omega_a {
            self.pretrain.omega_a = w;
        }
        if let Some(l) = o.lambda {
            self.amas_train.lambda = l;
        }
        if let Some(k) = &o.k {
            self.eval.k = k.clone();
        }
        if let Some(m) = &o.min_cluster_size {
            self.eval.min_cluster_size = m.clone();
        }
    }

    /// Cheap checks that do not need any data.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.pretrain.omega_a) {
            return Err(Error::Config(format!(
                "omega_a must lie in [0, 1], got {}",
                self.pretrain.omega_a
            )));
        }
        if self.eval.k.iter().any(|&k| k == 0) {
            return Err(Error::Config("every k must be >= 1".into()));
        }
        if self.eval.min_cluster_size.iter().any(|&m| m < 2) {
            return Err(Error::Config("every min_cluster_size must be >= 2".into()));
        }
        if let Some(r) = self.eval.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("radius must be > 0, got {r}")));
            }
        }
        // The TOML writer cannot represent integers above i64::MAX.
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must be <= {}", i64::MAX)));
        }
        Ok(())
    }
}
