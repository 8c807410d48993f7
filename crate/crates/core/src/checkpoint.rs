//! Model persistence.
//!
//! Layout: the 8-byte magic `ATSQCKPT`, a little-endian `u32` format version,
//! a little-endian `u64` header length, the UTF-8 JSON header, then every
//! tensor as little-endian `f64` in [`ParamSet`] order. The header names each
//! tensor with its shape and offset into the blob, so the file is inspectable
//! without this crate and reloads bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::amas::{AmasConfig, AmasModel};
use crate::data::{AttributeSchema, Dataset, Vocabulary};
use crate::error::{Error, Result};
use crate::mlas::{MlasConfig, MlasModel};
use crate::nas::{NasConfig, NasModel};
use crate::numerics::ParamSet;
use crate::olas::{OlasConfig, OlasModel};

pub const MAGIC: &[u8; 8] = b"ATSQCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Nas,
    Mlas,
    Olas,
    Amas,
}

impl Framework {
    pub fn name(self) -> &'static str {
        match self {
            Framework::Nas => "nas",
            Framework::Mlas => "mlas",
            Framework::Olas => "olas",
            Framework::Amas => "amas",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Nas(NasModel),
    Mlas(MlasModel),
    Olas(OlasModel),
    Amas(AmasModel),
}

impl AnyModel {
    pub fn framework(&self) -> Framework {
        match self {
            AnyModel::Nas(_) => Framework::Nas,
            AnyModel::Mlas(_) => Framework::Mlas,
            AnyModel::Olas(_) => Framework::Olas,
            AnyModel::Amas(_) => Framework::Amas,
        }
    }

    fn hyperparameters(&self) -> Result<Value> {
        let v = match self {
            AnyModel::Nas(m) => serde_json::to_value(m.config()),
            AnyModel::Mlas(m) => serde_json::to_value(m.config()),
            AnyModel::Olas(m) => serde_json::to_value(m.config()),
            AnyModel::Amas(m) => serde_json::to_value(m.config()),
        };
        v.map_err(|e| Error::Checkpoint(e.to_string()))
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            AnyModel::Nas(m) => (m.attr_dim(), m.vocab_size()),
            AnyModel::Mlas(m) => (m.attr_dim(), m.vocab_size()),
            AnyModel::Olas(m) => (m.attr_dim(), m.vocab_size()),
            AnyModel::Amas(m) => (m.attr_dim(), m.vocab_size()),
        }
    }

    fn tensor_meta(&self) -> Vec<TensorMeta> {
        let refs = match self {
            AnyModel::Nas(m) => m.tensors(),
            AnyModel::Mlas(m) => m.tensors(),
            AnyModel::Olas(m) => m.tensors(),
            AnyModel::Amas(m) => m.tensors(),
        };
        let mut offset = 0;
        refs.into_iter()
            .map(|t| {
                let meta = TensorMeta {
                    name: t.name,
                    shape: [t.shape.0, t.shape.1],
                    offset,
                };
                offset += t.data.len();
                meta
            })
            .collect()
    }

    fn flatten(&self) -> Vec<f64> {
        match self {
            AnyModel::Nas(m) => m.flatten(),
            AnyModel::Mlas(m) => m.flatten(),
            AnyModel::Olas(m) => m.flatten(),
            AnyModel::Amas(m) => m.flatten(),
        }
    }

    fn load_values(&mut self, values: &[f64]) -> Result<()> {
        let tensors = match self {
            AnyModel::Nas(m) => m.tensors_mut(),
            AnyModel::Mlas(m) => m.tensors_mut(),
            AnyModel::Olas(m) => m.tensors_mut(),
            AnyModel::Amas(m) => m.tensors_mut(),
        };
        let mut at = 0;
        for t in tensors {
            let n = t.len();
            let src = values
                .get(at..at + n)
                .ok_or_else(|| Error::Checkpoint("tensor blob is shorter than the header says".into()))?;
            t.copy_from_slice(src);
            at += n;
        }
        if at != values.len() {
            return Err(Error::Checkpoint("tensor blob is longer than the header says".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorMeta {
    pub name: String,
    pub shape: [usize; 2],
    /// Offset into the blob, counted in `f64` values.
    pub offset: usize,
}

/// Vocabulary and attribute layout needed to re-encode raw records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingInfo {
    pub vocab: Vocabulary,
    pub attr_dim: usize,
    pub schema: Option<AttributeSchema>,
}

impl EncodingInfo {
    pub fn of(dataset: &Dataset) -> Self {
        Self {
            vocab: dataset.vocab.clone(),
            attr_dim: dataset.attr_dim,
            schema: dataset.schema.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub framework: Framework,
    pub hyperparameters: Value,
    pub encoding: EncodingInfo,
    /// Class names of a classifier, in output order.
    pub classes: Option<Vec<String>>,
    pub tensors: Vec<TensorMeta>,
    pub n_values: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: AnyModel,
    pub encoding: EncodingInfo,
}

impl Checkpoint {
    pub fn new(model: AnyModel, encoding: EncodingInfo) -> Result<Self> {
        let (attr_dim, vocab_size) = model.dims();
        if attr_dim != encoding.attr_dim || vocab_size != encoding.vocab.len() {
            return Err(Error::Checkpoint(format!(
                "model expects {attr_dim} attributes and {vocab_size} items, encoding has {} and {}",
                encoding.attr_dim,
                encoding.vocab.len()
            )));
        }
        Ok(Self { model, encoding })
    }

    pub fn header(&self) -> Result<Header> {
        let values = self.model.flatten();
        Ok(Header {
            framework: self.model.framework(),
            hyperparameters: self.model.hyperparameters()?,
            encoding: self.encoding.clone(),
            classes: match &self.model {
                AnyModel::Amas(m) => Some(m.classes.clone()),
                _ => None,
            },
            tensors: self.model.tensor_meta(),
            n_values: values.len(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let values = self.model.flatten();
        let mut out = Vec::with_capacity(20 + header.len() + 8 * values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, blob) = split_header(bytes)?;
        if blob.len() != 8 * header.n_values {
            return Err(Error::Checkpoint(format!(
                "expected {} tensor values, found {} bytes",
                header.n_values,
                blob.len()
            )));
        }
        let values: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let enc = &header.encoding;
        let (u, r) = (enc.attr_dim, enc.vocab.len());
        let hp = header.hyperparameters.clone();
        let parse = |e: serde_json::Error| Error::Checkpoint(format!("hyperparameters: {e}"));
        let mut model = match header.framework {
            Framework::Nas => AnyModel::Nas(NasModel::zeros(u, r, &serde_json::from_value::<NasConfig>(hp).map_err(parse)?)?),
            Framework::Mlas => AnyModel::Mlas(MlasModel::zeros(u, r, &serde_json::from_value::<MlasConfig>(hp).map_err(parse)?)?),
            Framework::Olas => AnyModel::Olas(OlasModel::zeros(u, r, &serde_json::from_value::<OlasConfig>(hp).map_err(parse)?)?),
            Framework::Amas => {
                let classes = header
                    .classes
                    .clone()
                    .ok_or_else(|| Error::Checkpoint("classifier checkpoint without classes".into()))?;
                let cfg: AmasConfig = serde_json::from_value(hp).map_err(parse)?;
                AnyModel::Amas(AmasModel::zeros(u, r, classes, &cfg)?)
            }
        };
        if model.tensor_meta() != header.tensors {
            return Err(Error::Checkpoint(
                "tensor names or shapes do not match the stored hyperparameters".into(),
            ));
        }
        model.load_values(&values)?;
        Ok(Self {
            model,
            encoding: header.encoding,
        })
    }

    /// Contents of the human-readable sidecar written by [`Checkpoint::save`].
    pub fn sidecar_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec_pretty(&self.encoding).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?)?;
        fs::write(sidecar_path(path), self.sidecar_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// `model.ckpt` → `model.ckpt.encoding.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".encoding.json");
    PathBuf::from(name)
}

fn split_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not an attrseq checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let end = 20usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("header runs past the end of the file".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[20..end]).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    Ok((header, &bytes[end..]))
}

/// Reads only the header.
pub fn read_header(path: impl AsRef<Path>) -> Result<Header> {
    Ok(split_header(&fs::read(path)?)?.0)
}
