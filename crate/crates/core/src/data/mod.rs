//! Attributed-sequence records, vocabularies, one-hot encoding, feedback
//! pairs, dataset splits, synthetic corpora and JSONL ingestion.

mod feedback;
mod jsonl;
mod schema;
mod synthetic;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::{Matrix, Vector};

pub use feedback::{
    make_feedback, split_classes_for_oneshot, split_slice, split_train_validation, FeedbackTriplet,
};
pub use jsonl::{
    dataset_jsonl, feedback_jsonl, load_feedback, load_jsonl, load_jsonl_with, parse_jsonl, write_dataset_jsonl, write_feedback_jsonl,
};
pub use schema::{AttributeColumn, AttributeSchema};
pub use synthetic::{generate_synthetic, ClassSignal, SyntheticConfig, OUTLIER_LABEL};

/// Ordered, duplicate-free item set. Index order is first occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    items: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(items: Vec<String>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Schema("vocabulary must hold at least one item".into()));
        }
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate vocabulary item {item:?}")));
            }
        }
        Ok(Self { items, index })
    }

    /// `e0, e1, …` placeholder names.
    pub fn numbered(r: usize) -> Result<Self> {
        Self::new((0..r).map(|i| format!("e{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn index_of(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn item(&self, index: usize) -> Option<&str> {
        self.items.get(index).map(String::as_str)
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;
    fn try_from(items: Vec<String>) -> Result<Self> {
        Self::new(items)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.items
    }
}

/// One record: numerically encoded attributes plus a sequence of vocabulary
/// indices.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedSequence {
    pub id: String,
    pub attributes: Vector,
    pub sequence: Vec<usize>,
    pub label: Option<String>,
}

impl AttributedSequence {
    pub fn new(id: impl Into<String>, attributes: Vector, sequence: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            attributes,
            sequence,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// One-hot rows for exactly the record's own steps (no padding).
    pub fn encode(&self, vocab_size: usize) -> Result<EncodedSequence> {
        encode_one_hot(&self.sequence, vocab_size, self.sequence.len())
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.sequence.is_empty() {
            return Err(Error::EmptySequence(self.id.clone()));
        }
        Ok(())
    }
}

/// A collection of records sharing one vocabulary and attribute width.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub attr_dim: usize,
    pub schema: Option<AttributeSchema>,
    pub records: Vec<AttributedSequence>,
}

impl Dataset {
    pub fn new(
        vocab: Vocabulary,
        attr_dim: usize,
        records: Vec<AttributedSequence>,
        schema: Option<AttributeSchema>,
    ) -> Result<Self> {
        for rec in &records {
            if rec.attributes.len() != attr_dim {
                return dim_err(format!(
                    "record {:?} has {} attributes, dataset width is {attr_dim}",
                    rec.id,
                    rec.attributes.len()
                ));
            }
            if let Some(&bad) = rec.sequence.iter().find(|&&i| i >= vocab.len()) {
                return Err(Error::Vocab {
                    index: bad,
                    size: vocab.len(),
                });
            }
        }
        if let Some(s) = &schema {
            if s.width() != attr_dim {
                return Err(Error::Schema(format!(
                    "schema width {} differs from attribute width {attr_dim}",
                    s.width()
                )));
            }
        }
        Ok(Self {
            vocab,
            attr_dim,
            schema,
            records,
        })
    }

    /// Same vocabulary and schema, different records.
    pub fn with_records(&self, records: Vec<AttributedSequence>) -> Dataset {
        Dataset {
            vocab: self.vocab.clone(),
            attr_dim: self.attr_dim,
            schema: self.schema.clone(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Length of the longest sequence.
    pub fn t_max(&self) -> usize {
        self.records.iter().map(|r| r.sequence.len()).max().unwrap_or(0)
    }

    pub fn get(&self, id: &str) -> Option<&AttributedSequence> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect()
    }

    /// Distinct labels in first-occurrence order. Errors if any record is
    /// unlabeled.
    pub fn classes(&self) -> Result<Vec<String>> {
        let mut seen = Vec::new();
        for r in &self.records {
            let label = r
                .label
                .as_ref()
                .ok_or_else(|| Error::Config(format!("record {:?} has no label", r.id)))?;
            if !seen.contains(label) {
                seen.push(label.clone());
            }
        }
        Ok(seen)
    }

    pub fn encode(&self, record: &AttributedSequence) -> Result<EncodedSequence> {
        encode_one_hot(&record.sequence, self.vocab_size(), self.t_max())
    }
}

/// Zero-padded one-hot matrix with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSequence {
    pub onehots: Matrix,
    pub mask: Vec<bool>,
    pub true_len: usize,
}

impl EncodedSequence {
    pub fn t_max(&self) -> usize {
        self.mask.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.onehots.cols()
    }

    /// Row `t` as a vector.
    pub fn step(&self, t: usize) -> Vector {
        Vector::from_raw(self.onehots.row(t).to_vec())
    }

    /// Unmasked rows only.
    pub fn steps(&self) -> Vec<Vector> {
        (0..self.true_len).map(|t| self.step(t)).collect()
    }
}

pub fn encode_one_hot(seq: &[usize], vocab_size: usize, t_max: usize) -> Result<EncodedSequence> {
    if seq.len() > t_max {
        return Err(Error::Length {
            len: seq.len(),
            t_max,
        });
    }
    let mut onehots = Matrix::zeros(t_max, vocab_size);
    for (t, &item) in seq.iter().enumerate() {
        if item >= vocab_size {
            return Err(Error::Vocab {
                index: item,
                size: vocab_size,
            });
        }
        onehots.set(t, item, 1.0);
    }
    let mask = (0..t_max).map(|t| t < seq.len()).collect();
    Ok(EncodedSequence {
        onehots,
        mask,
        true_len: seq.len(),
    })
}

/// Recovers the index sequence from unmasked one-hot rows.
pub fn decode_one_hot(enc: &EncodedSequence) -> Vec<usize> {
    (0..enc.true_len)
        .filter_map(|t| enc.onehots.row(t).iter().position(|&v| v == 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn encode_single_item() {
        let enc = encode_one_hot(&[2], 4, 3).unwrap();
        assert_eq!(enc.onehots.row(0), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(enc.onehots.row(1), &[0.0; 4]);
        assert_eq!(enc.onehots.row(2), &[0.0; 4]);
        assert_eq!(enc.mask, vec![true, false, false]);
    }

    #[test]
    fn encode_empty_and_errors() {
        let enc = encode_one_hot(&[], 3, 2).unwrap();
        assert!(enc.onehots.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(enc.mask, vec![false, false]);
        assert!(matches!(
            encode_one_hot(&[3], 3, 2),
            Err(Error::Vocab { index: 3, size: 3 })
        ));
        assert!(matches!(
            encode_one_hot(&[0, 1, 2], 3, 2),
            Err(Error::Length { len: 3, t_max: 2 })
        ));
    }

    #[test]
    fn encode_decode_round_trip_random() {
        let mut rng = Rng::new(17);
        for _ in 0..100 {
            let r = 1 + rng.below(10);
            let len = rng.below(12);
            let seq: Vec<usize> = (0..len).map(|_| rng.below(r)).collect();
            let enc = encode_one_hot(&seq, r, len + rng.below(5)).unwrap();
            assert_eq!(decode_one_hot(&enc), seq);
            assert_eq!(enc.mask.iter().filter(|&&m| m).count(), len);
            for t in 0..len {
                assert_eq!(enc.onehots.row(t).iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(Vocabulary::new(vec![]).is_err());
        assert!(Vocabulary::new(vec!["a".into(), "a".into()]).is_err());
        let v = Vocabulary::new(vec!["login".into(), "search".into()]).unwrap();
        assert_eq!(v.index_of("search"), Some(1));
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["login","search"]"#);
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    }

    #[test]
    fn dataset_validates_records() {
        let vocab = Vocabulary::numbered(3).unwrap();
        let good = AttributedSequence::new("a", Vector::zeros(2), vec![0, 2]);
        let bad_width = AttributedSequence::new("b", Vector::zeros(3), vec![0]);
        let bad_item = AttributedSequence::new("c", Vector::zeros(2), vec![5]);
        assert!(Dataset::new(vocab.clone(), 2, vec![good.clone()], None).is_ok());
        assert!(Dataset::new(vocab.clone(), 2, vec![bad_width], None).is_err());
        assert!(Dataset::new(vocab, 2, vec![good, bad_item], None).is_err());
    }
}
