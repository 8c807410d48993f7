//! JSONL ingestion and export.
//!
//! Dataset lines: `{"id": str, "attributes": {key: str|num, …}, "sequence":
//! [item, …], "label": str?}`. Feedback lines: `{"left": id, "right": id,
//! "label": 0|1}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::feedback::FeedbackTriplet;
use super::schema::AttributeSchema;
use super::{AttributedSequence, Dataset, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::Vector;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    attributes: Map<String, Value>,
    sequence: Vec<String>,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Serialize)]
struct RawRecordOut<'a> {
    id: &'a str,
    attributes: Map<String, Value>,
    sequence: Vec<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeedback {
    left: String,
    right: String,
    label: u8,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push((line_no, parsed));
    }
    Ok(out)
}

/// Parses dataset JSONL text, inferring vocabulary (first-occurrence order)
/// and attribute schema from the content.
pub fn parse_jsonl(text: &str) -> Result<Dataset> {
    let raws: Vec<(usize, RawRecord)> = parse_lines(text)?;
    let attr_rows: Vec<(usize, &Map<String, Value>)> =
        raws.iter().map(|(l, r)| (*l, &r.attributes)).collect();
    let schema = AttributeSchema::infer(&attr_rows)?;

    let mut items: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (_, r) in &raws {
        for item in &r.sequence {
            if seen.insert(item.as_str()) {
                items.push(item.clone());
            }
        }
    }
    if items.is_empty() {
        return Err(Error::Schema("no items found in any sequence".into()));
    }
    let vocab = Vocabulary::new(items)?;
    build(raws, vocab, schema)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_jsonl(&fs::read_to_string(path)?)
}

/// Loads records with a fixed vocabulary and schema, e.g. those stored in a
/// checkpoint. Unknown items and unseen categorical values are errors.
pub fn load_jsonl_with(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    schema: &AttributeSchema,
) -> Result<Dataset> {
    let raws: Vec<(usize, RawRecord)> = parse_lines(&fs::read_to_string(path)?)?;
    build(raws, vocab.clone(), schema.clone())
}

fn build(raws: Vec<(usize, RawRecord)>, vocab: Vocabulary, schema: AttributeSchema) -> Result<Dataset> {
    let mut records = Vec::with_capacity(raws.len());
    let mut ids = std::collections::HashSet::new();
    for (line, raw) in raws {
        if !ids.insert(raw.id.clone()) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate id {:?}", raw.id),
            });
        }
        let attrs = schema.encode(line, &raw.attributes)?;
        let sequence = raw
            .sequence
            .iter()
            .map(|s| vocab.index_of(s).ok_or_else(|| Error::UnknownItem(s.clone())))
            .collect::<Result<Vec<_>>>()?;
        records.push(AttributedSequence {
            id: raw.id,
            attributes: Vector::new(attrs)?,
            sequence,
            label: raw.label,
        });
    }
    let width = schema.width();
    Dataset::new(vocab, width, records, Some(schema))
}

/// Serializes records with numeric attributes keyed `a00, a01, …`, so that
/// lexicographic key order matches slot order.
pub fn dataset_jsonl(dataset: &Dataset) -> String {
    let digits = dataset.attr_dim.saturating_sub(1).to_string().len().max(2);
    let mut text = String::new();
    for rec in &dataset.records {
        let attributes = rec
            .attributes
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("a{i:0digits$}"), Value::from(v)))
            .collect();
        let sequence = rec
            .sequence
            .iter()
            .map(|&i| dataset.vocab.item(i).unwrap_or_default())
            .collect();
        let out = RawRecordOut {
            id: &rec.id,
            attributes,
            sequence,
            label: rec.label.as_deref(),
        };
        text.push_str(&serde_json::to_string(&out).expect("string keys and finite values"));
        text.push('\n');
    }
    text
}

pub fn write_dataset_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, dataset_jsonl(dataset))?;
    Ok(())
}

pub fn load_feedback(path: impl AsRef<Path>, dataset: &Dataset) -> Result<Vec<FeedbackTriplet>> {
    let raws: Vec<(usize, RawFeedback)> = parse_lines(&fs::read_to_string(path)?)?;
    let index = dataset.id_index();
    raws.into_iter()
        .map(|(line, r)| {
            if r.label > 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("label must be 0 or 1, got {}", r.label),
                });
            }
            for id in [&r.left, &r.right] {
                if !index.contains_key(id.as_str()) {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown record id {id:?}"),
                    });
                }
            }
            Ok(FeedbackTriplet {
                left_id: r.left,
                right_id: r.right,
                label: r.label,
            })
        })
        .collect()
}

pub fn feedback_jsonl(triplets: &[FeedbackTriplet]) -> String {
    let mut text = String::new();
    for t in triplets {
        let raw = RawFeedback {
            left: t.left_id.clone(),
            right: t.right_id.clone(),
            label: t.label,
        };
        text.push_str(&serde_json::to_string(&raw).expect("plain strings and integers"));
        text.push('\n');
    }
    text
}

pub fn write_feedback_jsonl(triplets: &[FeedbackTriplet], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, feedback_jsonl(triplets))?;
    Ok(())
}
