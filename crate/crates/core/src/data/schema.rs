use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// How one raw attribute key maps onto encoded attribute slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeColumn {
    /// Min-max scaled into `[0, 1]` (constant columns map to 0).
    Numeric { key: String, min: f64, max: f64 },
    /// One-hot over `values`, in first-occurrence order.
    Categorical { key: String, values: Vec<String> },
}

impl AttributeColumn {
    pub fn key(&self) -> &str {
        match self {
            AttributeColumn::Numeric { key, .. } | AttributeColumn::Categorical { key, .. } => key,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            AttributeColumn::Numeric { .. } => 1,
            AttributeColumn::Categorical { values, .. } => values.len(),
        }
    }
}

/// Column layout used to turn raw attribute maps into vectors. Stored with
/// checkpoints so unseen files encode identically.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub columns: Vec<AttributeColumn>,
}

impl AttributeSchema {
    pub fn width(&self) -> usize {
        self.columns.iter().map(AttributeColumn::width).sum()
    }

    /// Infers columns from raw attribute maps. Every map must carry the same
    /// key set; a key must be all-numeric or all-string.
    pub(crate) fn infer(rows: &[(usize, &serde_json::Map<String, Value>)]) -> Result<Self> {
        let Some((_, first)) = rows.first() else {
            return Ok(Self::default());
        };
        let keys: Vec<&String> = first.keys().collect();
        for (line, row) in rows {
            if row.len() != keys.len() || keys.iter().any(|k| !row.contains_key(*k)) {
                return Err(Error::Schema(format!(
                    "line {line}: attribute keys differ from the first record"
                )));
            }
        }
        let mut columns = Vec::with_capacity(keys.len());
        for key in keys {
            let first_val = &first[key];
            if first_val.is_number() {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for (line, row) in rows {
                    let v = row[key].as_f64().ok_or_else(|| {
                        Error::Schema(format!("line {line}: attribute {key:?} must be numeric"))
                    })?;
                    min = min.min(v);
                    max = max.max(v);
                }
                columns.push(AttributeColumn::Numeric {
                    key: key.clone(),
                    min,
                    max,
                });
            } else if first_val.is_string() {
                let mut values: Vec<String> = Vec::new();
                for (line, row) in rows {
                    let v = row[key].as_str().ok_or_else(|| {
                        Error::Schema(format!("line {line}: attribute {key:?} must be a string"))
                    })?;
                    if !values.iter().any(|x| x == v) {
                        values.push(v.to_string());
                    }
                }
                columns.push(AttributeColumn::Categorical {
                    key: key.clone(),
                    values,
                });
            } else {
                return Err(Error::Schema(format!(
                    "attribute {key:?} must be a string or a number"
                )));
            }
        }
        Ok(Self { columns })
    }

    pub(crate) fn encode(&self, line: usize, row: &serde_json::Map<String, Value>) -> Result<Vec<f64>> {
        if row.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected {} attribute keys, found {}",
                self.columns.len(),
                row.len()
            )));
        }
        let mut out = Vec::with_capacity(self.width());
        for col in &self.columns {
            let v = row.get(col.key()).ok_or_else(|| {
                Error::Schema(format!("line {line}: missing attribute {:?}", col.key()))
            })?;
            match col {
                AttributeColumn::Numeric { key, min, max } => {
                    let x = v.as_f64().ok_or_else(|| {
                        Error::Schema(format!("line {line}: attribute {key:?} must be numeric"))
                    })?;
                    let span = max - min;
                    out.push(if span > 0.0 { (x - min) / span } else { 0.0 });
                }
                AttributeColumn::Categorical { key, values } => {
                    let s = v.as_str().ok_or_else(|| {
                        Error::Schema(format!("line {line}: attribute {key:?} must be a string"))
                    })?;
                    let pos = values.iter().position(|x| x == s).ok_or_else(|| {
                        Error::Schema(format!("line {line}: unseen value {s:?} for attribute {key:?}"))
                    })?;
                    out.extend((0..values.len()).map(|i| if i == pos { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(out)
    }
}
