//! Embedding CSV: a header `id,dim0,…,dim{d−1}`, then one row per record.
//! Ids are written verbatim, so they may not contain commas, quotes or line
//! breaks.

use crate::error::{Error, Result};
use crate::numerics::Vector;

pub(crate) fn check_id(id: &str) -> Result<()> {
    if id.contains([',', '"', '\n', '\r']) {
        return Err(Error::Config(format!(
            "record id {id:?} cannot be written to CSV (contains a comma, quote or line break)"
        )));
    }
    Ok(())
}

pub fn embeddings_csv(ids: &[String], vectors: &[Vector]) -> Result<String> {
    if ids.len() != vectors.len() {
        return Err(Error::Dimension(format!("{} ids for {} vectors", ids.len(), vectors.len())));
    }
    let d = vectors.first().map_or(0, Vector::len);
    let mut out = String::from("id");
    for j in 0..d {
        out.push_str(&format!(",dim{j}"));
    }
    out.push('\n');
    for (id, v) in ids.iter().zip(vectors) {
        check_id(id)?;
        if v.len() != d {
            return Err(Error::Dimension(format!("embedding of {id:?} has width {}, expected {d}", v.len())));
        }
        out.push_str(id);
        for x in v.iter() {
            out.push(',');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_embeddings_csv(text: &str) -> Result<(Vec<String>, Vec<Vector>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty embeddings file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let well_formed = cols[0] == "id" && cols[1..].iter().enumerate().all(|(j, c)| *c == format!("dim{j}"));
    if !well_formed || cols.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header must be id,dim0,…".into(),
        });
    }
    let d = cols.len() - 1;
    let mut ids = Vec::new();
    let mut vectors = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 1 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {} cells, found {}", d + 1, cells.len()),
            });
        }
        let values = cells[1..]
            .iter()
            .map(|c| {
                c.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("{c:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(cells[0].to_string());
        vectors.push(Vector::new(values).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok((ids, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let vs = vec![
            Vector::new(vec![0.1, -1.0 / 3.0]).unwrap(),
            Vector::new(vec![1e-300, 2.5]).unwrap(),
        ];
        let text = embeddings_csv(&ids, &vs).unwrap();
        assert!(text.starts_with("id,dim0,dim1\n"));
        assert_eq!(parse_embeddings_csv(&text).unwrap(), (ids, vs));
    }

    #[test]
    fn bad_ids_and_headers_rejected() {
        let v = vec![Vector::new(vec![1.0]).unwrap()];
        assert!(embeddings_csv(&["a,b".to_string()], &v).is_err());
        assert!(parse_embeddings_csv("name,dim0\na,1\n").is_err());
        assert!(parse_embeddings_csv("id,dim0\na,1,2\n").is_err());
    }
}
