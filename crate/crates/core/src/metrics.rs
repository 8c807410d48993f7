//! Evaluation protocols: k-NN outlier scoring, ROC AUC, NMI, density
//! clustering, silhouette and accuracy, plus report and sweep-table output.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, dim_err, Error, Result};
use crate::numerics::{Matrix, Vector};

/// Named embeddings, one row per record.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub ids: Vec<String>,
    pub vectors: Matrix,
    pub labels: Option<Vec<String>>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, vectors: Vec<Vector>, labels: Option<Vec<String>>) -> Result<Self> {
        let d = vectors.first().map_or(0, Vector::len);
        if ids.len() != vectors.len() {
            return dim_err(format!("{} ids for {} vectors", ids.len(), vectors.len()));
        }
        if vectors.iter().any(|v| v.len() != d) {
            return dim_err("embedding vectors differ in width");
        }
        if labels.as_ref().is_some_and(|l| l.len() != ids.len()) {
            return dim_err("label count differs from id count");
        }
        let data = vectors.into_iter().flat_map(Vector::into_vec).collect();
        Ok(Self {
            vectors: Matrix::new(ids.len(), d, data)?,
            ids,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Full distance matrix, rows computed in parallel.
pub fn pairwise_distances(emb: &EmbeddingSet) -> Vec<Vec<f64>> {
    (0..emb.len())
        .into_par_iter()
        .map(|i| (0..emb.len()).map(|j| euclidean(emb.row(i), emb.row(j))).collect())
        .collect()
}

/// Distance from each point to its k-th nearest other point.
pub fn knn_outlier_scores(emb: &EmbeddingSet, k: usize) -> Result<Vec<f64>> {
    let n = emb.len();
    if k == 0 || k >= n {
        return config_err(format!("k must satisfy 1 <= k < n, got k={k}, n={n}"));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(emb.row(i), emb.row(j)))
                .collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, via the rank-sum statistic with averaged tie ranks.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return dim_err("scores and labels differ in length");
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("roc_auc needs both classes".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| positives[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    let mut terms: Vec<f64> = counts
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
/// Two single-cluster labelings score 1.
pub fn nmi<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return dim_err(format!("labelings differ in length: {} vs {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::UndefinedMetric("nmi of empty labelings".into()));
    }
    let n = a.len() as f64;
    let mut ca: BTreeMap<&A, usize> = BTreeMap::new();
    let mut cb: BTreeMap<&B, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(&A, &B), usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
        *joint.entry((x, y)).or_default() += 1;
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    // Summing sorted terms keeps nmi(a, b) == nmi(b, a) bit for bit.
    let mut terms: Vec<f64> = joint
        .iter()
        .map(|((x, y), &c)| {
            let pxy = c as f64 / n;
            pxy * (pxy * n * n / (ca[x] as f64 * cb[y] as f64)).ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

/// Connected components of the graph linking points within `radius`.
/// Components smaller than `min_cluster_size` are labeled −1; the rest are
/// numbered by first member.
pub fn density_cluster(emb: &EmbeddingSet, min_cluster_size: usize, radius: f64) -> Result<Vec<i64>> {
    if min_cluster_size < 2 {
        return config_err("min_cluster_size must be >= 2");
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return config_err("radius must be > 0");
    }
    let n = emb.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && euclidean(emb.row(i), emb.row(j)) <= radius)
                .collect()
        })
        .collect();
    let mut component = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        component[start] = id;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for &j in &neighbours[i] {
                if component[j] == usize::MAX {
                    component[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    let mut relabel = vec![-1i64; sizes.len()];
    let mut next = 0;
    for (id, &size) in sizes.iter().enumerate() {
        if size >= min_cluster_size {
            relabel[id] = next;
            next += 1;
        }
    }
    Ok(component.into_iter().map(|c| relabel[c]).collect())
}

/// Mean silhouette coefficient. Points alone in their cluster score 0, as
/// do points with `a = b = 0`.
pub fn silhouette<L: Ord>(emb: &EmbeddingSet, labels: &[L]) -> Result<f64> {
    let n = emb.len();
    if labels.len() != n {
        return dim_err("label count differs from embedding count");
    }
    let mut index: BTreeMap<&L, usize> = BTreeMap::new();
    for l in labels {
        let next = index.len();
        index.entry(l).or_insert(next);
    }
    let k = index.len();
    if k < 2 {
        return Err(Error::UndefinedMetric("silhouette needs at least two clusters".into()));
    }
    let cluster: Vec<usize> = labels.iter().map(|l| index[l]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &cluster {
        sizes[c] += 1;
    }
    let s: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = cluster[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[cluster[j]] += euclidean(emb.row(i), emb.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(s.iter().sum::<f64>() / n as f64)
}

/// Exact-match fraction.
pub fn accuracy<L: PartialEq>(preds: &[L], truths: &[L]) -> Result<f64> {
    if preds.len() != truths.len() {
        return dim_err("predictions and truths differ in length");
    }
    if preds.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set".into()));
    }
    let hits = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// One measured value with the knobs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub params: BTreeMap<String, serde_json::Value>,
    pub n: usize,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, value: f64, n: usize) -> Self {
        Self {
            metric: metric.into(),
            value,
            params: BTreeMap::new(),
            n,
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }
}

pub fn write_reports_jsonl(reports: &[MetricReport], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in reports {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// A metric-versus-knob table, written as CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return dim_err(format!("row has {} cells, table has {} columns", row.len(), self.columns.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}
