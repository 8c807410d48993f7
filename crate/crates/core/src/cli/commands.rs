use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::csv::{check_id, embeddings_csv, parse_embeddings_csv};
use crate::amas::{amas_train, classify_all, in_top_k, AmasModel, Attention};
use crate::checkpoint::{read_header, sidecar_path, AnyModel, Checkpoint, EncodingInfo, Framework};
use crate::data::{
    dataset_jsonl, feedback_jsonl, generate_synthetic, load_feedback, load_jsonl, load_jsonl_with, make_feedback,
    split_slice, split_train_validation, AttributedSequence, Dataset, FeedbackTriplet, OUTLIER_LABEL,
};
use crate::error::{Error, Result};
use crate::history::{history_csv, EpochLoss};
use crate::metrics::{
    density_cluster, euclidean, knn_outlier_scores, nmi, roc_auc, silhouette, EmbeddingSet, MetricReport, SweepTable,
};
use crate::mlas::{mlas_embed, mlas_pretrain, mlas_train, MlasModel};
use crate::nas::{nas_embed, nas_train, NasModel};
use crate::numerics::{Rng, Vector};
use crate::olas::{oneshot_report, olas_feature, olas_train, Distance, Gallery, GalleryFeatures, OlasModel};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

/// Files produced by a command, held in memory until every input has been
/// checked and every result computed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let mut a = Self::default();
        a.add(RESOLVED_CONFIG, cfg.to_toml()?);
        Ok(a)
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn add_json(&mut self, name: &str, value: &impl serde::Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Creates `dir` if needed and writes every file into it.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn inliers(dataset: &Dataset) -> Dataset {
    dataset.with_records(
        dataset
            .records
            .iter()
            .filter(|r| r.label.as_deref() != Some(OUTLIER_LABEL))
            .cloned()
            .collect(),
    )
}

/// Synthetic corpus, label-derived feedback over the non-outlier records,
/// and a manifest.
pub fn generate(cfg: &RunConfig) -> Result<Artifacts> {
    let root = Rng::new(cfg.seed);
    let dataset = generate_synthetic(&mut root.split(1), &cfg.synthetic)?;
    let feedback = if cfg.feedback_pairs > 0 {
        make_feedback(&inliers(&dataset), &mut root.split(2), cfg.feedback_pairs)?
    } else {
        Vec::new()
    };
    let mut a = Artifacts::new(cfg)?;
    a.add("dataset.jsonl", dataset_jsonl(&dataset));
    a.add("feedback.jsonl", feedback_jsonl(&feedback));
    a.add_json(
        "manifest.json",
        &json!({
            "seed": cfg.seed,
            "n_records": dataset.len(),
            "n_classes": cfg.synthetic.n_classes,
            "n_outliers": cfg.synthetic.outliers,
            "n_feedback": feedback.len(),
            "vocab_size": dataset.vocab_size(),
            "attr_dim": dataset.attr_dim,
            "files": ["dataset.jsonl", "feedback.jsonl"],
        }),
    )?;
    Ok(a)
}

fn holdout(dataset: &Dataset, fraction: f64, rng: &mut Rng) -> Result<(Dataset, Option<Dataset>)> {
    if fraction == 0.0 {
        return Ok((dataset.clone(), None));
    }
    let (t, v) = split_train_validation(dataset, fraction, rng)?;
    Ok((t, Some(v)))
}

fn holdout_pairs(
    pairs: &[FeedbackTriplet],
    fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<FeedbackTriplet>, Vec<FeedbackTriplet>)> {
    if fraction == 0.0 {
        return Ok((pairs.to_vec(), Vec::new()));
    }
    split_slice(pairs, fraction, rng)
}

fn feedback_for(cfg: &RunConfig, dataset: &Dataset, file: Option<Vec<FeedbackTriplet>>, root: &Rng) -> Result<Vec<FeedbackTriplet>> {
    let pairs = match file {
        Some(p) => p,
        None => make_feedback(&inliers(dataset), &mut root.split(12), cfg.feedback_pairs)?,
    };
    if pairs.is_empty() {
        return Err(Error::Config("no feedback pairs to train on".into()));
    }
    Ok(pairs)
}

/// Trains `cfg.framework` on `data`; writes `model.ckpt`, its encoding
/// sidecar and `history.csv`.
pub fn train(cfg: &RunConfig, data: &Path, feedback: Option<&Path>) -> Result<Artifacts> {
    let dataset = load_jsonl(data)?;
    if dataset.is_empty() {
        return Err(Error::Config(format!("{} holds no records", data.display())));
    }
    let file_pairs = match feedback {
        Some(p) if matches!(cfg.framework, Framework::Mlas | Framework::Olas) => Some(load_feedback(p, &dataset)?),
        Some(_) => {
            return Err(Error::Config(format!(
                "--feedback is only used by mlas and olas, not {}",
                cfg.framework.name()
            )))
        }
        None => None,
    };
    let root = Rng::new(cfg.seed);
    let (u, r) = (dataset.attr_dim, dataset.vocab_size());
    let mut a = Artifacts::new(cfg)?;
    let (model, history) = match cfg.framework {
        Framework::Nas => {
            let (tr, va) = holdout(&dataset, cfg.validation_fraction, &mut root.split(11))?;
            let mut m = NasModel::init(&mut root.split(10), u, r, &cfg.nas)?;
            let h = nas_train(&mut m, &tr, va.as_ref(), &cfg.nas_train)?;
            let h = h
                .into_iter()
                .map(|e| EpochLoss {
                    epoch: e.epoch,
                    train: e.l_a + e.l_s,
                    validation: e.validation,
                })
                .collect();
            (AnyModel::Nas(m), h)
        }
        Framework::Mlas => {
            let pairs = feedback_for(cfg, &dataset, file_pairs, &root)?;
            let (tr, va) = holdout_pairs(&pairs, cfg.validation_fraction, &mut root.split(11))?;
            let mut m = MlasModel::init(&mut root.split(10), u, r, &cfg.mlas)?;
            if cfg.pretrain.epochs > 0 {
                let p = &cfg.pretrain;
                let losses = mlas_pretrain(&mut m, &dataset, p.omega_a, p.epochs, p.lr, &mut root.split(14))?;
                let mut csv = String::from("epoch,loss\n");
                for (i, l) in losses.iter().enumerate() {
                    csv.push_str(&format!("{},{l}\n", i + 1));
                }
                a.add("pretrain.csv", csv);
            }
            let h = mlas_train(&mut m, &dataset, &tr, Some(&va), &cfg.mlas_train, &mut root.split(13))?;
            (AnyModel::Mlas(m), h)
        }
        Framework::Olas => {
            let pairs = feedback_for(cfg, &dataset, file_pairs, &root)?;
            let (tr, va) = holdout_pairs(&pairs, cfg.validation_fraction, &mut root.split(11))?;
            let mut m = OlasModel::init(&mut root.split(10), u, r, &cfg.olas)?;
            let h = olas_train(&mut m, &dataset, &tr, Some(&va), &cfg.olas_train, &mut root.split(13))?;
            (AnyModel::Olas(m), h)
        }
        Framework::Amas => {
            let classes = dataset.classes()?;
            let (tr, va) = holdout(&dataset, cfg.validation_fraction, &mut root.split(11))?;
            let mut m = AmasModel::init(&mut root.split(10), u, r, classes, &cfg.amas)?;
            let h = amas_train(&mut m, &tr, va.as_ref(), &cfg.amas_train, &mut root.split(13))?;
            (AnyModel::Amas(m), h.into_iter().map(|e| e.loss).collect())
        }
    };
    let ck = Checkpoint::new(model, EncodingInfo::of(&dataset))?;
    a.add("model.ckpt", ck.to_bytes()?);
    a.add(
        sidecar_path(Path::new("model.ckpt")).to_string_lossy().into_owned(),
        ck.sidecar_bytes()?,
    );
    a.add("history.csv", history_csv(&history));
    Ok(a)
}

fn load_for(ck: &Checkpoint, path: &Path) -> Result<Dataset> {
    let schema = ck.encoding.schema.as_ref().ok_or_else(|| {
        Error::Config("checkpoint has no attribute schema, so raw records cannot be encoded for it".into())
    })?;
    let ds = load_jsonl_with(path, &ck.encoding.vocab, schema)?;
    for r in &ds.records {
        check_id(&r.id)?;
    }
    Ok(ds)
}

/// The embedding function behind an unsupervised or metric checkpoint.
fn encoder(ck: &Checkpoint) -> Result<Box<dyn Fn(&AttributedSequence) -> Result<Vector> + Sync + '_>> {
    Ok(match &ck.model {
        AnyModel::Nas(m) => Box::new(move |r| nas_embed(m, r)),
        AnyModel::Mlas(m) => Box::new(move |r| mlas_embed(m, r)),
        AnyModel::Olas(m) => Box::new(move |r| olas_feature(m, r)),
        AnyModel::Amas(_) => {
            return Err(Error::Config(
                "an amas checkpoint is a classifier; use the classify command".into(),
            ))
        }
    })
}

/// `embeddings.csv` with one row per input record, in input order.
pub fn embed(cfg: &RunConfig, checkpoint: &Path, data: &Path) -> Result<Artifacts> {
    let ck = Checkpoint::load(checkpoint)?;
    let f = encoder(&ck)?;
    let ds = load_for(&ck, data)?;
    let vectors = ds.records.par_iter().map(|r| f(r)).collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = ds.records.iter().map(|r| r.id.clone()).collect();
    let mut a = Artifacts::new(cfg)?;
    a.add("embeddings.csv", embeddings_csv(&ids, &vectors)?);
    Ok(a)
}

/// Nearest-gallery labels in `labels.csv`; `oneshot_report.json` when every
/// query carries a true label. NAS and MLAS checkpoints label through their
/// embeddings with Euclidean distance.
pub fn label(cfg: &RunConfig, checkpoint: &Path, gallery: &Path, data: &Path) -> Result<Artifacts> {
    let ck = Checkpoint::load(checkpoint)?;
    let f = encoder(&ck)?;
    let gallery = Gallery::from_records(&load_for(&ck, gallery)?.records)?;
    let queries = load_for(&ck, data)?;
    let distance = match &ck.model {
        AnyModel::Olas(m) => m.distance,
        _ => Distance::Euclidean,
    };
    let features = GalleryFeatures::with(&gallery, distance, &f)?;
    let predicted = queries
        .records
        .par_iter()
        .map(|q| Ok(features.nearest(&f(q)?)?.to_string()))
        .collect::<Result<Vec<String>>>()?;
    let mut csv = String::from("id,predicted,true\n");
    for (q, p) in queries.records.iter().zip(&predicted) {
        check_id(p)?;
        csv.push_str(&format!("{},{p},{}\n", q.id, q.label.as_deref().unwrap_or_default()));
    }
    let mut a = Artifacts::new(cfg)?;
    a.add("labels.csv", csv);
    if !queries.is_empty() && queries.records.iter().all(|q| q.label.is_some()) {
        a.add_json("oneshot_report.json", &oneshot_report(&predicted, &queries.records)?)?;
    }
    Ok(a)
}

/// Class predictions, attention traces and top-k accuracy of an AMAS
/// checkpoint.
pub fn classify(cfg: &RunConfig, checkpoint: &Path, data: &Path) -> Result<Artifacts> {
    let ck = Checkpoint::load(checkpoint)?;
    let AnyModel::Amas(model) = &ck.model else {
        return Err(Error::Config(format!(
            "classify needs an amas checkpoint, got {}",
            ck.model.framework().name()
        )));
    };
    for c in &model.classes {
        check_id(c)?;
    }
    let ds = load_for(&ck, data)?;
    let results = classify_all(model, &ds.records)?;
    let traces = if model.attention == Attention::NoAttention {
        None
    } else {
        Some(
            ds.records
                .par_iter()
                .map(|r| crate::amas::attention_trace(model, r))
                .collect::<Result<Vec<_>>>()?,
        )
    };

    let mut csv = String::from("id,predicted,true");
    for k in 0..model.n_classes() {
        csv.push_str(&format!(",score_{k}"));
    }
    csv.push('\n');
    for (r, (pred, scores)) in ds.records.iter().zip(&results) {
        csv.push_str(&format!("{},{},{}", r.id, model.classes[*pred], r.label.as_deref().unwrap_or_default()));
        for s in scores.iter() {
            csv.push_str(&format!(",{s}"));
        }
        csv.push('\n');
    }
    let mut a = Artifacts::new(cfg)?;
    a.add("predictions.csv", csv);

    if let Some(traces) = traces {
        let mut jsonl = String::new();
        for (r, t) in ds.records.iter().zip(traces) {
            let items: Vec<&str> = r.sequence.iter().map(|&i| ds.vocab.item(i).unwrap_or_default()).collect();
            let weights: Vec<&[f64]> = t.as_ref().map_or(Vec::new(), |t| t.weights.iter().map(Vector::as_slice).collect());
            let line = json!({ "id": r.id, "items": items, "weights": weights });
            jsonl.push_str(&line.to_string());
            jsonl.push('\n');
        }
        a.add("attention.jsonl", jsonl);
    }

    let labeled: Vec<(usize, &Vector)> = ds
        .records
        .iter()
        .zip(&results)
        .filter_map(|(r, (_, s))| Some((model.class_index(r.label.as_deref()?)?, s)))
        .collect();
    if !labeled.is_empty() {
        let mut reports = Vec::new();
        for k in [1, 2, 3, 5, 10].into_iter().filter(|&k| k <= model.n_classes()) {
            let hits = labeled.iter().filter(|(y, s)| in_top_k(s, *y, k)).count();
            reports.push(
                MetricReport::new("top_k_accuracy", hits as f64 / labeled.len() as f64, labeled.len())
                    .with_param("k", k),
            );
        }
        a.add_json("topk.json", &reports)?;
    }
    Ok(a)
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Median distance from each point to its `(min_size − 1)`-th nearest
/// neighbour.
fn auto_radius(emb: &EmbeddingSet, min_size: usize) -> Result<f64> {
    let n = emb.len();
    if n < 2 {
        return Err(Error::UndefinedMetric("clustering needs at least two points".into()));
    }
    let rank = (min_size - 1).min(n - 1) - 1;
    let mut reach: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| euclidean(emb.row(i), emb.row(j))).collect();
            d.sort_by(f64::total_cmp);
            d[rank]
        })
        .collect();
    reach.sort_by(f64::total_cmp);
    let r = reach[n / 2];
    // Duplicated points would give a zero radius.
    Ok(if r > 0.0 { r } else { f64::MIN_POSITIVE })
}

fn or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Sweeps over every embeddings file: k-NN outlier AUC per `k`, clustering
/// NMI per minimum cluster size, and silhouette by true class. Outlier
/// records are excluded from clustering and silhouette. Undefined values are
/// `NaN` in the tables and `null` in the summary.
pub fn eval(cfg: &RunConfig, embeddings: &[PathBuf], data: &Path) -> Result<Artifacts> {
    if embeddings.is_empty() {
        return Err(Error::Config("eval needs at least one --embeddings file".into()));
    }
    if cfg.eval.k.is_empty() || cfg.eval.min_cluster_size.is_empty() {
        return Err(Error::Config("eval needs at least one k and one min_cluster_size".into()));
    }
    let ds = load_jsonl(data)?;
    let truth: BTreeMap<&str, &str> = ds
        .records
        .iter()
        .map(|r| {
            r.label
                .as_deref()
                .map(|l| (r.id.as_str(), l))
                .ok_or_else(|| Error::Config(format!("record {:?} has no label", r.id)))
        })
        .collect::<Result<_>>()?;
    let outlier = cfg.eval.outlier_label.as_str();

    let mut auc_table = SweepTable::new(&["dim", "k", "auc"]);
    let mut nmi_table = SweepTable::new(&["dim", "min_cluster_size", "radius", "nmi", "n_clusters"]);
    let mut dim_table = SweepTable::new(&["dim", "silhouette", "auc", "nmi"]);
    let mut reports = Vec::new();
    let mut summary = Vec::new();

    for path in embeddings {
        let (ids, vectors) = parse_embeddings_csv(&fs::read_to_string(path)?)?;
        let labels = ids
            .iter()
            .map(|id| {
                truth
                    .get(id.as_str())
                    .map(|l| l.to_string())
                    .ok_or_else(|| Error::Config(format!("{}: id {id:?} not found in the dataset", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        let emb = EmbeddingSet::new(ids.clone(), vectors.clone(), Some(labels.clone()))?;
        let dim = emb.dim();
        let name = path.display().to_string();
        let is_out: Vec<bool> = labels.iter().map(|l| l == outlier).collect();
        let n_out = is_out.iter().filter(|&&o| o).count();

        let mut auc_by_k = BTreeMap::new();
        for &k in &cfg.eval.k {
            let auc = if n_out == 0 || n_out == emb.len() {
                None
            } else {
                defined(roc_auc(&knn_outlier_scores(&emb, k)?, &is_out))?
            };
            auc_table.push(vec![dim as f64, k as f64, or_nan(auc)])?;
            if let Some(v) = auc {
                reports.push(
                    MetricReport::new("roc_auc", v, emb.len())
                        .with_param("embeddings", name.clone())
                        .with_param("k", k),
                );
            }
            auc_by_k.insert(k.to_string(), auc);
        }

        let keep: Vec<usize> = (0..emb.len()).filter(|&i| !is_out[i]).collect();
        let in_labels: Vec<String> = keep.iter().map(|&i| labels[i].clone()).collect();
        let inl = EmbeddingSet::new(
            keep.iter().map(|&i| ids[i].clone()).collect(),
            keep.iter().map(|&i| vectors[i].clone()).collect(),
            Some(in_labels.clone()),
        )?;

        let mut nmi_by_size = BTreeMap::new();
        for &m in &cfg.eval.min_cluster_size {
            let radius = match cfg.eval.radius {
                Some(r) => Some(r),
                None => defined(auto_radius(&inl, m))?,
            };
            let (value, n_clusters) = match radius {
                Some(radius) if !inl.is_empty() => {
                    let clusters = density_cluster(&inl, m, radius)?;
                    let n_clusters = clusters.iter().filter(|&&c| c >= 0).max().map_or(0, |&c| c + 1);
                    (defined(nmi(&in_labels, &clusters))?, n_clusters)
                }
                _ => (None, 0),
            };
            nmi_table.push(vec![dim as f64, m as f64, or_nan(radius), or_nan(value), n_clusters as f64])?;
            if let Some(v) = value {
                reports.push(
                    MetricReport::new("nmi", v, inl.len())
                        .with_param("embeddings", name.clone())
                        .with_param("min_cluster_size", m)
                        .with_param("radius", radius.unwrap_or_default()),
                );
            }
            nmi_by_size.insert(m.to_string(), value);
        }

        let sil = if inl.is_empty() {
            None
        } else {
            defined(silhouette(&inl, &in_labels))?
        };
        if let Some(v) = sil {
            reports.push(MetricReport::new("silhouette", v, inl.len()).with_param("embeddings", name.clone()));
        }
        let first_auc = auc_by_k[&cfg.eval.k[0].to_string()];
        let first_nmi = nmi_by_size[&cfg.eval.min_cluster_size[0].to_string()];
        dim_table.push(vec![dim as f64, or_nan(sil), or_nan(first_auc), or_nan(first_nmi)])?;
        summary.push(json!({
            "embeddings": name,
            "dim": dim,
            "n": emb.len(),
            "n_outliers": n_out,
            "silhouette": sil,
            "auc_by_k": auc_by_k,
            "nmi_by_min_cluster_size": nmi_by_size,
        }));
    }

    let mut a = Artifacts::new(cfg)?;
    let mut jsonl = String::new();
    for r in &reports {
        jsonl.push_str(&serde_json::to_string(r).map_err(|e| Error::Config(e.to_string()))?);
        jsonl.push('\n');
    }
    a.add("reports.jsonl", jsonl);
    a.add("auc_vs_k.csv", auc_table.to_csv());
    a.add("nmi_vs_min_cluster_size.csv", nmi_table.to_csv());
    a.add("metric_vs_dim.csv", dim_table.to_csv());
    a.add_json("summary.json", &Value::Array(summary))?;
    Ok(a)
}

/// Pretty-printed header; also staged as `header.json`.
pub fn inspect(cfg: &RunConfig, checkpoint: &Path) -> Result<(String, Artifacts)> {
    let header = read_header(checkpoint)?;
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut a = Artifacts::new(cfg)?;
    a.add("header.json", format!("{text}\n"));
    Ok((text, a))
}
