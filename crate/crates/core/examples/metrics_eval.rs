//! Evaluation protocols on a hand-made embedding: k-NN outlier scores with
//! ROC AUC, density clustering with NMI, and silhouette.

use attrseq::metrics::{density_cluster, knn_outlier_scores, nmi, roc_auc, silhouette, EmbeddingSet, SweepTable};
use attrseq::numerics::{Rng, Vector};

fn main() -> attrseq::Result<()> {
    let mut rng = Rng::new(3);
    let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
    let mut ids = Vec::new();
    let mut vecs = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for i in 0..30 {
            ids.push(format!("c{c}-{i}"));
            vecs.push(Vector::new(center.iter().map(|x| x + 0.3 * rng.normal()).collect())?);
            labels.push(format!("c{c}"));
        }
    }
    for i in 0..5 {
        ids.push(format!("out-{i}"));
        vecs.push(Vector::new(vec![rng.uniform_range(8.0, 12.0), rng.uniform_range(8.0, 12.0)])?);
        labels.push("outlier".to_string());
    }
    let emb = EmbeddingSet::new(ids, vecs, None)?;
    let is_outlier: Vec<bool> = labels.iter().map(|l| l == "outlier").collect();

    let mut table = SweepTable::new(&["k", "auc"]);
    for k in [1, 5, 10, 20] {
        table.push(vec![k as f64, roc_auc(&knn_outlier_scores(&emb, k)?, &is_outlier)?])?;
    }
    print!("{}", table.to_csv());

    let clusters = density_cluster(&emb, 5, 0.5)?;
    let found = clusters.iter().filter(|&&c| c >= 0).max().map_or(0, |m| m + 1);
    println!("density clusters: {found}, nmi vs truth {:.3}", nmi(&clusters, &labels)?);
    println!("silhouette of true labels: {:.3}", silhouette(&emb, &labels)?);
    Ok(())
}
