//! Metric learning from similar/dissimilar feedback, then density clustering
//! of the learned embeddings.

use attrseq::data::{generate_synthetic, make_feedback, SyntheticConfig};
use attrseq::metrics::{density_cluster, nmi, EmbeddingSet};
use attrseq::mlas::{mlas_embed, mlas_train, pair_distance, Fusion, MlasConfig, MlasModel, MlasTrainConfig};
use attrseq::numerics::Rng;

fn main() -> attrseq::Result<()> {
    let root = Rng::new(1);
    let cfg = SyntheticConfig {
        n_classes: 2,
        per_class: 50,
        attr_dim: 6,
        vocab_size: 20,
        min_len: 4,
        max_len: 8,
        noise: 0.1,
        ..Default::default()
    };
    let ds = generate_synthetic(&mut root.split(1), &cfg)?;
    let feedback = make_feedback(&ds, &mut root.split(2), 100)?;

    for fusion in [Fusion::Balanced, Fusion::AttCentric, Fusion::SeqCentric] {
        let mcfg = MlasConfig { fusion, attr_hidden: 8, seq_hidden: 8, out_dim: 4, ..Default::default() };
        let mut model = MlasModel::init(&mut root.split(3), ds.attr_dim, ds.vocab_size(), &mcfg)?;
        let tc = MlasTrainConfig { lr: 0.1, epochs: 20, eps: 1e-8 };
        let history = mlas_train(&mut model, &ds, &feedback, None, &tc, &mut root.split(4))?;

        let mut sums = [(0.0, 0); 2];
        for t in &feedback {
            let d = pair_distance(&model, ds.get(&t.left_id).unwrap(), ds.get(&t.right_id).unwrap())?;
            sums[t.label as usize].0 += d;
            sums[t.label as usize].1 += 1;
        }
        let mean = |i: usize| sums[i].0 / sums[i].1 as f64;

        let embs = ds.records.iter().map(|r| mlas_embed(&model, r)).collect::<attrseq::Result<Vec<_>>>()?;
        let set = EmbeddingSet::new(ds.records.iter().map(|r| r.id.clone()).collect(), embs, None)?;
        let clusters = density_cluster(&set, 5, 0.3)?;
        let labels: Vec<String> = ds.records.iter().map(|r| r.label.clone().unwrap_or_default()).collect();
        println!(
            "{fusion:?}: loss {:.4} -> {:.4}, mean distance similar {:.3} dissimilar {:.3}, nmi {:.3}",
            history[0].train,
            history.last().unwrap().train,
            mean(0),
            mean(1),
            nmi(&clusters, &labels)?
        );
    }
    Ok(())
}
