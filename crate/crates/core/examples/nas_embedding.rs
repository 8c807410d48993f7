//! Unsupervised embeddings on a corpus where only the attributes carry the
//! class, with and without the attribute code conditioning the sequence
//! network.

use attrseq::data::{generate_synthetic, ClassSignal, SyntheticConfig};
use attrseq::metrics::{silhouette, EmbeddingSet};
use attrseq::nas::{nas_embed, nas_train, NasConfig, NasModel, NasTrainConfig};
use attrseq::numerics::Rng;

fn main() -> attrseq::Result<()> {
    let cfg = SyntheticConfig {
        n_classes: 3,
        per_class: 30,
        attr_dim: 11,
        vocab_size: 3,
        min_len: 2,
        max_len: 3,
        noise: 0.05,
        signal: ClassSignal::AttributesOnly,
        ..Default::default()
    };
    let ds = generate_synthetic(&mut Rng::new(0), &cfg)?;
    let labels: Vec<String> = ds.records.iter().map(|r| r.label.clone().unwrap_or_default()).collect();

    for conditioned in [true, false] {
        let ncfg = NasConfig { hidden: 15, layers: 1, conditioned };
        let mut model = NasModel::init(&mut Rng::new(0).split(7), ds.attr_dim, ds.vocab_size(), &ncfg)?;
        let tc = NasTrainConfig { lr: 0.1, epochs: 20, ..Default::default() };
        let history = nas_train(&mut model, &ds, None, &tc)?;
        let last = history.last().unwrap();

        let embs = ds.records.iter().map(|r| nas_embed(&model, r)).collect::<attrseq::Result<Vec<_>>>()?;
        let ids = ds.records.iter().map(|r| r.id.clone()).collect();
        let set = EmbeddingSet::new(ids, embs, None)?;
        println!(
            "conditioned={conditioned:<5}  L_A={:.4}  L_S={:.4}  silhouette={:.3}",
            last.l_a,
            last.l_s,
            silhouette(&set, &labels)?
        );
    }
    Ok(())
}
