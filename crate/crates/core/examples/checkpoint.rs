//! Save a trained model with its encoding, load it back and confirm the
//! embeddings are bit-identical.

use attrseq::checkpoint::{read_header, AnyModel, Checkpoint, EncodingInfo};
use attrseq::data::{generate_synthetic, SyntheticConfig};
use attrseq::nas::{nas_embed, nas_train, NasConfig, NasModel, NasTrainConfig};
use attrseq::numerics::Rng;

fn main() -> attrseq::Result<()> {
    let ds = generate_synthetic(&mut Rng::new(0), &SyntheticConfig::default())?;
    let mut model = NasModel::init(&mut Rng::new(1), ds.attr_dim, ds.vocab_size(), &NasConfig::default())?;
    nas_train(&mut model, &ds, None, &NasTrainConfig { epochs: 2, ..Default::default() })?;

    let dir = std::env::temp_dir().join("attrseq-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("nas.ckpt");
    Checkpoint::new(AnyModel::Nas(model.clone()), EncodingInfo::of(&ds))?.save(&path)?;
    let header = read_header(&path)?;
    println!(
        "{} checkpoint: {} tensors, {} values, hyperparameters {}",
        header.framework.name(),
        header.tensors.len(),
        header.n_values,
        header.hyperparameters
    );

    let AnyModel::Nas(loaded) = Checkpoint::load(&path)?.model else {
        unreachable!("saved a NAS model");
    };
    let same = ds
        .records
        .iter()
        .all(|r| nas_embed(&model, r).ok() == nas_embed(&loaded, r).ok());
    println!("embeddings identical after reload: {same}");
    Ok(())
}
