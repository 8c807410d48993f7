//! Central finite differences against the analytic gradients of every
//! network on a random toy record.

use attrseq::amas::{amas_gradient, amas_loss, AmasConfig, AmasModel, Attention};
use attrseq::data::AttributedSequence;
use attrseq::mlas::{contrastive_loss, pair_distance, pair_gradient, MlasConfig, MlasModel};
use attrseq::nas::{nas_gradients, nas_losses, NasConfig, NasModel};
use attrseq::numerics::{grad_check, Rng, Vector};
use attrseq::olas::{olas_pair_gradient, olas_pair_loss, OlasConfig, OlasModel};

fn main() -> attrseq::Result<()> {
    let mut rng = Rng::new(42);
    let (u, r) = (4, 5);
    let mut record = |id: &str, len: usize| -> attrseq::Result<AttributedSequence> {
        let attrs = Vector::new((0..u).map(|_| rng.uniform()).collect())?;
        Ok(AttributedSequence::new(id, attrs, (0..len).map(|_| rng.below(r)).collect()))
    };
    let a = record("a", 4)?;
    let b = record("b", 3)?;
    let mut rng = Rng::new(7);

    let nas = NasModel::init(&mut rng, u, r, &NasConfig { hidden: 4, ..Default::default() })?;
    let (_, _, g) = nas_gradients(&nas, &a)?;
    let rep = grad_check(&nas, &g, 1e-6, |m| nas_losses(m, &a).map(|(la, ls)| la + ls))?;
    println!("nas   max rel error {:.2e} over {} entries", rep.max_rel_error, rep.checked);

    let mlas = MlasModel::init(&mut rng, u, r, &MlasConfig { attr_hidden: 4, seq_hidden: 4, out_dim: 3, margin: 2.0, ..Default::default() })?;
    let (_, g) = pair_gradient(&mlas, &a, &b, 1)?;
    let rep = grad_check(&mlas, &g, 1e-6, |m| Ok(contrastive_loss(pair_distance(m, &a, &b)?, 1, m.margin)))?;
    println!("mlas  max rel error {:.2e} over {} entries", rep.max_rel_error, rep.checked);

    let olas = OlasModel::init(&mut rng, u, r, &OlasConfig { fc_hidden: 4, lstm_hidden: 4, out_dim: 3, margin: 4.0, ..Default::default() })?;
    let (_, g) = olas_pair_gradient(&olas, &a, &b, 1)?;
    let rep = grad_check(&olas, &g, 1e-6, |m| olas_pair_loss(m, &a, &b, 1))?;
    println!("olas  max rel error {:.2e} over {} entries", rep.max_rel_error, rep.checked);

    let classes = vec!["x".to_string(), "y".to_string()];
    let amas = AmasModel::init(&mut rng, u, r, classes, &AmasConfig { attention: Attention::Asha, attr_hidden: 3, lstm_hidden: 3, ..Default::default() })?;
    let (_, g) = amas_gradient(&amas, &a, 1, None)?;
    let rep = grad_check(&amas, &g, 1e-6, |m| amas_loss(m, &a, 1))?;
    println!("amas  max rel error {:.2e} over {} entries", rep.max_rel_error, rep.checked);
    Ok(())
}
