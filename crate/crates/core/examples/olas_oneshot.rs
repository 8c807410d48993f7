//! Train on some classes, then label records of unseen classes from a single
//! example each.

use attrseq::data::{generate_synthetic, make_feedback, split_classes_for_oneshot, SyntheticConfig};
use attrseq::numerics::Rng;
use attrseq::olas::{oneshot_eval, olas_train, Gallery, OlasConfig, OlasModel, OlasTrainConfig};

fn main() -> attrseq::Result<()> {
    let root = Rng::new(0);
    let cfg = SyntheticConfig {
        n_classes: 10,
        per_class: 60,
        attr_dim: 14,
        distractors: 3,
        vocab_size: 40,
        min_len: 8,
        max_len: 16,
        noise: 0.1,
        ..Default::default()
    };
    let ds = generate_synthetic(&mut root.split(1), &cfg)?;
    let (train, unseen) = split_classes_for_oneshot(&ds, 0.6, &mut root.split(2))?;
    let pairs = make_feedback(&train, &mut root.split(3), 400)?;

    let ocfg = OlasConfig { layers: 3, fc_hidden: 32, lstm_hidden: 32, out_dim: 32, ..Default::default() };
    let mut model = OlasModel::init(&mut root.split(4), ds.attr_dim, ds.vocab_size(), &ocfg)?;
    let tc = OlasTrainConfig { lr: 0.01, epochs: 10, ..Default::default() };
    for e in olas_train(&mut model, &train, &pairs, None, &tc, &mut root.split(5))? {
        println!("epoch {:>2}  loss {:.4}", e.epoch, e.train);
    }

    let gallery = Gallery::first_per_class(&unseen)?;
    let ids = gallery.ids();
    let queries: Vec<_> = unseen.records.iter().filter(|r| !ids.contains(r.id.as_str())).cloned().collect();
    let report = oneshot_eval(&model, &gallery, &queries)?;
    println!(
        "{} unseen classes, {} queries: accuracy {:.3}",
        gallery.len(),
        queries.len(),
        report.accuracy
    );
    Ok(())
}
