//! Attention-based classification with adaptive sampling, and the attention
//! weights for one record.

use attrseq::amas::{
    adaptive_schedule, amas_train, attention_trace, classify, topk_accuracy, AmasConfig, AmasModel, AmasTrainConfig,
    Attention,
};
use attrseq::data::{generate_synthetic, split_train_validation, SyntheticConfig};
use attrseq::numerics::Rng;

fn main() -> attrseq::Result<()> {
    let root = Rng::new(0);
    let cfg = SyntheticConfig {
        n_classes: 5,
        per_class: 40,
        attr_dim: 8,
        vocab_size: 30,
        min_len: 5,
        max_len: 10,
        noise: 0.1,
        ..Default::default()
    };
    let ds = generate_synthetic(&mut root.split(1), &cfg)?;
    let (train, test) = split_train_validation(&ds, 0.2, &mut root.split(2))?;

    println!("samples per epoch at lambda 1.05: {:?}", adaptive_schedule(40, 1.05, 10, train.len())?);

    for attention in [Attention::NoAttention, Attention::Asa, Attention::Asha] {
        let acfg = AmasConfig { attention, attr_hidden: 16, lstm_hidden: 16, ..Default::default() };
        let mut model = AmasModel::init(&mut root.split(3), ds.attr_dim, ds.vocab_size(), train.classes()?, &acfg)?;
        let tc = AmasTrainConfig { initial_samples: Some(40), lambda: 1.05, ..Default::default() };
        amas_train(&mut model, &train, None, &tc, &mut root.split(4))?;
        println!(
            "{attention:?}: top-1 {:.3}  top-3 {:.3}",
            topk_accuracy(&model, &test, 1)?,
            topk_accuracy(&model, &test, 3)?
        );
        if let Some(trace) = attention_trace(&model, &test.records[0])? {
            let (predicted, _) = classify(&model, &test.records[0])?;
            let step_mass: Vec<String> = trace
                .weights
                .iter()
                .map(|w| format!("{:.2}", w.sum() / w.len() as f64))
                .collect();
            println!("  {} -> class {predicted}, mean weight per step [{}]", test.records[0].id, step_mass.join(" "));
        }
    }
    Ok(())
}
