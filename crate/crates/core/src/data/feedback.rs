use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{config_err, Result};
use crate::numerics::Rng;

/// A pair of record ids with a similarity label: 0 = same class (similar),
/// 1 = different classes (dissimilar).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackTriplet {
    pub left_id: String,
    pub right_id: String,
    pub label: u8,
}

/// Draws `n_pairs` label-derived pairs: `n_pairs / 2` similar, the rest
/// dissimilar, shuffled. A record is never paired with itself.
pub fn make_feedback(dataset: &Dataset, rng: &mut Rng, n_pairs: usize) -> Result<Vec<FeedbackTriplet>> {
    if n_pairs < 2 {
        return config_err("n_pairs must be >= 2");
    }
    let classes = dataset.classes()?;
    if classes.len() < 2 {
        return config_err("feedback needs at least two classes");
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in dataset.records.iter().enumerate() {
        by_class.entry(r.label.as_deref().unwrap_or_default()).or_default().push(i);
    }
    // Records whose class has a partner, for similar draws.
    let pairable: Vec<usize> = by_class
        .values()
        .filter(|m| m.len() >= 2)
        .flatten()
        .copied()
        .collect();
    if pairable.is_empty() {
        return config_err("no class has two records to form a similar pair");
    }
    let label_of = |i: usize| dataset.records[i].label.as_deref().unwrap_or_default();
    let n_similar = n_pairs / 2;
    let mut out = Vec::with_capacity(n_pairs);
    for _ in 0..n_similar {
        let a = pairable[rng.below(pairable.len())];
        let members = &by_class[label_of(a)];
        let b = loop {
            let b = members[rng.below(members.len())];
            if b != a {
                break b;
            }
        };
        out.push((a, b, 0));
    }
    let n = dataset.len();
    for _ in n_similar..n_pairs {
        let a = rng.below(n);
        let b = loop {
            let b = rng.below(n);
            if label_of(b) != label_of(a) {
                break b;
            }
        };
        out.push((a, b, 1));
    }
    rng.shuffle(&mut out);
    Ok(out
        .into_iter()
        .map(|(a, b, label)| FeedbackTriplet {
            left_id: dataset.records[a].id.clone(),
            right_id: dataset.records[b].id.clone(),
            label,
        })
        .collect())
}

/// Seeded shuffle, then the last `round(n · fraction)` items become the
/// holdout. Returns `(kept, holdout)`.
pub fn split_slice<T: Clone>(items: &[T], fraction: f64, rng: &mut Rng) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return config_err(format!("split fraction must lie in (0, 1), got {fraction}"));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    rng.shuffle(&mut order);
    let n_hold = (items.len() as f64 * fraction).round() as usize;
    let cut = items.len() - n_hold;
    let kept = order[..cut].iter().map(|&i| items[i].clone()).collect();
    let hold = order[cut..].iter().map(|&i| items[i].clone()).collect();
    Ok((kept, hold))
}

/// `(train, validation)` with validation holding `fraction` of the records.
pub fn split_train_validation(dataset: &Dataset, fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    let (train, val) = split_slice(&dataset.records, fraction, rng)?;
    Ok((dataset.with_records(train), dataset.with_records(val)))
}

/// Splits by class: `round(n_classes · train_fraction)` classes (clamped so
/// both sides get one) go to training, the rest to the one-shot side.
pub fn split_classes_for_oneshot(
    dataset: &Dataset,
    train_fraction: f64,
    rng: &mut Rng,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return config_err("train_fraction must lie in (0, 1)");
    }
    let mut classes = dataset.classes()?;
    if classes.len() < 2 {
        return config_err("one-shot split needs at least two classes");
    }
    rng.shuffle(&mut classes);
    let n_train = ((classes.len() as f64 * train_fraction).round() as usize).clamp(1, classes.len() - 1);
    let train_classes = &classes[..n_train];
    let (train, oneshot): (Vec<_>, Vec<_>) = dataset
        .records
        .iter()
        .cloned()
        .partition(|r| train_classes.iter().any(|c| Some(c) == r.label.as_ref()));
    Ok((dataset.with_records(train), dataset.with_records(oneshot)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use std::collections::HashSet;

    fn corpus(n_classes: usize, per_class: usize) -> Dataset {
        let cfg = SyntheticConfig {
            n_classes,
            per_class,
            vocab_size: 20,
            min_len: 2,
            max_len: 5,
            ..Default::default()
        };
        generate_synthetic(&mut Rng::new(3), &cfg).unwrap()
    }

    #[test]
    fn feedback_is_balanced_and_consistent() {
        let ds = corpus(3, 10);
        let fb = make_feedback(&ds, &mut Rng::new(1), 10).unwrap();
        assert_eq!(fb.iter().filter(|t| t.label == 0).count(), 5);
        assert_eq!(fb.iter().filter(|t| t.label == 1).count(), 5);
        for t in &fb {
            let a = ds.get(&t.left_id).unwrap();
            let b = ds.get(&t.right_id).unwrap();
            assert_ne!(t.left_id, t.right_id);
            assert_eq!(t.label == 0, a.label == b.label);
        }
    }

    #[test]
    fn feedback_needs_two_classes() {
        assert!(make_feedback(&corpus(1, 10), &mut Rng::new(1), 10).is_err());
        assert!(make_feedback(&corpus(2, 10), &mut Rng::new(1), 1).is_err());
    }

    #[test]
    fn train_validation_split() {
        let ds = corpus(4, 25);
        let (tr, va) = split_train_validation(&ds, 0.2, &mut Rng::new(2)).unwrap();
        assert_eq!((tr.len(), va.len()), (80, 20));
        let ids: HashSet<_> = tr.records.iter().chain(&va.records).map(|r| r.id.clone()).collect();
        assert_eq!(ids.len(), 100);
        let (tr2, _) = split_train_validation(&ds, 0.2, &mut Rng::new(2)).unwrap();
        assert_eq!(tr, tr2);
        assert!(split_train_validation(&ds, 1.0, &mut Rng::new(2)).is_err());
    }

    #[test]
    fn oneshot_split_disjoint_classes() {
        let ds = corpus(10, 3);
        let (tr, os) = split_classes_for_oneshot(&ds, 0.6, &mut Rng::new(5)).unwrap();
        let a: HashSet<_> = tr.classes().unwrap().into_iter().collect();
        let b: HashSet<_> = os.classes().unwrap().into_iter().collect();
        assert_eq!((a.len(), b.len()), (6, 4));
        assert!(a.is_disjoint(&b));
        assert_eq!(tr.len() + os.len(), ds.len());

        let (tr, os) = split_classes_for_oneshot(&corpus(2, 3), 0.5, &mut Rng::new(5)).unwrap();
        assert_eq!((tr.classes().unwrap().len(), os.classes().unwrap().len()), (1, 1));
    }
}
