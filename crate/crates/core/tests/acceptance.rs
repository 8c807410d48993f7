//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use attrseq::amas::*;
use attrseq::checkpoint::{AnyModel, Checkpoint, EncodingInfo};
use attrseq::data::*;
use attrseq::metrics::*;
use attrseq::mlas::*;
use attrseq::nas::*;
use attrseq::numerics::{grad_check, ParamSet, Rng, Vector};
use attrseq::olas::*;

type Outcome = Result<String, String>;

fn random_record(rng: &mut Rng, id: &str, u: usize, r: usize, len: usize) -> AttributedSequence {
    let attrs = (0..u).map(|_| rng.uniform()).collect();
    let seq = (0..len).map(|_| rng.below(r)).collect();
    AttributedSequence::new(id, Vector::new(attrs).unwrap(), seq)
}

fn count_passing(seeds: u64, mut f: impl FnMut(u64) -> (bool, String)) -> (usize, Vec<String>) {
    let mut passed = 0;
    let mut notes = Vec::new();
    for seed in 0..seeds {
        let (ok, note) = f(seed);
        passed += ok as usize;
        notes.push(note);
    }
    (passed, notes)
}

// 1. Gradient fidelity.

fn gradient_fidelity() -> Outcome {
    let started = Instant::now();
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let mut note = |name: &str, e: f64| {
        let w = worst.entry(name.to_string()).or_insert(0.0);
        *w = w.max(e);
    };
    for seed in 0..20u64 {
        let mut rng = Rng::new(1000 + seed);
        let (u, r) = (2 + rng.below(5), 2 + rng.below(5));
        let len_a = 1 + rng.below(5);
        let len_b = 1 + rng.below(5);
        let a = random_record(&mut rng, "a", u, r, len_a);
        let b = random_record(&mut rng, "b", u, r, len_b);

        let nas = NasModel::init(&mut rng, u, r, &NasConfig { hidden: 4, layers: 2, conditioned: true }).unwrap();
        let (_, _, g) = nas_gradients(&nas, &a).unwrap();
        let rep = grad_check(&nas, &g, 1e-6, |p| {
            let (la, ls) = nas_losses(p, &a)?;
            Ok(la + ls)
        })
        .unwrap();
        note("nas", rep.max_rel_error);

        for fusion in [Fusion::Balanced, Fusion::AttCentric, Fusion::SeqCentric] {
            let cfg = MlasConfig {
                fusion,
                layers: 2,
                attr_hidden: 4,
                seq_hidden: 4,
                out_dim: 3,
                margin: 2.0,
                ..Default::default()
            };
            let m = MlasModel::init(&mut rng, u, r, &cfg).unwrap();
            for label in [0, 1] {
                let (_, g) = pair_gradient(&m, &a, &b, label).unwrap();
                let rep = grad_check(&m, &g, 1e-6, |p| Ok(contrastive_loss(pair_distance(p, &a, &b)?, label, p.margin)))
                    .unwrap();
                note(&format!("mlas {fusion:?}"), rep.max_rel_error);
            }
        }

        let ocfg = OlasConfig {
            layers: 2,
            fc_hidden: 4,
            lstm_hidden: 4,
            out_dim: 3,
            margin: 4.0,
            ..Default::default()
        };
        let o = OlasModel::init(&mut rng, u, r, &ocfg).unwrap();
        for label in [0, 1] {
            let (_, g) = olas_pair_gradient(&o, &a, &b, label).unwrap();
            let rep = grad_check(&o, &g, 1e-6, |q: &OlasModel| olas_pair_loss(q, &a, &b, label)).unwrap();
            note("olas", rep.max_rel_error);
        }

        for attention in [Attention::Asa, Attention::Asha] {
            let acfg = AmasConfig {
                attention,
                attr_hidden: 3,
                lstm_hidden: 3,
                ..Default::default()
            };
            let classes = vec!["x".to_string(), "y".to_string(), "z".to_string()];
            let mut m = AmasModel::init(&mut rng, u, r, classes, &acfg).unwrap();
            let n = m.num_params();
            let jitter: Vec<f64> = (0..n).map(|_| 0.1 * rng.normal()).collect();
            m.axpy(1.0, &from_flat(&m, &jitter)).unwrap();
            let y = rng.below(3);
            let (_, g) = amas_gradient(&m, &a, y, None).unwrap();
            let rep = grad_check(&m, &g, 1e-6, |q: &AmasModel| amas_loss(q, &a, y)).unwrap();
            note(&format!("amas {attention:?}"), rep.max_rel_error);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let max = worst.values().cloned().fold(0.0, f64::max);
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    if max < 1e-4 && secs < 120.0 {
        Ok(format!("max rel error {max:.1e} over 20 seeds in {secs:.1}s ({detail})"))
    } else {
        Err(format!("max rel error {max:.1e} in {secs:.1}s ({detail})"))
    }
}

/// A parameter set shaped like `like` holding `values` in flat order.
fn from_flat<P: ParamSet>(like: &P, values: &[f64]) -> P {
    let mut out = like.zeros_like();
    let mut at = 0;
    for t in out.tensors_mut() {
        let n = t.len();
        t.copy_from_slice(&values[at..at + n]);
        at += n;
    }
    out
}

// 2. Loss descent.

fn descent_nas(seed: u64) -> (f64, f64) {
    let root = Rng::new(seed);
    let cfg = SyntheticConfig {
        n_classes: 3,
        per_class: 20,
        attr_dim: 6,
        vocab_size: 12,
        min_len: 3,
        max_len: 8,
        ..Default::default()
    };
    let ds = generate_synthetic(&mut root.split(1), &cfg).unwrap();
    let mut m = NasModel::init(&mut root.split(2), 6, 12, &NasConfig { hidden: 8, ..Default::default() }).unwrap();
    let tc = NasTrainConfig { lr: 0.05, epochs: 5, ..Default::default() };
    let h = nas_train(&mut m, &ds, None, &tc).unwrap();
    (h[0].l_a + h[0].l_s, h[4].l_a + h[4].l_s)
}

fn mlas_fixture(seed: u64) -> (Dataset, Vec<FeedbackTriplet>, MlasModel) {
    let root = Rng::new(seed);
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
    let ds = generate_synthetic(&mut root.split(1), &cfg).unwrap();
    let fb = make_feedback(&ds, &mut root.split(2), 100).unwrap();
    let mcfg = MlasConfig {
        attr_hidden: 8,
        seq_hidden: 8,
        out_dim: 4,
        ..Default::default()
    };
    let m = MlasModel::init(&mut root.split(3), 6, 20, &mcfg).unwrap();
    (ds, fb, m)
}

fn descent_mlas(seed: u64) -> (f64, f64) {
    let (ds, fb, mut m) = mlas_fixture(seed);
    let tc = MlasTrainConfig { lr: 0.1, epochs: 5, eps: 1e-8 };
    let h = mlas_train(&mut m, &ds, &fb, None, &tc, &mut Rng::new(seed).split(4)).unwrap();
    (h[0].train, h[4].train)
}

fn descent_olas(seed: u64) -> (f64, f64) {
    let root = Rng::new(seed);
    let cfg = SyntheticConfig {
        n_classes: 4,
        per_class: 25,
        attr_dim: 8,
        vocab_size: 20,
        min_len: 4,
        max_len: 8,
        ..Default::default()
    };
    let ds = generate_synthetic(&mut root.split(1), &cfg).unwrap();
    let fb = make_feedback(&ds, &mut root.split(2), 200).unwrap();
    let ocfg = OlasConfig { fc_hidden: 16, lstm_hidden: 16, out_dim: 16, ..Default::default() };
    let mut m = OlasModel::init(&mut root.split(3), 8, 20, &ocfg).unwrap();
    let tc = OlasTrainConfig { lr: 0.01, epochs: 5, ..Default::default() };
    let h = olas_train(&mut m, &ds, &fb, None, &tc, &mut root.split(4)).unwrap();
    (h[0].train, h[4].train)
}

fn amas_fixture(seed: u64) -> (Dataset, Dataset) {
    let root = Rng::new(seed);
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
    let ds = generate_synthetic(&mut root.split(1), &cfg).unwrap();
    split_train_validation(&ds, 0.2, &mut root.split(2)).unwrap()
}

fn amas_model(seed: u64, attention: Attention, classes: Vec<String>) -> AmasModel {
    let acfg = AmasConfig {
        attention,
        attr_hidden: 16,
        lstm_hidden: 16,
        ..Default::default()
    };
    AmasModel::init(&mut Rng::new(seed).split(3), 8, 30, classes, &acfg).unwrap()
}

fn descent_amas(seed: u64) -> (f64, f64) {
    let (train, _) = amas_fixture(seed);
    let mut m = amas_model(seed, Attention::Asha, train.classes().unwrap());
    let tc = AmasTrainConfig { epochs: 5, ..Default::default() };
    let h = amas_train(&mut m, &train, None, &tc, &mut Rng::new(seed).split(4)).unwrap();
    (h[0].loss.train, h[4].loss.train)
}

fn loss_descent() -> Outcome {
    let started = Instant::now();
    let runs: [(&str, fn(u64) -> (f64, f64)); 4] = [
        ("nas", descent_nas),
        ("mlas", descent_mlas),
        ("olas", descent_olas),
        ("amas", descent_amas),
    ];
    let mut lines = Vec::new();
    let mut all = true;
    for (name, run) in runs {
        let (passed, _) = count_passing(5, |seed| {
            let (first, fifth) = run(seed);
            (fifth < first, format!("{first:.3}->{fifth:.3}"))
        });
        all &= passed >= 4;
        lines.push(format!("{name} {passed}/5"));
    }
    let secs = started.elapsed().as_secs_f64();
    let msg = format!("{} in {secs:.1}s", lines.join(", "));
    if all && secs < 300.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// 3. NAS dependency property.

fn nas_dependency() -> Outcome {
    let (passed, notes) = count_passing(5, |seed| {
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
        let ds = generate_synthetic(&mut Rng::new(seed), &cfg).unwrap();
        let labels: Vec<String> = ds.records.iter().map(|r| r.label.clone().unwrap()).collect();
        let mut sil = [0.0; 2];
        for (i, conditioned) in [true, false].into_iter().enumerate() {
            let ncfg = NasConfig { hidden: 15, layers: 1, conditioned };
            let mut m = NasModel::init(&mut Rng::new(seed).split(7), 11, 3, &ncfg).unwrap();
            let tc = NasTrainConfig { lr: 0.1, epochs: 20, ..Default::default() };
            nas_train(&mut m, &ds, None, &tc).unwrap();
            let embs = ds.records.iter().map(|r| nas_embed(&m, r).unwrap()).collect();
            let e = EmbeddingSet::new(ds.records.iter().map(|r| r.id.clone()).collect(), embs, None).unwrap();
            sil[i] = silhouette(&e, &labels).unwrap();
        }
        (sil[0] > 0.0 && sil[1] <= 0.1, format!("{:.2}/{:.2}", sil[0], sil[1]))
    });
    let msg = format!("{passed}/5 seeds, silhouette full/sequence-only: {}", notes.join(" "));
    if passed >= 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// 4. MLAS separation.

fn mlas_separation() -> Outcome {
    let (passed, notes) = count_passing(5, |seed| {
        let (ds, fb, mut m) = mlas_fixture(seed);
        let tc = MlasTrainConfig { lr: 0.1, epochs: 20, eps: 1e-8 };
        mlas_train(&mut m, &ds, &fb, None, &tc, &mut Rng::new(seed).split(4)).unwrap();
        let (mut sim, mut n_sim, mut dis, mut n_dis) = (0.0, 0, 0.0, 0);
        for t in &fb {
            let d = pair_distance(&m, ds.get(&t.left_id).unwrap(), ds.get(&t.right_id).unwrap()).unwrap();
            if t.label == 0 {
                sim += d;
                n_sim += 1;
            } else {
                dis += d;
                n_dis += 1;
            }
        }
        let ratio = (dis / n_dis as f64) / (sim / n_sim as f64);
        let embs = ds.records.iter().map(|r| mlas_embed(&m, r).unwrap()).collect();
        let e = EmbeddingSet::new(ds.records.iter().map(|r| r.id.clone()).collect(), embs, None).unwrap();
        let clusters = density_cluster(&e, 5, 0.3).unwrap();
        let labels: Vec<String> = ds.records.iter().map(|r| r.label.clone().unwrap()).collect();
        let score = nmi(&clusters, &labels).unwrap();
        (ratio >= 2.0 && score >= 0.8, format!("x{ratio:.1}/{score:.2}"))
    });
    let msg = format!("{passed}/5 seeds, distance ratio/nmi: {}", notes.join(" "));
    if passed >= 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// 5. OLAS one-shot.

fn olas_oneshot() -> Outcome {
    let mut sanity = true;
    let (passed, notes) = count_passing(5, |seed| {
        let root = Rng::new(seed);
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
        let ds = generate_synthetic(&mut root.split(1), &cfg).unwrap();
        let (train, oneshot) = split_classes_for_oneshot(&ds, 0.6, &mut root.split(2)).unwrap();
        assert_eq!((train.classes().unwrap().len(), oneshot.classes().unwrap().len()), (6, 4));
        let fb = make_feedback(&train, &mut root.split(3), 400).unwrap();
        let ocfg = OlasConfig {
            layers: 3,
            fc_hidden: 32,
            lstm_hidden: 32,
            out_dim: 32,
            ..Default::default()
        };
        let mut m = OlasModel::init(&mut root.split(4), 14, 40, &ocfg).unwrap();
        let tc = OlasTrainConfig { lr: 0.01, epochs: 10, ..Default::default() };
        olas_train(&mut m, &train, &fb, None, &tc, &mut root.split(5)).unwrap();

        let gallery = Gallery::first_per_class(&oneshot).unwrap();
        let ids = gallery.ids();
        let queries: Vec<AttributedSequence> =
            oneshot.records.iter().filter(|r| !ids.contains(r.id.as_str())).take(200).cloned().collect();
        assert_eq!(queries.len(), 200);
        let report = oneshot_eval(&m, &gallery, &queries).unwrap();

        let entries: Vec<AttributedSequence> = gallery.entries().iter().map(|(r, _)| r.clone()).collect();
        sanity &= oneshot_eval(&m, &gallery, &entries).unwrap().accuracy == 1.0;
        (report.accuracy >= 0.9, format!("{:.3}", report.accuracy))
    });
    let msg = format!(
        "{passed}/5 seeds at >= 0.9 (chance 0.25): {}; gallery-as-queries exact 1.0: {sanity}",
        notes.join(" ")
    );
    if passed >= 4 && sanity {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// 6. AMAS adaptive sampling and accuracy.

/// `floor(n1 · (num/den)^e)` in integer arithmetic.
fn floor_pow(n1: u128, num: u128, den: u128, e: u32) -> usize {
    (n1 * num.pow(e) / den.pow(e)) as usize
}

fn amas_sampling() -> Outcome {
    let mut problems = Vec::new();
    let (train, _) = amas_fixture(0);
    let n1 = 100usize;
    let epochs = 10usize;
    for (lambda, num, den) in [(1.0, 1u128, 1u128), (1.001, 1001, 1000), (1.005, 1005, 1000), (1.01, 101, 100)] {
        let expected: Vec<usize> = (0..epochs).map(|t| floor_pow(n1 as u128, num, den, t as u32)).collect();
        let schedule = adaptive_schedule(n1, lambda, epochs, usize::MAX).unwrap();
        if schedule != expected {
            problems.push(format!("schedule at lambda {lambda}: {schedule:?} vs {expected:?}"));
        }
        let mut m = amas_model(0, Attention::Asha, train.classes().unwrap());
        let tc = AmasTrainConfig {
            epochs,
            initial_samples: Some(n1),
            lambda,
            ..Default::default()
        };
        let h = amas_train(&mut m, &train, None, &tc, &mut Rng::new(9)).unwrap();
        let used: Vec<usize> = h.iter().map(|e| e.samples).collect();
        if used != expected {
            problems.push(format!("training at lambda {lambda}: {used:?} vs {expected:?}"));
        }
    }

    let mut accs = Vec::new();
    for attention in [Attention::Asha, Attention::Asa] {
        for seed in 0..5 {
            let (train, test) = amas_fixture(seed);
            let mut m = amas_model(seed, attention, train.classes().unwrap());
            amas_train(&mut m, &train, None, &AmasTrainConfig::default(), &mut Rng::new(seed).split(4)).unwrap();
            let top1 = topk_accuracy(&m, &test, 1).unwrap();
            let top5 = topk_accuracy(&m, &test, 5).unwrap();
            if top1 < 0.8 || top5 != 1.0 {
                problems.push(format!("{attention:?} seed {seed}: top-1 {top1:.3}, top-5 {top5:.3}"));
            }
            accs.push(top1);
        }
    }
    let lo = accs.iter().cloned().fold(1.0, f64::min);
    if problems.is_empty() {
        Ok(format!(
            "counts exact for 4 lambdas; top-1 >= {lo:.2} and top-5 = 1.0 for ASHA and ASA over 5 seeds"
        ))
    } else {
        Err(problems.join("; "))
    }
}

// 7. Metric oracles.

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn oracle_knn(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..points.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..points.len()).filter(|&j| j != i).map(|j| dist(&points[i], &points[j])).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[k - 1]
        })
        .collect()
}

fn oracle_auc(scores: &[f64], pos: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if pos[i] && !pos[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn oracle_nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut joint = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1.0;
    }
    let pa: Vec<f64> = joint.iter().map(|row| row.iter().sum::<f64>() / n).collect();
    let pb: Vec<f64> = (0..kb).map(|y| joint.iter().map(|row| row[y]).sum::<f64>() / n).collect();
    let h = |p: &[f64]| -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let p = joint[x][y] / n;
            if p > 0.0 {
                mi += p * (p / (pa[x] * pb[y])).ln();
            }
        }
    }
    mi / ((ha + hb) / 2.0)
}

fn oracle_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut by: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for j in 0..n {
            if j != i {
                let e = by.entry(labels[j]).or_insert((0.0, 0));
                e.0 += dist(&points[i], &points[j]);
                e.1 += 1;
            }
        }
        let own = by.get(&labels[i]).copied();
        let Some((sum_a, n_a)) = own else { continue };
        let a = sum_a / n_a as f64;
        let b = by
            .iter()
            .filter(|(&l, _)| l != labels[i])
            .map(|(_, &(s, c))| s / c as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

fn metric_oracles() -> Outcome {
    let started = Instant::now();
    let mut rng = Rng::new(77);
    let mut worst = 0.0f64;
    let mut counting_exact = true;
    for case in 0..100 {
        let n = 4 + rng.below(97);
        let d = 1 + rng.below(5);
        // Coarse grids create ties and duplicate points.
        let grid = if case % 3 == 0 { 2.0 } else { 1000.0 };
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| (rng.uniform() * grid).round()).collect()).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let emb = EmbeddingSet::new(ids, points.iter().map(|p| Vector::new(p.clone()).unwrap()).collect(), None).unwrap();

        let k = 1 + rng.below(n - 1);
        let got = knn_outlier_scores(&emb, k).unwrap();
        for (g, o) in got.iter().zip(oracle_knn(&points, k)) {
            worst = worst.max((g - o).abs());
        }

        let mut pos: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.3)).collect();
        pos[0] = true;
        pos[1] = false;
        worst = worst.max((roc_auc(&got, &pos).unwrap() - oracle_auc(&got, &pos)).abs());

        let ka = 1 + rng.below(5);
        let kb = 1 + rng.below(5);
        let la: Vec<usize> = (0..n).map(|_| rng.below(ka)).collect();
        let lb: Vec<usize> = (0..n).map(|_| rng.below(kb)).collect();
        worst = worst.max((nmi(&la, &lb).unwrap() - oracle_nmi(&la, &lb)).abs());

        let mut sl = la.clone();
        sl[0] = 0;
        sl[1] = 1;
        worst = worst.max((silhouette(&emb, &sl).unwrap() - oracle_silhouette(&points, &sl)).abs());

        let hits = la.iter().zip(&lb).filter(|(a, b)| a == b).count();
        counting_exact &= accuracy(&la, &lb).unwrap() == hits as f64 / n as f64;
    }
    let secs = started.elapsed().as_secs_f64();
    let msg = format!("max deviation {worst:.1e} over 100 instances, accuracy exact: {counting_exact}, {secs:.1}s");
    if worst <= 1e-9 && counting_exact && secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// 8. Determinism and persistence.

fn pipeline(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        "seed = 11\nfeedback_pairs = 60\n[synthetic]\nn_classes = 3\nper_class = 15\nattr_dim = 5\nvocab_size = 15\n\
         min_len = 3\nmax_len = 7\noutliers = 5\n[nas]\nhidden = 6\n[nas_train]\nepochs = 3\n",
    )
    .unwrap();
    let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
    let c = config.to_string_lossy().into_owned();
    let steps: Vec<Vec<String>> = vec![
        vec!["generate".into(), "--out".into(), p("gen")],
        vec!["train".into(), "--data".into(), p("gen/dataset.jsonl"), "--out".into(), p("train")],
        vec!["embed".into(), "--checkpoint".into(), p("train/model.ckpt"), "--data".into(), p("gen/dataset.jsonl"), "--out".into(), p("emb")],
        vec!["eval".into(), "--embeddings".into(), p("emb/embeddings.csv"), "--data".into(), p("gen/dataset.jsonl"), "--out".into(), p("eval")],
    ];
    for step in steps {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_attrseq"))
            .args(&step)
            .args(["--config", &c])
            .output()
            .unwrap();
        assert!(out.status.success(), "{step:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let mut files = Vec::new();
    for sub in ["gen", "train", "emb", "eval"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for path in names {
            let bytes = std::fs::read(&path).unwrap();
            // The summary quotes the absolute path of the embeddings file.
            let bytes = String::from_utf8(bytes).map_or_else(
                |e| e.into_bytes(),
                |s| s.replace(&dir.to_string_lossy().into_owned(), "<dir>").into_bytes(),
            );
            files.push((format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()), bytes));
        }
    }
    files
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (fa, fb) = (pipeline(a.path()), pipeline(b.path()));
    if fa != fb {
        let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
        return Err(format!("pipeline outputs differ: {differing:?}"));
    }

    let mut rng = Rng::new(3);
    let ds = generate_synthetic(&mut rng.split(1), &SyntheticConfig { n_classes: 3, per_class: 4, ..Default::default() }).unwrap();
    let (u, r) = (ds.attr_dim, ds.vocab_size());
    let models = vec![
        AnyModel::Nas(NasModel::init(&mut rng, u, r, &NasConfig::default()).unwrap()),
        AnyModel::Mlas(MlasModel::init(&mut rng, u, r, &MlasConfig { fusion: Fusion::SeqCentric, ..Default::default() }).unwrap()),
        AnyModel::Olas(OlasModel::init(&mut rng, u, r, &OlasConfig::default()).unwrap()),
        AnyModel::Amas(AmasModel::init(&mut rng, u, r, ds.classes().unwrap(), &AmasConfig::default()).unwrap()),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, model) in models.into_iter().enumerate() {
        let ck = Checkpoint::new(model, EncodingInfo::of(&ds)).unwrap();
        let path = dir.path().join(format!("m{i}.ckpt"));
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let bits = |c: &Checkpoint| -> Vec<u64> {
            let flat = match &c.model {
                AnyModel::Nas(m) => m.flatten(),
                AnyModel::Mlas(m) => m.flatten(),
                AnyModel::Olas(m) => m.flatten(),
                AnyModel::Amas(m) => m.flatten(),
            };
            flat.into_iter().map(f64::to_bits).collect()
        };
        if bits(&back) != bits(&ck) || back != ck || back.to_bytes().unwrap() != std::fs::read(&path).unwrap() {
            return Err(format!("checkpoint {} did not round-trip", ck.model.framework().name()));
        }
    }
    Ok(format!("{} pipeline files byte-identical across two runs; 4 checkpoints round-trip bitwise", fa.len()))
}

// 9. Contrastive-loss pointwise values.

fn contrastive_values() -> Outcome {
    let mut problems = Vec::new();
    let mut check = |what: &str, got: f64, want: f64| {
        if got != want {
            problems.push(format!("{what}: {got} != {want}"));
        }
    };
    check("metric loss, similar, d=0.3", contrastive_loss(0.3, 0, 1.0), 0.5 * 0.3 * 0.3);
    check("metric loss, dissimilar beyond margin", contrastive_loss(1.2, 1, 1.0), 0.0);
    check("metric loss, dissimilar, d=0.4", contrastive_loss(0.4, 1, 1.0), 0.5 * (1.0 - 0.4) * (1.0 - 0.4));
    check("one-shot loss, dissimilar at the margin", olas_loss(1.0, 1, 1.0), 0.0);
    check("one-shot loss, dissimilar beyond margin", olas_loss(1.7, 1, 1.0), 0.0);
    check("one-shot loss, dissimilar, d=0.5", olas_loss(0.5, 1, 1.0), 0.125);

    let mut rng = Rng::new(5);
    let m = OlasModel::init(&mut rng, 4, 5, &OlasConfig::default()).unwrap();
    let rec = random_record(&mut rng, "a", 4, 5, 4);
    check("one-shot pair loss, identical similar records", olas_pair_loss(&m, &rec, &rec, 0).unwrap(), 0.0);

    let approx = |x: f64, y: f64| (x - y).abs() <= 1e-15 * y.abs().max(1.0);
    if !approx(contrastive_loss(0.4, 1, 1.0), 0.18) {
        problems.push(format!("metric loss at d=0.4 is {}", contrastive_loss(0.4, 1, 1.0)));
    }
    for margin in [0.5, 1.0, 2.5] {
        for (name, f) in [("metric", contrastive_loss as fn(f64, u8, f64) -> f64), ("one-shot", olas_loss)] {
            let at = f(margin, 1, margin);
            let below = f(margin - 1e-9, 1, margin);
            let above = f(margin + 1e-9, 1, margin);
            if at != 0.0 || below > 1e-17 || above != 0.0 {
                problems.push(format!("{name} loss discontinuous at margin {margin}"));
            }
        }
    }
    if problems.is_empty() {
        Ok("3 metric and 4 one-shot substitution cases exact; both losses continuous at the margin".into())
    } else {
        Err(problems.join("; "))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 gradient fidelity", gradient_fidelity),
        ("2 loss descent", loss_descent),
        ("3 nas attribute-sequence dependency", nas_dependency),
        ("4 mlas separation", mlas_separation),
        ("5 olas one-shot accuracy", olas_oneshot),
        ("6 amas adaptive sampling and accuracy", amas_sampling),
        ("7 metric oracles", metric_oracles),
        ("8 determinism and persistence", determinism),
        ("9 contrastive loss values", contrastive_values),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
