use eauq::data::{load_csv_auto, synthesize, write_csv, Dataset, Example, SyntheticConfig, Vote};
use eauq::estimators::{
    build_ce, build_eae, expert_mp, max_prob_complexity, model_mp, population_std, CeConfig, EstimateContext,
    Method,
};
use eauq::eval::{aac, rejection_curve, ScoredPrediction};
use eauq::nn::{dropout_mask, train, DropoutMode, Loss, LrSchedule, Mlp, Sample, TrainConfig};
use eauq::{estimators, seed};
use num_rational::Ratio;
use num_traits::Signed;
use proptest::prelude::*;
use rand::Rng;

type Q = Ratio<i64>;

#[test]
fn inverted_dropout_has_unit_mean() {
    let mut rng = seed::rng(77);
    let n = 10_000;
    let draws: Vec<f64> = (0..n).map(|_| dropout_mask::<f64>(&mut rng, 1, 0.2)[0]).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn xor_is_learned() {
    let xs = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let ys = [0.0, 1.0, 1.0, 0.0];
    let samples: Vec<_> = xs.iter().zip(ys).map(|(x, y)| Sample::new(&x[..], y)).collect();
    let model = Mlp::<f64>::new(&[2, 8, 1], 0.0, 5).unwrap();
    let cfg = TrainConfig {
        epochs: 2000,
        initial_lr: 0.5,
        lr_schedule: LrSchedule::Constant,
        weight_decay: 0.0,
        batch_size: 4,
        seed: 1,
        checkpoint_interval_epochs: None,
        loss: Loss::BinaryCrossEntropy,
    };
    let (trained, _) = train(&model, &samples, &cfg).unwrap();
    for (x, y) in xs.iter().zip(ys) {
        let p = trained.forward(x, DropoutMode::Deterministic).unwrap();
        assert_eq!(p >= 0.5, y == 1.0, "{x:?} -> {p}");
    }
}

#[test]
fn training_is_bit_reproducible() {
    let ds = synthesize::<f64>(&SyntheticConfig { n_examples: 60, n_features: 4, seed: 8, ..Default::default() })
        .unwrap();
    let samples = ds.label_samples();
    let model = Mlp::new(&[4, 6, 1], 0.2, 3).unwrap();
    let cfg = TrainConfig { epochs: 30, initial_lr: 0.1, seed: 99, ..TrainConfig::classification() };
    let (a, _) = train(&model, &samples, &cfg).unwrap();
    let (b, _) = train(&model, &samples, &cfg).unwrap();
    assert!(a.params().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
    let (c, _) = train(&model, &samples, &cfg.clone().with_seed(100)).unwrap();
    assert_ne!(a, c);
}

/// Nearest integer to a value in [0, 1], with 1/2 going to 0.
fn nearest_int(e: Q) -> Q {
    if e > Q::new(1, 2) {
        Q::from_integer(1)
    } else {
        Q::from_integer(0)
    }
}

#[test]
fn mp_forms_agree_on_small_vote_sets() {
    // Exhaustive up to four experts; the six-expert sweep lives in the acceptance suite.
    for n in 1..=4u32 {
        for code in 0..5usize.pow(n) {
            let quarters: Vec<u8> = (0..n).map(|k| (code / 5usize.pow(k) % 5) as u8).collect();
            let votes: Vec<Vote> = quarters.iter().map(|&q| Vote::from_quarters(q).unwrap()).collect();
            let e = Q::new(quarters.iter().map(|&q| i64::from(q)).sum(), 4 * i64::from(n));
            let mp: Q = expert_mp(&votes).unwrap();
            assert_eq!(mp, Q::from_integer(1) - e.max(Q::from_integer(1) - e));
            assert_eq!(mp, (nearest_int(e) - e).abs());
        }
    }
}

#[test]
fn eae_without_finetuning_is_ce_mp() {
    let ds = synthesize::<f64>(&SyntheticConfig { n_examples: 40, n_features: 3, seed: 1, ..Default::default() })
        .unwrap();
    let sets = [ds.clone()];
    let cfg = CeConfig {
        k: 3,
        hidden: vec![5],
        train: TrainConfig { epochs: 5, initial_lr: 0.1, ..TrainConfig::classification() },
        ..Default::default()
    };
    let ce = build_ce(&sets, &cfg).unwrap().ensemble;
    let eae = build_eae(&ce, &sets, &TrainConfig { epochs: 0, ..TrainConfig::finetune() }).unwrap();
    let ctx = EstimateContext { ce: Some(&ce), eae: Some(&eae), ..Default::default() };
    for ex in ds.examples() {
        let s = estimators::estimate(Method::EaeMp, &ctx, ex).unwrap();
        assert_eq!(s.value, model_mp(ce.mean(&ex.features).unwrap()).unwrap());
    }
}

#[test]
fn labels_follow_the_generating_posterior() {
    let cfg = SyntheticConfig {
        n_examples: 10_000,
        n_features: 4,
        class_separation: 3.0,
        aleatoric_band_fraction: 0.5,
        seed: 21,
        ..Default::default()
    };
    let ds = synthesize::<f64>(&cfg).unwrap();
    let bins = 10;
    let mut count = vec![0usize; bins];
    let mut positives = vec![0usize; bins];
    let mut p_sum = vec![0.0; bins];
    for ex in ds.examples() {
        let p = ex.true_positive_prob.unwrap();
        let b = ((p * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        positives[b] += usize::from(ex.label);
        p_sum[b] += p;
    }
    for b in 0..bins {
        if count[b] < 30 {
            continue;
        }
        let n = count[b] as f64;
        let expected = p_sum[b] / n;
        let rate = positives[b] as f64 / n;
        let se = (expected * (1.0 - expected) / n).sqrt().max(1e-3);
        assert!((rate - expected).abs() <= 3.0 * se, "bin {b}: rate {rate}, expected {expected}, n {n}");
    }
}

fn preds_strategy(max: usize) -> impl Strategy<Value = Vec<(bool, f64)>> {
    prop::collection::vec((any::<bool>(), 0.0f64..1.0), 1..max)
}

fn to_preds(v: &[(bool, f64)]) -> Vec<ScoredPrediction<f64>> {
    v.iter()
        .enumerate()
        .map(|(i, &(correct, u))| ScoredPrediction {
            example_id: format!("{i:04}"),
            predicted_prob: 0.8,
            label: correct,
            uncertainty: u,
        })
        .collect()
}

/// Direct re-derivation of the area from raw predictions.
fn brute_aac(preds: &[ScoredPrediction<f64>]) -> f64 {
    let n = preds.len();
    let mut sorted: Vec<&ScoredPrediction<f64>> = preds.iter().collect();
    sorted.sort_by(|a, b| b.uncertainty.partial_cmp(&a.uncertainty).unwrap().then(a.example_id.cmp(&b.example_id)));
    let mut total = 0.0;
    for m in 0..n {
        let kept = &sorted[m..];
        let correct = kept.iter().filter(|p| (p.predicted_prob >= 0.5) == p.label).count();
        total += 1.0 - correct as f64 / kept.len() as f64;
    }
    total / n as f64
}

proptest! {
    #[test]
    fn forward_stays_in_open_unit_interval(seed in any::<u64>(), x in prop::collection::vec(-1e3f64..1e3, 3)) {
        let m = Mlp::<f64>::new(&[3, 8, 4, 1], 0.2, seed).unwrap();
        for mode in [DropoutMode::Deterministic, DropoutMode::Active(seed)] {
            let p = m.forward(&x, mode).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn std_matches_formula_and_ignores_order(v in prop::collection::vec(0.0f64..=1.0, 2..30), rot in 0usize..30) {
        let k = v.len() as f64;
        let m = v.iter().sum::<f64>() / k;
        let oracle = (v.iter().map(|p| (p - m).powi(2)).sum::<f64>() / k).sqrt();
        let s = population_std(&v).unwrap();
        prop_assert!((s - oracle).abs() <= 1e-12);
        prop_assert!((0.0..=0.5 + 1e-15).contains(&s));
        let mut w = v.clone();
        w.rotate_left(rot % v.len());
        w.reverse();
        prop_assert!((population_std(&w).unwrap() - s).abs() <= 1e-12);
    }

    #[test]
    fn mp_is_bounded_and_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (ma, mb) = (max_prob_complexity(a), max_prob_complexity(b));
        prop_assert!((0.0..=0.5).contains(&ma));
        if (a - 0.5).abs() > (b - 0.5).abs() {
            prop_assert!(ma < mb);
        }
    }

    #[test]
    fn aac_matches_brute_force(v in preds_strategy(40)) {
        let preds = to_preds(&v);
        let curve = rejection_curve(&preds).unwrap();
        prop_assert!((aac(&curve) - brute_aac(&preds)).abs() <= 1e-12);
        let plain = preds.iter().filter(|p| p.is_correct()).count() as f64 / preds.len() as f64;
        prop_assert_eq!(curve.points()[0], (0.0, plain));
    }

    #[test]
    fn aac_depends_only_on_score_order(v in preds_strategy(40)) {
        let preds = to_preds(&v);
        let transformed: Vec<_> = preds
            .iter()
            .map(|p| ScoredPrediction { uncertainty: (3.0 * p.uncertainty).exp() + 2.0, ..p.clone() })
            .collect();
        let a = aac(&rejection_curve(&preds).unwrap());
        let b = aac(&rejection_curve(&transformed).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn csv_roundtrip(seed in any::<u64>(), n in 1usize..20, with_votes in any::<bool>()) {
        let mut rng = seed::rng(seed);
        let examples: Vec<Example<f64>> = (0..n)
            .map(|i| Example {
                id: format!("row{i}"),
                features: (0..3).map(|_| rng.random_range(-1e3..1e3)).collect(),
                label: rng.random(),
                expert_votes: with_votes
                    .then(|| (0..4).map(|_| Vote::from_quarters(rng.random_range(0..=4)).unwrap()).collect()),
                true_positive_prob: None,
            })
            .collect();
        let ds = Dataset::new(examples).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, file.path()).unwrap();
        let back: Dataset<f64> = load_csv_auto(file.path()).unwrap();
        prop_assert_eq!(back.len(), ds.len());
        for (a, b) in ds.examples().iter().zip(back.examples()) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(&a.expert_votes, &b.expert_votes);
            for (x, y) in a.features.iter().zip(&b.features) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
