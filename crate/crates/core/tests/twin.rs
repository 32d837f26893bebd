use chrono::NaiveDate;
use onlc_core::cohort::standardized_mse;
use onlc_core::data::{ConditionGroup, DietGroup, Group};
use onlc_core::twin::{
    finetune, pretrain, train_from_scratch, weekly_retrain, FeatureVector, Predictor, Provenance, RetrainWindow,
    TrainConfig, TrainingPair, TwinError, TwinModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GROUP: Group = Group {
    diet: DietGroup::Keto,
    condition: ConditionGroup::ObeseT2D,
};

fn day(n: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Duration::days(n)
}

fn small(epochs: usize) -> TrainConfig {
    TrainConfig {
        hidden: [8, 8, 4],
        learning_rate: 5e-3,
        batch_size: 16,
        max_epochs: epochs,
        patience: epochs,
        validation_fraction: 0.0,
        ..TrainConfig::pretrain()
    }
}

fn features(rng: &mut ChaCha8Rng) -> FeatureVector {
    FeatureVector {
        net_carb: rng.gen_range(20.0..200.0),
        fat: rng.gen_range(40.0..160.0),
        fiber: rng.gen_range(10.0..40.0),
        protein: rng.gen_range(50.0..130.0),
        activity_calories: rng.gen_range(100.0..600.0),
        steps: rng.gen_range(2000.0..12000.0),
        prev_glucose: rng.gen_range(90.0..200.0),
        prev_weight: rng.gen_range(170.0..240.0),
        prev_ketone: rng.gen_range(0.1..2.0),
    }
}

/// Next-day outcomes that are an exact linear function of the inputs.
fn linear_oracle(f: &FeatureVector) -> [Option<f64>; 3] {
    [
        Some(0.6 * f.prev_glucose + 0.3 * f.net_carb - 0.002 * f.steps + 30.0),
        Some(f.prev_weight + 0.004 * (f.net_carb * 4.0 + f.fat * 9.0 + f.protein * 4.0 - 2000.0) / 3.5),
        Some(0.5 * f.prev_ketone + 0.005 * f.fat),
    ]
}

fn pairs(n: usize, seed: u64, target: impl Fn(&FeatureVector) -> [Option<f64>; 3]) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let features = features(&mut rng);
            TrainingPair {
                patient_id: format!("p{}", i % 5),
                feature_date: day(i as i64),
                target_date: day(i as i64 + 1),
                next: target(&features),
                features,
            }
        })
        .collect()
}

#[test]
fn learns_linear_oracle() {
    let train = pairs(400, 1, linear_oracle);
    let test = pairs(100, 2, linear_oracle);
    let (model, report) = pretrain(&train, &small(300)).unwrap();
    let mse = standardized_mse(&model, &test).unwrap();
    assert!(mse < 0.05, "standardized mse {mse}");
    assert!(report.final_train_loss < report.initial_train_loss);
}

#[test]
fn constant_target_is_reproduced() {
    let train = pairs(200, 3, |f| [Some(120.0), Some(f.prev_weight), Some(0.5)]);
    let (model, _) = pretrain(&train, &small(200)).unwrap();
    for p in pairs(20, 4, |_| [None, None, None]) {
        let out = model.predict(&p.features).unwrap();
        assert!((out.glucose - 120.0).abs() < 2.0, "{out:?}");
        assert!((out.weight - p.features.prev_weight).abs() < 1.0, "{out:?}");
        assert!((out.ketone - 0.5).abs() < 0.05, "{out:?}");
    }
}

#[test]
fn masked_targets_are_tolerated() {
    let train = pairs(100, 5, |f| {
        let mut t = linear_oracle(f);
        t[2] = None;
        t
    });
    let (model, _) = pretrain(&train, &small(20)).unwrap();
    assert!(model.predict(&train[0].features).unwrap().ketone.is_finite());
}

#[test]
fn training_is_deterministic() {
    let train = pairs(120, 6, linear_oracle);
    let a = pretrain(&train, &small(30)).unwrap().0;
    let b = pretrain(&train, &small(30)).unwrap().0;
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn json_is_byte_stable() {
    let model = pretrain(&pairs(60, 7, linear_oracle), &small(10)).unwrap().0;
    let text = model.to_json();
    let back = TwinModel::from_json(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.to_json(), text);
}

#[test]
fn zero_epoch_finetune_keeps_weights() {
    let train = pairs(80, 8, linear_oracle);
    let base = pretrain(&train, &small(20)).unwrap().0;
    let before = base.clone();
    let (tuned, _) = finetune(&base, GROUP, &pairs(21, 9, linear_oracle), &small(0)).unwrap();
    assert_eq!(base, before);
    assert_eq!(tuned.network, base.network);
    assert_eq!(tuned.input_norm, base.input_norm);
    assert_eq!(tuned.meta.parent, Some(base.fingerprint()));
    match tuned.provenance {
        Provenance::FineTuned { group, ref pooled_parent } => {
            assert_eq!(group, GROUP);
            assert_eq!(pooled_parent, &base.fingerprint());
        }
        ref other => panic!("{other:?}"),
    }
}

#[test]
fn finetune_never_fits_its_data_worse() {
    let base = pretrain(&pairs(200, 10, linear_oracle), &small(50)).unwrap().0;
    let shifted = pairs(21, 11, |f| {
        let mut t = linear_oracle(f);
        t[0] = t[0].map(|g| g + 25.0);
        t
    });
    let (tuned, _) = finetune(&base, GROUP, &shifted, &small(100)).unwrap();
    assert!(standardized_mse(&tuned, &shifted).unwrap() <= standardized_mse(&base, &shifted).unwrap() + 1e-12);
}

#[test]
fn finetune_rejects_mismatched_architecture() {
    let base = pretrain(&pairs(40, 12, linear_oracle), &small(5)).unwrap().0;
    let mut config = small(5);
    config.hidden = [16, 8, 4];
    assert!(matches!(
        finetune(&base, GROUP, &pairs(21, 13, linear_oracle), &config),
        Err(TwinError::Incompatible { .. })
    ));
}

#[test]
fn scratch_model_records_provenance() {
    let (m, _) = train_from_scratch(GROUP, &pairs(30, 14, linear_oracle), &small(5)).unwrap();
    assert_eq!(m.provenance, Provenance::Scratch { group: GROUP });
}

#[test]
fn weekly_retrain_enforces_its_window() {
    let history = pairs(30, 15, linear_oracle);
    let base = pretrain(&history, &small(10)).unwrap().0;
    assert_eq!(base.meta.trained_through, Some(day(30)));

    let week: Vec<TrainingPair> = pairs(37, 16, linear_oracle).into_iter().skip(30).collect();
    let window = RetrainWindow {
        start: day(31),
        end: day(37),
    };
    let (next, report) = weekly_retrain(&base, &week, window, &small(10)).unwrap();
    assert_eq!(report.pairs, 7);
    assert_eq!(next.meta.trained_through, Some(day(37)));
    assert_eq!(next.meta.last_retrain, Some(day(37)));
    assert_eq!(next.meta.parent, Some(base.fingerprint()));

    // the same week again overlaps what the model has seen
    assert!(matches!(
        weekly_retrain(&next, &week, window, &small(10)),
        Err(TwinError::Overlap { .. })
    ));
    // a pair outside the window is refused
    let late = RetrainWindow {
        start: day(31),
        end: day(36),
    };
    assert!(matches!(weekly_retrain(&base, &week, late, &small(10)), Err(TwinError::Window(_))));
    // windows longer than a week are refused
    let long = RetrainWindow {
        start: day(31),
        end: day(38),
    };
    assert!(matches!(weekly_retrain(&base, &week, long, &small(10)), Err(TwinError::Window(_))));
}

#[test]
fn empty_week_only_advances_metadata() {
    let base = pretrain(&pairs(30, 17, linear_oracle), &small(5)).unwrap().0;
    let window = RetrainWindow {
        start: day(31),
        end: day(37),
    };
    let (next, report) = weekly_retrain(&base, &[], window, &small(5)).unwrap();
    assert_eq!(report.epochs_run, 0);
    assert_eq!(next.network, base.network);
    assert_eq!(next.meta.trained_through, Some(day(37)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn storage_order_does_not_matter(seed in 0u64..1000, rotate in 1usize..39) {
        let train = pairs(40, seed, linear_oracle);
        let mut reordered = train.clone();
        reordered.rotate_left(rotate);
        reordered.reverse();
        let a = pretrain(&train, &small(5)).unwrap().0;
        let b = pretrain(&reordered, &small(5)).unwrap().0;
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn predictions_are_finite(seed in 0u64..1000) {
        let model = pretrain(&pairs(30, 99, linear_oracle), &small(5)).unwrap().0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = model.predict(&features(&mut rng)).unwrap();
        prop_assert!(out.glucose.is_finite() && out.weight.is_finite() && out.ketone.is_finite());
    }
}
