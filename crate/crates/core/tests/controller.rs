use chrono::NaiveDate;
use onlc_core::controller::{
    default_box, evaluate, objective, optimize, patient_box, ControllerConfig, Decision, PatientState, Penalties,
    Suggestion,
};
use onlc_core::data::{Arm, Bounds, ConditionGroup, DailyRecord, DecisionVar, DietGroup, Field, Group, PatientProfile};
use onlc_core::twin::{FeatureVector, PredictedOutcome, Predictor, TwinError};
use proptest::prelude::*;

/// Smooth toy twin: glucose rises with carbs and falls with steps, weight
/// follows energy balance, ketones follow the fat share.
struct Toy;

impl Predictor for Toy {
    fn predict(&self, f: &FeatureVector) -> Result<PredictedOutcome, TwinError> {
        let intake = 4.0 * f.net_carb + 9.0 * f.fat + 4.0 * f.protein;
        Ok(PredictedOutcome {
            glucose: 0.5 * f.prev_glucose + 0.6 * f.net_carb - 0.004 * f.steps + 60.0,
            weight: f.prev_weight + (intake - f.activity_calories - 1900.0) / 3500.0,
            ketone: 0.8 * f.fat / (f.net_carb + f.protein + 1.0),
        })
    }
}

fn profile(diet: DietGroup) -> PatientProfile {
    PatientProfile::new(
        "p01",
        Group::new(diet, ConditionGroup::ObeseT2D),
        Arm::Ai,
        210.0,
        1900.0,
    )
    .unwrap()
}

fn yesterday(glucose: f64, weight: f64, ketone: f64) -> DailyRecord {
    let mut r = DailyRecord::empty(NaiveDate::from_ymd_opt(2023, 4, 1).unwrap());
    r.set(Field::Glucose, Some(glucose));
    r.set(Field::Weight, Some(weight));
    r.set(Field::Ketone, Some(ketone));
    r
}

fn quick(seed: u64) -> ControllerConfig {
    ControllerConfig {
        swarm_size: 20,
        iterations: 40,
        seed,
        ..ControllerConfig::default()
    }
}

fn run(diet: DietGroup, penalties: Penalties, seed: u64) -> Decision {
    optimize(&Toy, &yesterday(165.0, 211.0, 0.4), &profile(diet), &penalties, &quick(seed)).unwrap()
}

#[test]
fn decision_reports_its_own_cost() {
    let d = run(DietGroup::Keto, Penalties::new(10.0, 5.0, 100.0).unwrap(), 3);
    let again = objective(
        &d.suggestion,
        &Toy,
        &yesterday(165.0, 211.0, 0.4),
        &profile(DietGroup::Keto),
        &Penalties::new(10.0, 5.0, 100.0).unwrap(),
        1,
    )
    .unwrap();
    assert_eq!(d.cost, again);
    assert_eq!(d.log.cost, d.cost);
    assert_eq!(*d.log.best_cost_per_iteration.last().unwrap(), d.cost);
}

#[test]
fn log_round_trips_as_json() {
    let d = run(DietGroup::LowFat, Penalties::NEUTRAL, 4);
    let text = d.log.to_json();
    let back: onlc_core::controller::RunLog = serde_json::from_str(&text).unwrap();
    assert_eq!(back, d.log);
}

#[test]
fn improves_on_box_centre() {
    let p = profile(DietGroup::Keto);
    let cbox = patient_box(&p).unwrap();
    let mut centre: Vec<f64> = cbox.bounds.iter().map(|b| (b.lo + b.hi) / 2.0).collect();
    cbox.project(&mut centre);
    let penalties = Penalties::new(100.0, 10.0, 100.0).unwrap();
    let start = objective(
        &Suggestion::from_decision(&centre),
        &Toy,
        &yesterday(165.0, 211.0, 0.4),
        &p,
        &penalties,
        1,
    )
    .unwrap();
    let d = run(DietGroup::Keto, penalties, 5);
    assert!(d.cost <= start, "{} > {}", d.cost, start);
}

#[test]
fn override_narrows_the_search() {
    let mut p = profile(DietGroup::LowFat);
    p.constraint_overrides.insert(DecisionVar::Steps, Bounds::new(4000.0, 4500.0));
    let d = optimize(&Toy, &yesterday(170.0, 211.0, 0.3), &p, &Penalties::NEUTRAL, &quick(6)).unwrap();
    assert!((4000.0..=4500.0).contains(&d.suggestion.steps));
}

#[test]
fn longer_horizon_sums_more_days() {
    let p = profile(DietGroup::Keto);
    let s = Suggestion::from_decision(&[60.0, 80.0, 20.0, 90.0, 300.0, 8000.0]);
    let state = PatientState {
        glucose: 180.0,
        weight: 211.0,
        ketone: 0.3,
    };
    let pen = Penalties::new(10.0, 10.0, 10.0).unwrap();
    let one = evaluate(&s, &Toy, &state, &p, &pen, 1).unwrap();
    let three = evaluate(&s, &Toy, &state, &p, &pen, 3).unwrap();
    assert_eq!(three.outcomes.len(), 3);
    assert_eq!(three.outcomes[0], one.outcomes[0]);
    assert!(three.cost >= one.cost);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn suggestions_stay_in_the_box(
        seed in 0u64..10_000,
        glucose in 60.0f64..300.0,
        weight in 150.0f64..260.0,
        keto in any::<bool>(),
        m1 in 1.0f64..1000.0,
        m2 in 1.0f64..1000.0,
        m3 in 1.0f64..1000.0,
    ) {
        let diet = if keto { DietGroup::Keto } else { DietGroup::LowFat };
        let p = profile(diet);
        let d = optimize(&Toy, &yesterday(glucose, weight, 0.5), &p, &Penalties::new(m1, m2, m3).unwrap(), &quick(seed)).unwrap();
        prop_assert!(patient_box(&p).unwrap().contains(&d.suggestion));
        prop_assert!(default_box(diet).contains(&d.suggestion));
        prop_assert!(d.suggestion.activity_calories <= d.suggestion.intake_calories + 500.0 + 1e-9);
        let h = &d.log.best_cost_per_iteration;
        prop_assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }

    /// Scaling every multiplier by a power of two scales each cost exactly,
    /// so the swarm makes the same moves and returns the same suggestion.
    #[test]
    fn uniform_penalty_scaling_keeps_the_argmin(seed in 0u64..10_000, exp in 1i32..8) {
        let base = Penalties::new(1.0, 2.0, 3.0).unwrap();
        let factor = 2f64.powi(exp);
        let a = run(DietGroup::Keto, base, seed);
        let b = run(DietGroup::Keto, base.scaled(factor), seed);
        prop_assert_eq!(a.suggestion, b.suggestion);
        prop_assert_eq!(a.cost * factor, b.cost);
    }

    #[test]
    fn same_seed_same_decision(seed in 0u64..10_000) {
        let a = run(DietGroup::LowFat, Penalties::NEUTRAL, seed);
        let b = run(DietGroup::LowFat, Penalties::NEUTRAL, seed);
        prop_assert_eq!(a.log.to_json(), b.log.to_json());
    }
}
