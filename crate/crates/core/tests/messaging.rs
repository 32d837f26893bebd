use chrono::NaiveDate;
use onlc_core::controller::default_box;
use onlc_core::data::{Bounds, DecisionVar, DietGroup};
use onlc_core::messaging::{
    check_plan, compose, pick_motivation, plan_meals_for, step_goal, Catalog, Domain, MacroTargets, MealPlan,
    MessageHistory, MessagePool, MessagingError, PlanRequest, NO_REPEAT_DAYS,
};
use onlc_core::scoring::{check_boundaries, keto_table, BoundaryInput, Goals};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A request built from a random integer plan, so a solution is known to exist.
fn feasible_request(catalog: &Catalog, diet: DietGroup, rng: &mut ChaCha8Rng) -> PlanRequest {
    let (mut c, mut f, mut fi, mut p, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let picks = rng.gen_range(2..7);
    for _ in 0..picks {
        let item = &catalog.items[rng.gen_range(0..catalog.items.len())];
        let n = f64::from(rng.gen_range(1..=2u32));
        c += n * item.net_carb;
        f += n * item.fat;
        fi += n * item.fiber;
        p += n * item.protein;
        k += n * item.calories;
    }
    let fiber = default_box(diet).get(DecisionVar::Fiber);
    PlanRequest {
        targets: MacroTargets {
            net_carb: c,
            fat: f,
            protein: p,
        },
        fiber: Bounds::new(fiber.lo.min(fi), fiber.hi.max(fi)),
        calorie_goal: k * rng.gen_range(1.0..1.3),
    }
}

#[test]
fn random_feasible_targets_give_valid_plans() {
    let catalog = Catalog::bundled();
    for diet in [DietGroup::Keto, DietGroup::LowFat] {
        let mut rng = ChaCha8Rng::seed_from_u64(diet as u64 + 11);
        for _ in 0..25 {
            let req = feasible_request(&catalog, diet, &mut rng);
            let plan = plan_meals_for(&req, &catalog).unwrap_or_else(|e| panic!("{req:?}: {e}"));
            assert!(check_plan(&plan, &req).is_empty(), "{:?}", check_plan(&plan, &req));
        }
    }
}

#[test]
fn calorie_goal_below_macros_is_reported() {
    let catalog = Catalog::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut req = feasible_request(&catalog, DietGroup::Keto, &mut rng);
        let t = req.targets;
        // every plan within 10% of each macro needs at least this many calories
        let floor = 0.9 * (4.0 * t.net_carb + 9.0 * t.fat + 4.0 * t.protein) * 0.8;
        req.calorie_goal = floor * 0.5;
        match plan_meals_for(&req, &catalog) {
            Err(MessagingError::Infeasible(r)) => assert!(!r.binding.is_empty()),
            Ok(plan) => panic!("plan {plan:?} beat the calorie floor"),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn zero_targets_give_empty_plan() {
    let req = PlanRequest {
        targets: MacroTargets {
            net_carb: 0.0,
            fat: 0.0,
            protein: 0.0,
        },
        fiber: Bounds::new(0.0, 10.0),
        calorie_goal: 2000.0,
    };
    let plan = plan_meals_for(&req, &Catalog::bundled()).unwrap();
    assert!(plan.is_empty());
    assert!(check_plan(&plan, &req).is_empty());
}

#[test]
fn composed_text_lists_every_group() {
    let catalog = Catalog::bundled();
    let req = PlanRequest {
        targets: MacroTargets {
            net_carb: 30.0,
            fat: 135.0,
            protein: 60.0,
        },
        fiber: Bounds::new(20.0, 50.0),
        calorie_goal: 2000.0,
    };
    let plan = plan_meals_for(&req, &catalog).unwrap();
    let pool = MessagePool::bundled();
    let m = pick_motivation(&[], &pool, &MessageHistory::default(), day(0)).unwrap();
    let msg = compose(&plan, m, 7200.0);
    assert_eq!(msg.step_goal, 7200);
    assert!(msg.text.contains(&m.text));
    for e in &plan.entries {
        assert!(msg.text.contains(e.item.food_group.label()), "{}", msg.text);
    }
    let empty = compose(&MealPlan::maintenance(), m, 7200.0);
    assert!(empty.meal_plan.is_empty());
}

fn day(n: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 5, 1).unwrap() + chrono::Duration::days(n)
}

/// Full sort and the ceil(0.7 n)-th order statistic.
fn percentile_oracle(steps: &[f64]) -> f64 {
    let mut last: Vec<f64> = steps.iter().rev().take(10).copied().collect();
    last.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (0.7 * last.len() as f64 - 1e-9).ceil() as usize;
    last[rank.max(1) - 1]
}

#[test]
fn step_goal_matches_oracle_on_random_histories() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    for _ in 0..1000 {
        let n = rng.gen_range(1..30);
        let h: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..25_000u32))).collect();
        assert_eq!(step_goal(&h).unwrap(), percentile_oracle(&h), "{h:?}");
    }
}

proptest! {
    #[test]
    fn step_goal_is_one_of_the_last_ten(h in prop::collection::vec(0u32..30_000, 1..40)) {
        let h: Vec<f64> = h.into_iter().map(f64::from).collect();
        let g = step_goal(&h).unwrap();
        prop_assert!(h[h.len().saturating_sub(10)..].contains(&g));
    }

    #[test]
    fn step_goal_ignores_order_within_window(h in prop::collection::vec(0u32..30_000, 1..=10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let h: Vec<f64> = h.into_iter().map(f64::from).collect();
        let mut shuffled = h.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(step_goal(&h).unwrap(), step_goal(&shuffled).unwrap());
    }

    /// Whatever the daily violations, a message is never sent twice within
    /// the no-repeat window while its domain still has fresh messages.
    #[test]
    fn no_repeat_within_window(steps in prop::collection::vec(prop::option::of(0u32..12_000), 60)) {
        let pool = MessagePool::bundled();
        let goals = Goals {
            calorie_goal: Some(1800.0),
            min_protein: Some(50.0),
            min_fat: Some(90.0),
            max_fat: None,
        };
        let mut history = MessageHistory::default();
        for (d, s) in steps.iter().enumerate() {
            let input = BoundaryInput {
                steps: s.map(f64::from),
                ..Default::default()
            };
            let checks = check_boundaries(&keto_table(), &input, &goals).unwrap();
            let date = day(d as i64);
            let m = pick_motivation(&checks, &pool, &history, date).unwrap();
            if let Some(last) = history.last_sent(&m.id) {
                prop_assert!((date - last).num_days() >= NO_REPEAT_DAYS, "{} repeated after {} days", m.id, (date - last).num_days());
            }
            prop_assert!(m.domain == Domain::Exercise || m.domain == Domain::PositiveFeedback);
            history.record(date, &m.id);
        }
    }
}
