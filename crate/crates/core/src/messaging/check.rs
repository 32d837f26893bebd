//! Plan verification written separately from the planner.

use serde::{Deserialize, Serialize};

use super::{MealPlan, PlanRequest, MACRO_TOLERANCE};

/// Absolute slack for float sums.
const EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PlanViolation {
    ZeroServings(String),
    OverMaxServings { item: String, servings: u32, max: u32 },
    TotalsMismatch(&'static str),
    MacroOutOfTolerance { nutrient: &'static str, total: f64, target: f64 },
    FiberOutOfRange(f64),
    OverCalorieGoal { total: f64, goal: f64 },
}

/// Every way `plan` fails `request`; empty when the plan is valid.
pub fn check_plan(plan: &MealPlan, request: &PlanRequest) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    let (mut carb, mut fat, mut fiber, mut protein, mut kcal) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for e in &plan.entries {
        if e.servings == 0 {
            out.push(PlanViolation::ZeroServings(e.item.name.clone()));
        }
        if e.servings > e.item.max_servings.min(super::SERVING_CAP) {
            out.push(PlanViolation::OverMaxServings {
                item: e.item.name.clone(),
                servings: e.servings,
                max: e.item.max_servings,
            });
        }
        let k = f64::from(e.servings);
        carb += k * e.item.net_carb;
        fat += k * e.item.fat;
        fiber += k * e.item.fiber;
        protein += k * e.item.protein;
        kcal += k * e.item.calories;
    }
    let t = &plan.totals;
    for (name, recorded, recomputed) in [
        ("net_carb", t.net_carb, carb),
        ("fat", t.fat, fat),
        ("fiber", t.fiber, fiber),
        ("protein", t.protein, protein),
        ("calories", t.calories, kcal),
    ] {
        if (recorded - recomputed).abs() > EPS {
            out.push(PlanViolation::TotalsMismatch(name));
        }
    }
    let tg = &request.targets;
    for (nutrient, total, target) in [
        ("net_carb", carb, tg.net_carb),
        ("fat", fat, tg.fat),
        ("protein", protein, tg.protein),
    ] {
        if (total - target).abs() > MACRO_TOLERANCE * target + EPS {
            out.push(PlanViolation::MacroOutOfTolerance { nutrient, total, target });
        }
    }
    if fiber < request.fiber.lo - EPS || fiber > request.fiber.hi + EPS {
        out.push(PlanViolation::FiberOutOfRange(fiber));
    }
    if kcal > request.calorie_goal + EPS {
        out.push(PlanViolation::OverCalorieGoal {
            total: kcal,
            goal: request.calorie_goal,
        });
    }
    out
}
