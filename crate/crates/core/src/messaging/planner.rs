//! Integer meal planner.
//!
//! Servings are integer variables; a binary per food group records whether
//! the group is used. Macro deviations from target are split into
//! over/under parts scaled by the target, each capped at 10%, so their sum
//! never reaches 1 and the objective `-groups + scaled deviation` ranks plans
//! by variety first and closeness second.

use std::fmt;
use std::time::Duration;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, SolveOptions, SolveOutcome, Variable};
use serde::{Deserialize, Serialize};

use super::{Catalog, FoodItem, MealPlan, MessagingError, PlanEntry, MACRO_TOLERANCE};
use crate::controller::{patient_box, Suggestion};
use crate::data::{Bounds, DecisionVar, PatientProfile};

/// Shrinks the tolerance a hair so solver round-off cannot push totals
/// past the limit.
const TOLERANCE_MARGIN: f64 = 1.0 - 1e-7;
const NODE_LIMIT: u64 = 200_000;
/// Relative gap at which the search stops. Objectives lie in [-8, 0.3] and
/// one more food group improves them by at least 0.7, so a 1% gap still
/// proves the group count optimal; only the deviation tie-break is
/// approximate, to within 0.08 of scaled deviation.
const MIP_GAP: f64 = 0.01;
const TIME_LIMIT: Duration = Duration::from_secs(5);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroTargets {
    pub net_carb: f64,
    pub fat: f64,
    pub protein: f64,
}

impl From<&Suggestion> for MacroTargets {
    fn from(s: &Suggestion) -> Self {
        MacroTargets {
            net_carb: s.net_carb,
            fat: s.fat,
            protein: s.protein,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub targets: MacroTargets,
    pub fiber: Bounds,
    pub calorie_goal: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlanConstraint {
    NetCarb,
    Fat,
    Protein,
    Fiber,
    Calories,
}

impl PlanConstraint {
    const ALL: [PlanConstraint; 5] = [
        PlanConstraint::NetCarb,
        PlanConstraint::Fat,
        PlanConstraint::Protein,
        PlanConstraint::Fiber,
        PlanConstraint::Calories,
    ];
}

/// Why no plan exists. `binding` lists every constraint whose removal alone
/// makes the request feasible; when none does, it lists all of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub binding: Vec<PlanConstraint>,
    pub detail: String,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (binding: {:?})", self.detail, self.binding)
    }
}

/// Meal plan for a suggestion, using the patient's fiber box and calorie goal.
pub fn plan_meals(suggestion: &Suggestion, catalog: &Catalog, profile: &PatientProfile) -> Result<MealPlan, MessagingError> {
    let fiber = patient_box(profile)
        .map_err(|e| MessagingError::Catalog(e.to_string()))?
        .get(DecisionVar::Fiber);
    plan_meals_for(
        &PlanRequest {
            targets: suggestion.into(),
            fiber,
            calorie_goal: profile.calorie_goal,
        },
        catalog,
    )
}

pub fn plan_meals_for(request: &PlanRequest, catalog: &Catalog) -> Result<MealPlan, MessagingError> {
    catalog.validate()?;
    let t = request.targets;
    let mut negative = Vec::new();
    for (c, v) in [
        (PlanConstraint::NetCarb, t.net_carb),
        (PlanConstraint::Fat, t.fat),
        (PlanConstraint::Protein, t.protein),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            negative.push(c);
        }
    }
    if !(request.fiber.is_valid() && request.fiber.hi >= 0.0) {
        negative.push(PlanConstraint::Fiber);
    }
    if !(request.calorie_goal.is_finite() && request.calorie_goal >= 0.0) {
        negative.push(PlanConstraint::Calories);
    }
    if !negative.is_empty() {
        return Err(MessagingError::Infeasible(InfeasibilityReport {
            binding: negative,
            detail: "targets would need negative servings".into(),
        }));
    }

    match solve(request, &catalog.items, &[], true)? {
        Some(servings) => Ok(MealPlan::new(
            catalog
                .items
                .iter()
                .zip(servings)
                .map(|(item, servings)| PlanEntry {
                    item: item.clone(),
                    servings,
                })
                .collect(),
        )),
        None => Err(MessagingError::Infeasible(diagnose(request, &catalog.items)?)),
    }
}

fn diagnose(request: &PlanRequest, items: &[FoodItem]) -> Result<InfeasibilityReport, MessagingError> {
    let mut binding = Vec::new();
    for c in PlanConstraint::ALL {
        if solve(request, items, &[c], false)?.is_some() {
            binding.push(c);
        }
    }
    let detail = if binding.is_empty() {
        binding = PlanConstraint::ALL.to_vec();
        "no single constraint can be relaxed to reach a plan".to_string()
    } else {
        "relaxing any one listed constraint would allow a plan".to_string()
    };
    Ok(InfeasibilityReport { binding, detail })
}

/// Servings per catalog item, or `None` when infeasible. Constraints in
/// `dropped` are left out; without `optimise` any feasible point will do.
fn solve(
    request: &PlanRequest,
    items: &[FoodItem],
    dropped: &[PlanConstraint],
    optimise: bool,
) -> Result<Option<Vec<u32>>, MessagingError> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let servings: Vec<Variable> = items
        .iter()
        .map(|i| problem.add_integer_var(0.0, (0, i.serving_limit() as i32)))
        .collect();

    if optimise {
        let mut groups: Vec<_> = items.iter().map(|i| i.food_group).collect();
        groups.sort();
        groups.dedup();
        for g in groups {
            let used = problem.add_binary_var(-1.0);
            let mut expr = LinearExpr::empty();
            expr.add(used, 1.0);
            for (v, item) in servings.iter().zip(items) {
                if item.food_group == g {
                    expr.add(*v, -1.0);
                }
            }
            problem.add_constraint(expr, ComparisonOp::Le, 0.0);
        }
    }

    let sum = |f: &dyn Fn(&FoodItem) -> f64| {
        let mut expr = LinearExpr::empty();
        for (v, item) in servings.iter().zip(items) {
            let a = f(item);
            if a != 0.0 {
                expr.add(*v, a);
            }
        }
        expr
    };

    let t = request.targets;
    type Amount = dyn Fn(&FoodItem) -> f64;
    let macros: [(PlanConstraint, f64, &Amount); 3] = [
        (PlanConstraint::NetCarb, t.net_carb, &|i| i.net_carb),
        (PlanConstraint::Fat, t.fat, &|i| i.fat),
        (PlanConstraint::Protein, t.protein, &|i| i.protein),
    ];
    for (c, target, f) in macros {
        if dropped.contains(&c) {
            continue;
        }
        let mut expr = sum(f);
        if target == 0.0 {
            problem.add_constraint(expr, ComparisonOp::Le, 0.0);
            continue;
        }
        let cap = MACRO_TOLERANCE * target * TOLERANCE_MARGIN;
        let weight = if optimise { 1.0 / target } else { 0.0 };
        let over = problem.add_var(weight, (0.0, cap));
        let under = problem.add_var(weight, (0.0, cap));
        expr.add(over, -1.0);
        expr.add(under, 1.0);
        problem.add_constraint(expr, ComparisonOp::Eq, target);
    }
    if !dropped.contains(&PlanConstraint::Fiber) {
        let fiber = sum(&|i| i.fiber);
        problem.add_constraint(fiber.clone(), ComparisonOp::Ge, request.fiber.lo);
        problem.add_constraint(fiber, ComparisonOp::Le, request.fiber.hi);
    }
    if !dropped.contains(&PlanConstraint::Calories) {
        problem.add_constraint(sum(&|i| i.calories), ComparisonOp::Le, request.calorie_goal);
    }

    let mut options = SolveOptions::default();
    options.node_limit = Some(NODE_LIMIT);
    options.time_limit = Some(TIME_LIMIT);
    options.mip_gap = MIP_GAP;
    match problem.solve_with(options) {
        Ok(SolveOutcome::Solution(sol)) => Ok(Some(servings.iter().map(|v| sol.var_value(*v) as u32).collect())),
        Ok(SolveOutcome::Interrupted(_)) => Err(MessagingError::SearchLimit),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(MessagingError::Catalog(format!("solver failure: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::messaging::{check_plan, FoodGroup};

    fn request(c: f64, f: f64, p: f64) -> PlanRequest {
        PlanRequest {
            targets: MacroTargets {
                net_carb: c,
                fat: f,
                protein: p,
            },
            fiber: Bounds::new(20.0, 50.0),
            calorie_goal: 2000.0,
        }
    }

    #[test]
    fn table_suggestion_plan_passes_checker() {
        let req = request(30.0, 135.0, 60.0);
        let plan = plan_meals_for(&req, &Catalog::bundled()).unwrap();
        assert!(check_plan(&plan, &req).is_empty(), "{plan:#?}");
        assert!(plan.group_count() >= 6, "groups used: {}", plan.group_count());
    }

    #[test]
    fn single_item_catalog_selects_it() {
        let item = FoodItem {
            name: "Meal bar".into(),
            food_group: FoodGroup::NutsSeeds,
            serving: "1 bar".into(),
            net_carb: 10.0,
            fat: 20.0,
            fiber: 10.0,
            protein: 15.0,
            calories: 280.0,
            max_servings: 8,
        };
        let catalog = Catalog::new(vec![item]).unwrap();
        let plan = plan_meals_for(&request(20.0, 40.0, 30.0), &catalog).unwrap();
        assert_eq!(plan.entries.len(), 1);
        assert_eq!(plan.entries[0].servings, 2);
    }

    #[test]
    fn negative_target_is_infeasible() {
        let err = plan_meals_for(&request(-5.0, 100.0, 60.0), &Catalog::bundled()).unwrap_err();
        match err {
            MessagingError::Infeasible(r) => assert_eq!(r.binding, vec![PlanConstraint::NetCarb]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn calorie_goal_reported_as_binding() {
        let mut req = request(30.0, 135.0, 60.0);
        req.calorie_goal = 800.0;
        match plan_meals_for(&req, &Catalog::bundled()).unwrap_err() {
            MessagingError::Infeasible(r) => assert!(r.binding.contains(&PlanConstraint::Calories), "{r}"),
            other => panic!("{other}"),
        }
    }
}
