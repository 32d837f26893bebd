//! Daily patient messages: a meal plan, a motivational message and a step goal.

mod check;
mod motivation;
mod planner;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::{check_plan, PlanViolation};
pub use motivation::{metric_domain, pick_motivation, Domain, Message, MessageHistory, MessagePool, SentMessage};
pub use planner::{plan_meals, plan_meals_for, InfeasibilityReport, MacroTargets, PlanConstraint, PlanRequest};

/// Days a message stays blocked after it was sent.
pub const NO_REPEAT_DAYS: i64 = 14;
/// Days of step history the goal is computed from.
pub const STEP_WINDOW: usize = 10;
/// Upper limit on servings of any one item.
pub const SERVING_CAP: u32 = 8;
/// Relative tolerance on each macro target.
pub const MACRO_TOLERANCE: f64 = 0.10;

#[derive(Debug, Error)]
pub enum MessagingError {
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("invalid message pool: {0}")]
    Pool(String),
    #[error("no feasible meal plan: {0}")]
    Infeasible(InfeasibilityReport),
    #[error("meal planner stopped before finding a plan")]
    SearchLimit,
    #[error("step history is empty")]
    EmptyHistory,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FoodGroup {
    LeanMeat,
    MediumFatMeat,
    HighFatMeat,
    Vegetables,
    Fruits,
    WholeMilk,
    NutsSeeds,
    SaturatedFats,
}

impl FoodGroup {
    pub const ALL: [FoodGroup; 8] = [
        FoodGroup::LeanMeat,
        FoodGroup::MediumFatMeat,
        FoodGroup::HighFatMeat,
        FoodGroup::Vegetables,
        FoodGroup::Fruits,
        FoodGroup::WholeMilk,
        FoodGroup::NutsSeeds,
        FoodGroup::SaturatedFats,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FoodGroup::LeanMeat => "Lean-Fat Meat and Substitutes",
            FoodGroup::MediumFatMeat => "Medium-Fat Meat and Substitutes",
            FoodGroup::HighFatMeat => "High-Fat Meat and Substitutes",
            FoodGroup::Vegetables => "Vegetables",
            FoodGroup::Fruits => "Fruits",
            FoodGroup::WholeMilk => "Whole Milk",
            FoodGroup::NutsSeeds => "Nuts and Seeds",
            FoodGroup::SaturatedFats => "Saturated Fats",
        }
    }
}

impl fmt::Display for FoodGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One catalog entry with per-serving nutrients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodItem {
    pub name: String,
    pub food_group: FoodGroup,
    /// Serving description, e.g. "1/4 cup".
    pub serving: String,
    pub net_carb: f64,
    pub fat: f64,
    pub fiber: f64,
    pub protein: f64,
    pub calories: f64,
    pub max_servings: u32,
}

impl FoodItem {
    pub fn validate(&self) -> Result<(), MessagingError> {
        let bad = |msg: String| Err(MessagingError::Catalog(format!("{}: {msg}", self.name)));
        for (label, v) in [
            ("net carb", self.net_carb),
            ("fat", self.fat),
            ("fiber", self.fiber),
            ("protein", self.protein),
            ("calories", self.calories),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{label} must be a non-negative number"));
            }
        }
        let reconstructed = 4.0 * self.net_carb + 9.0 * self.fat + 4.0 * self.protein;
        if (self.calories - reconstructed).abs() > 0.2 * reconstructed {
            return bad(format!(
                "{} kcal is more than 20% away from the {reconstructed:.1} kcal its macros imply",
                self.calories
            ));
        }
        if self.max_servings == 0 {
            return bad("max servings must be positive".into());
        }
        Ok(())
    }

    /// Servings the planner may use: the item's own limit, capped.
    pub fn serving_limit(&self) -> u32 {
        self.max_servings.min(SERVING_CAP)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub items: Vec<FoodItem>,
}

impl Catalog {
    pub fn new(items: Vec<FoodItem>) -> Result<Self, MessagingError> {
        let c = Catalog { note: None, items };
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(json: &str) -> Result<Self, MessagingError> {
        let c: Catalog = serde_json::from_str(json)?;
        c.validate()?;
        Ok(c)
    }

    /// The approximate catalog shipped with the crate.
    pub fn bundled() -> Self {
        Catalog::from_json(include_str!("../../fixtures/catalog.json")).expect("bundled catalog is valid")
    }

    pub fn validate(&self) -> Result<(), MessagingError> {
        if self.items.is_empty() {
            return Err(MessagingError::Catalog("no items".into()));
        }
        self.items.iter().try_for_each(FoodItem::validate)
    }

    pub fn groups(&self) -> Vec<FoodGroup> {
        let mut g: Vec<FoodGroup> = self.items.iter().map(|i| i.food_group).collect();
        g.sort();
        g.dedup();
        g
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub net_carb: f64,
    pub fat: f64,
    pub fiber: f64,
    pub protein: f64,
    pub calories: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub item: FoodItem,
    pub servings: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MealPlan {
    pub entries: Vec<PlanEntry>,
    pub totals: Totals,
}

impl MealPlan {
    pub fn new(mut entries: Vec<PlanEntry>) -> Self {
        entries.retain(|e| e.servings > 0);
        let mut totals = Totals::default();
        for e in &entries {
            let n = e.servings as f64;
            totals.net_carb += n * e.item.net_carb;
            totals.fat += n * e.item.fat;
            totals.fiber += n * e.item.fiber;
            totals.protein += n * e.item.protein;
            totals.calories += n * e.item.calories;
        }
        MealPlan { entries, totals }
    }

    /// A day without a meal change.
    pub fn maintenance() -> Self {
        MealPlan::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn group_count(&self) -> usize {
        let mut g: Vec<FoodGroup> = self.entries.iter().map(|e| e.item.food_group).collect();
        g.sort();
        g.dedup();
        g.len()
    }
}

/// Nearest-rank 70th percentile of the last ten days of steps.
pub fn step_goal(steps: &[f64]) -> Result<f64, MessagingError> {
    if steps.is_empty() {
        return Err(MessagingError::EmptyHistory);
    }
    let mut window: Vec<f64> = steps[steps.len().saturating_sub(STEP_WINDOW)..].to_vec();
    window.sort_by(f64::total_cmp);
    let n = window.len();
    // ceil(0.7 n) in integer arithmetic
    let rank = (7 * n).div_ceil(10);
    Ok(window[rank - 1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MealLine {
    pub group: FoodGroup,
    pub text: String,
}

/// The three parts of a day's message, plus the rendered text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyMessage {
    /// Empty on a maintenance day.
    pub meal_plan: Vec<MealLine>,
    pub motivation: Message,
    pub step_goal: u32,
    pub text: String,
}

fn serving_phrase(entry: &PlanEntry) -> String {
    let unit = if entry.servings == 1 { "serving" } else { "servings" };
    format!("{} {unit} of ({}) {}", entry.servings, entry.item.serving, entry.item.name)
}

pub fn compose(plan: &MealPlan, motivation: &Message, step_goal: f64) -> DailyMessage {
    let mut entries: Vec<&PlanEntry> = plan.entries.iter().collect();
    entries.sort_by_key(|e| e.item.food_group);
    let meal_plan: Vec<MealLine> = entries
        .iter()
        .map(|e| MealLine {
            group: e.item.food_group,
            text: serving_phrase(e),
        })
        .collect();
    let goal = step_goal.round().max(0.0) as u32;

    let mut text = String::from("Meal Plan\n");
    if meal_plan.is_empty() {
        text.push_str("Today: no meal change. Keep following your current meals.\n");
    } else {
        text.push_str("Food Group\tMeal Plan Example\n");
        for line in &meal_plan {
            text.push_str(&format!("{}\t{}\n", line.group.label(), line.text));
        }
    }
    text.push_str(&format!("\nMotivation ({})\n{}\n", motivation.domain.label(), motivation.text));
    text.push_str(&format!("\nStep Goal\nAim for {goal} steps today.\n"));

    DailyMessage {
        meal_plan,
        motivation: motivation.clone(),
        step_goal: goal,
        text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(group: FoodGroup, serving: &str, name: &str) -> FoodItem {
        FoodItem {
            name: name.into(),
            food_group: group,
            serving: serving.into(),
            net_carb: 1.0,
            fat: 1.0,
            fiber: 0.0,
            protein: 7.0,
            calories: 41.0,
            max_servings: 8,
        }
    }

    fn message() -> Message {
        Message {
            id: "exercise-01".into(),
            domain: Domain::Exercise,
            text: "Walk after lunch.".into(),
        }
    }

    #[test]
    fn step_goal_examples() {
        let h: Vec<f64> = (3..=12).map(|k| k as f64 * 1000.0).collect();
        assert_eq!(step_goal(&h).unwrap(), 9000.0);
        assert_eq!(step_goal(&[6000.0; 10]).unwrap(), 6000.0);
        assert_eq!(step_goal(&[5000.0]).unwrap(), 5000.0);
        assert!(matches!(step_goal(&[]), Err(MessagingError::EmptyHistory)));
    }

    #[test]
    fn step_goal_ignores_old_days() {
        let mut h = vec![1e6; 5];
        h.extend((3..=12).map(|k| k as f64 * 1000.0));
        assert_eq!(step_goal(&h).unwrap(), 9000.0);
    }

    #[test]
    fn bundled_catalog_loads() {
        let c = Catalog::bundled();
        assert!(c.items.len() >= 40);
        assert_eq!(c.groups(), FoodGroup::ALL.to_vec());
    }

    #[test]
    fn item_validation() {
        let mut i = item(FoodGroup::LeanMeat, "1 oz", "x");
        i.validate().unwrap();
        i.calories = 80.0;
        assert!(i.validate().is_err());
        i.calories = 41.0;
        i.fat = -1.0;
        assert!(i.validate().is_err());
    }

    #[test]
    fn compose_renders_figure_style() {
        let plan = MealPlan::new(vec![PlanEntry {
            item: item(FoodGroup::LeanMeat, "1/4 cup", "Any cottage cheese"),
            servings: 4,
        }]);
        let m = compose(&plan, &message(), 9000.0);
        assert!(m.text.contains("Lean-Fat Meat and Substitutes\t4 servings of (1/4 cup) Any cottage cheese"));
        assert!(m.text.contains("Aim for 9000 steps"));
        assert_eq!(m.step_goal, 9000);
        assert_eq!(m, compose(&plan, &message(), 9000.0));
    }

    #[test]
    fn compose_maintenance_day() {
        let m = compose(&MealPlan::maintenance(), &message(), 6000.0);
        assert!(m.meal_plan.is_empty());
        assert!(m.text.contains("no meal change"));
        assert!(m.text.contains("Walk after lunch."));
    }

    #[test]
    fn plan_totals_are_weighted_sums() {
        let plan = MealPlan::new(vec![
            PlanEntry {
                item: item(FoodGroup::LeanMeat, "1 oz", "a"),
                servings: 3,
            },
            PlanEntry {
                item: item(FoodGroup::Fruits, "1 oz", "b"),
                servings: 0,
            },
        ]);
        assert_eq!(plan.entries.len(), 1);
        assert_eq!(plan.totals.protein, 21.0);
        assert_eq!(plan.totals.calories, 123.0);
    }
}
