//! Online controller: particle swarm search over tomorrow's diet and activity.
//!
//! The objective rolls the twin forward over the horizon with the candidate
//! suggestion held fixed and sums three gated, penalised terms per day:
//! predicted glucose, predicted weight and the keto-ratio shortfall. A gate
//! switches its term off once the target is met; the nurse (or the
//! automated lookup) supplies the multipliers.

mod swarm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{keto_ratio, Bounds, DailyRecord, DecisionVar, DietGroup, Field, PatientProfile};
use crate::twin::{FeatureVector, PredictedOutcome, Predictor, TwinError};

pub use swarm::{minimize, SwarmResult};

pub const GLUCOSE_RANGE: Bounds = Bounds::new(70.0, 130.0);
pub const KETO_RATIO_TARGET: f64 = 1.5;
pub const STEP_LIMIT: f64 = 30_000.0;
/// Activity calories may exceed intake by at most this much.
pub const ACTIVITY_SURPLUS: f64 = 500.0;
pub const PENALTY_RANGE: Bounds = Bounds::new(1.0, 1000.0);

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("previous day lacks `{0}`")]
    MissingState(Field),
    #[error(transparent)]
    Twin(#[from] TwinError),
}

/// Energy from macros at 4 / 9 / 4 kcal per gram of carb / fat / protein.
pub fn intake_from_macros(net_carb: f64, fat: f64, protein: f64) -> f64 {
    4.0 * net_carb + 9.0 * fat + 4.0 * protein
}

/// A day's recommended diet and activity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub net_carb: f64,
    pub fat: f64,
    pub fiber: f64,
    pub protein: f64,
    pub intake_calories: f64,
    pub activity_calories: f64,
    pub steps: f64,
}

impl Suggestion {
    /// Builds a suggestion from decision variables in [`DecisionVar`] order.
    pub fn from_decision(x: &[f64]) -> Self {
        Suggestion {
            net_carb: x[0],
            fat: x[1],
            fiber: x[2],
            protein: x[3],
            intake_calories: intake_from_macros(x[0], x[1], x[3]),
            activity_calories: x[4],
            steps: x[5],
        }
    }

    pub fn decision(&self) -> [f64; 6] {
        [self.net_carb, self.fat, self.fiber, self.protein, self.activity_calories, self.steps]
    }

    pub fn get(&self, var: DecisionVar) -> f64 {
        self.decision()[var.index()]
    }

    pub fn keto_ratio(&self) -> Result<f64, ControllerError> {
        keto_ratio(self.net_carb, self.fat, self.protein).map_err(|e| ControllerError::Config(e.to_string()))
    }

    /// Twin inputs for a day following this suggestion after `state`.
    pub fn features(&self, glucose: f64, weight: f64, ketone: f64) -> FeatureVector {
        FeatureVector {
            net_carb: self.net_carb,
            fat: self.fat,
            fiber: self.fiber,
            protein: self.protein,
            activity_calories: self.activity_calories,
            steps: self.steps,
            prev_glucose: glucose,
            prev_weight: weight,
            prev_ketone: ketone,
        }
    }
}

/// Search space for one patient: a box per decision variable plus the
/// coupled rule `activity_calories <= intake_calories + 500`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintBox {
    pub diet_group: DietGroup,
    /// Indexed by [`DecisionVar::index`].
    pub bounds: [Bounds; 6],
}

impl ConstraintBox {
    pub fn get(&self, var: DecisionVar) -> Bounds {
        self.bounds[var.index()]
    }

    fn max_intake(&self) -> f64 {
        intake_from_macros(
            self.get(DecisionVar::NetCarb).hi,
            self.get(DecisionVar::Fat).hi,
            self.get(DecisionVar::Protein).hi,
        )
    }

    fn min_intake(&self) -> f64 {
        intake_from_macros(
            self.get(DecisionVar::NetCarb).lo,
            self.get(DecisionVar::Fat).lo,
            self.get(DecisionVar::Protein).lo,
        )
    }

    /// Replaces bounds with the given overrides; fails when any bound is
    /// inverted or the coupled activity rule cannot be met.
    pub fn with_overrides<'a>(
        mut self,
        overrides: impl IntoIterator<Item = (&'a DecisionVar, &'a Bounds)>,
    ) -> Result<Self, ControllerError> {
        for (var, b) in overrides {
            self.bounds[var.index()] = *b;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        for var in DecisionVar::ALL {
            let b = self.get(var);
            if !b.is_valid() {
                return Err(ControllerError::Config(format!(
                    "infeasible bounds for {var:?}: [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        if self.get(DecisionVar::ActivityCalories).lo > self.min_intake() + ACTIVITY_SURPLUS {
            return Err(ControllerError::Config(
                "activity lower bound exceeds the smallest intake + 500 kcal".into(),
            ));
        }
        Ok(())
    }

    /// Clamps decision variables into the box, then applies the coupled rule.
    pub fn project(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = b.clamp(*v);
        }
        let cap = intake_from_macros(x[0], x[1], x[3]) + ACTIVITY_SURPLUS;
        let activity = DecisionVar::ActivityCalories.index();
        if x[activity] > cap {
            x[activity] = cap.max(self.bounds[activity].lo);
        }
    }

    pub fn contains(&self, s: &Suggestion) -> bool {
        let x = s.decision();
        x.iter().zip(&self.bounds).all(|(v, b)| b.contains(*v))
            && s.activity_calories <= s.intake_calories + ACTIVITY_SURPLUS
            && (s.intake_calories - intake_from_macros(s.net_carb, s.fat, s.protein)).abs() <= 1.0
    }
}

/// Default search box for a diet group.
pub fn default_box(diet: DietGroup) -> ConstraintBox {
    let (carb, fat, fiber, protein) = match diet {
        DietGroup::Keto => (
            Bounds::new(20.0, 50.0),
            Bounds::new(90.0, 200.0),
            Bounds::new(20.0, 50.0),
            Bounds::new(30.0, 110.0),
        ),
        DietGroup::LowFat => (
            Bounds::new(195.0, 300.0),
            Bounds::new(20.0, 55.0),
            Bounds::new(20.0, 50.0),
            Bounds::new(100.0, 160.0),
        ),
    };
    let mut cb = ConstraintBox {
        diet_group: diet,
        bounds: [carb, fat, fiber, protein, Bounds::new(0.0, 0.0), Bounds::new(0.0, STEP_LIMIT)],
    };
    cb.bounds[DecisionVar::ActivityCalories.index()] = Bounds::new(0.0, cb.max_intake() + ACTIVITY_SURPLUS);
    cb
}

/// The patient's box: diet default merged with personal overrides.
pub fn patient_box(profile: &PatientProfile) -> Result<ConstraintBox, ControllerError> {
    default_box(profile.diet_group).with_overrides(&profile.constraint_overrides)
}

/// Nurse multipliers `m1, m2, m3` for the glucose, weight and ketone terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub glucose: f64,
    pub weight: f64,
    pub ketone: f64,
}

impl Penalties {
    pub const NEUTRAL: Penalties = Penalties {
        glucose: 1.0,
        weight: 1.0,
        ketone: 1.0,
    };

    pub fn new(glucose: f64, weight: f64, ketone: f64) -> Result<Self, ControllerError> {
        let p = Penalties { glucose, weight, ketone };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        for m in [self.glucose, self.weight, self.ketone] {
            if !PENALTY_RANGE.contains(m) {
                return Err(ControllerError::Config(format!("penalty {m} outside [1, 1000]")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Penalties {
            glucose: self.glucose * factor,
            weight: self.weight * factor,
            ketone: self.ketone * factor,
        }
    }
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties::NEUTRAL
    }
}

/// The binary tuning parameters: `true` means the term is active (lambda = 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gates {
    pub glucose: bool,
    pub weight: bool,
    pub ketone: bool,
}

impl Gates {
    pub fn lambdas(&self) -> [u8; 3] {
        [self.glucose as u8, self.weight as u8, self.ketone as u8]
    }
}

/// Glucose is off inside 70-130 mg/dL. Weight is off when the forecast does
/// not gain on `prev_weight` or has reached the goal. The ketone term is only
/// on for keto patients whose ratio is still below 1.5.
pub fn gates(predicted: &PredictedOutcome, prev_weight: f64, profile: &PatientProfile, keto_ratio: f64) -> Gates {
    Gates {
        glucose: !GLUCOSE_RANGE.contains(predicted.glucose),
        weight: !(prev_weight - predicted.weight >= 0.0 || predicted.weight <= profile.weight_goal),
        ketone: profile.diet_group == DietGroup::Keto && keto_ratio < KETO_RATIO_TARGET,
    }
}

/// One day's gated, penalised cost.
pub fn day_cost(
    predicted: &PredictedOutcome,
    prev_weight: f64,
    profile: &PatientProfile,
    keto_ratio: f64,
    penalties: &Penalties,
) -> f64 {
    let g = gates(predicted, prev_weight, profile, keto_ratio);
    let mut cost = 0.0;
    if g.glucose {
        cost += penalties.glucose * predicted.glucose;
    }
    if g.weight {
        cost += penalties.weight * predicted.weight;
    }
    if g.ketone {
        cost += penalties.ketone * KETO_RATIO_TARGET - penalties.ketone * keto_ratio;
    }
    cost
}

/// Yesterday's measurements the roll-forward starts from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientState {
    pub glucose: f64,
    pub weight: f64,
    pub ketone: f64,
}

impl PatientState {
    pub fn from_record(record: &DailyRecord) -> Result<Self, ControllerError> {
        let get = |f: Field| record.get(f).ok_or(ControllerError::MissingState(f));
        Ok(PatientState {
            glucose: get(Field::Glucose)?,
            weight: get(Field::Weight)?,
            ketone: get(Field::Ketone)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cost: f64,
    pub keto_ratio: f64,
    /// One forecast per horizon day.
    pub outcomes: Vec<PredictedOutcome>,
}

/// Rolls the twin forward `horizon` days holding `suggestion` fixed.
pub fn evaluate<P: Predictor + ?Sized>(
    suggestion: &Suggestion,
    twin: &P,
    state: &PatientState,
    profile: &PatientProfile,
    penalties: &Penalties,
    horizon: usize,
) -> Result<Evaluation, ControllerError> {
    let k = suggestion.keto_ratio()?;
    let mut current = *state;
    let mut cost = 0.0;
    let mut outcomes = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let predicted = twin.predict(&suggestion.features(current.glucose, current.weight, current.ketone))?;
        cost += day_cost(&predicted, current.weight, profile, k, penalties);
        current = PatientState {
            glucose: predicted.glucose,
            weight: predicted.weight,
            ketone: predicted.ketone,
        };
        outcomes.push(predicted);
    }
    Ok(Evaluation {
        cost,
        keto_ratio: k,
        outcomes,
    })
}

/// Objective value of `suggestion` given the previous day's record.
pub fn objective<P: Predictor + ?Sized>(
    suggestion: &Suggestion,
    twin: &P,
    prev: &DailyRecord,
    profile: &PatientProfile,
    penalties: &Penalties,
    horizon: usize,
) -> Result<f64, ControllerError> {
    let state = PatientState::from_record(prev)?;
    Ok(evaluate(suggestion, twin, &state, profile, penalties, horizon)?.cost)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    /// Prediction horizon in days.
    pub horizon: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Maximum velocity per step as a fraction of each dimension's width.
    pub velocity_clamp: f64,
    pub seed: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            swarm_size: 40,
            iterations: 200,
            horizon: 1,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: 0.2,
            seed: 0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.swarm_size < 2 {
            return Err(ControllerError::Config("swarm size must be at least 2".into()));
        }
        if self.horizon < 1 {
            return Err(ControllerError::Config("horizon must be at least 1 day".into()));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(ControllerError::Config("inertia must lie in (0, 1)".into()));
        }
        if !(self.velocity_clamp > 0.0) {
            return Err(ControllerError::Config("velocity clamp must be positive".into()));
        }
        Ok(())
    }
}

/// Audit record of one controller run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub config: ControllerConfig,
    pub penalties: Penalties,
    pub best_cost_per_iteration: Vec<f64>,
    pub suggestion: Suggestion,
    pub cost: f64,
}

impl RunLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run log serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub suggestion: Suggestion,
    /// Forecast for the first horizon day.
    pub predicted: PredictedOutcome,
    pub cost: f64,
    pub log: RunLog,
}

/// Searches the patient's box for the suggestion with the lowest objective.
pub fn optimize<P: Predictor + ?Sized>(
    twin: &P,
    prev: &DailyRecord,
    profile: &PatientProfile,
    penalties: &Penalties,
    config: &ControllerConfig,
) -> Result<Decision, ControllerError> {
    config.validate()?;
    let cbox = patient_box(profile)?;
    let state = PatientState::from_record(prev)?;
    let result = minimize(
        &cbox.bounds,
        |x| cbox.project(x),
        |x| evaluate(&Suggestion::from_decision(x), twin, &state, profile, penalties, config.horizon).map(|e| e.cost),
        config,
    )?;
    let suggestion = Suggestion::from_decision(&result.best);
    let eval = evaluate(&suggestion, twin, &state, profile, penalties, config.horizon)?;
    Ok(Decision {
        suggestion,
        predicted: eval.outcomes[0],
        cost: eval.cost,
        log: RunLog {
            seed: config.seed,
            config: config.clone(),
            penalties: *penalties,
            best_cost_per_iteration: result.history,
            suggestion,
            cost: eval.cost,
        },
    })
}
