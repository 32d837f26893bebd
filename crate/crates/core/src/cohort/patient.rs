//! Synthetic patients and the daily ground-truth generator.
//!
//! Every coefficient here is a made-up fixture chosen so that habitual
//! behaviour keeps glucose a little above range and weight creeping up.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TrialError;
use crate::controller::{intake_from_macros, PatientState, Suggestion};
use crate::data::{keto_ratio, Arm, Bounds, DailyRecord, DietGroup, Group, PatientProfile};

/// Kilocalories per pound of body weight.
pub const KCAL_PER_LB: f64 = 3500.0;

pub const GLUCOSE_LIMITS: Bounds = Bounds::new(40.0, 400.0);
pub const WEIGHT_LIMITS: Bounds = Bounds::new(80.0, 600.0);
/// Meters read "LO" below 0.1 mmol/L.
pub const KETONE_LIMITS: Bounds = Bounds::new(0.1, 8.0);

/// Usual daily behaviour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Habit {
    pub net_carb: f64,
    pub fat: f64,
    pub fiber: f64,
    pub protein: f64,
    pub activity_calories: f64,
    pub steps: f64,
}

impl Habit {
    pub fn for_diet(diet: DietGroup) -> Self {
        match diet {
            DietGroup::Keto => Habit {
                net_carb: 40.0,
                fat: 110.0,
                fiber: 22.0,
                protein: 95.0,
                activity_calories: 350.0,
                steps: 5500.0,
            },
            DietGroup::LowFat => Habit {
                net_carb: 230.0,
                fat: 50.0,
                fiber: 25.0,
                protein: 110.0,
                activity_calories: 350.0,
                steps: 5500.0,
            },
        }
    }

    pub fn as_suggestion(&self) -> Suggestion {
        Suggestion::from_decision(&[
            self.net_carb,
            self.fat,
            self.fiber,
            self.protein,
            self.activity_calories,
            self.steps,
        ])
    }

    pub fn intake_calories(&self) -> f64 {
        intake_from_macros(self.net_carb, self.fat, self.protein)
    }

    fn scaled(&self, factor: f64) -> Self {
        Habit {
            net_carb: self.net_carb * factor,
            fat: self.fat * factor,
            fiber: self.fiber * factor,
            protein: self.protein * factor,
            ..*self
        }
    }
}

/// Ground-truth dynamics of one patient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Glucose intercept, mg/dL.
    pub a0: f64,
    /// mg/dL per gram of net carb.
    pub carb_sensitivity: f64,
    /// mg/dL per thousand steps.
    pub step_sensitivity: f64,
    /// Weight of yesterday's glucose.
    pub glucose_persistence: f64,
    pub glucose_noise: f64,
    /// Daily expenditure besides recorded activity, kcal.
    pub basal: f64,
    pub weight_noise: f64,
    pub ketone_base: f64,
    pub ketone_gain: f64,
    pub ketone_midpoint: f64,
    pub ketone_slope: f64,
    pub ketone_noise: f64,
    /// Relative day-to-day spread of habitual behaviour.
    pub behavior_noise: f64,
}

impl GeneratorParams {
    pub fn next_glucose(&self, glucose: f64, behavior: &Suggestion) -> f64 {
        self.a0 + self.carb_sensitivity * behavior.net_carb - self.step_sensitivity * behavior.steps / 1000.0
            + self.glucose_persistence * glucose
    }

    pub fn weight_delta(&self, behavior: &Suggestion) -> f64 {
        (behavior.intake_calories - behavior.activity_calories - self.basal) / KCAL_PER_LB
    }

    pub fn ketone_level(&self, keto_ratio: f64) -> f64 {
        let s = 1.0 / (1.0 + (-self.ketone_slope * (keto_ratio - self.ketone_midpoint)).exp());
        self.ketone_base + self.ketone_gain * s
    }

    /// Glucose the habit settles at without noise.
    pub fn steady_glucose(&self, habit: &Habit) -> f64 {
        (self.a0 + self.carb_sensitivity * habit.net_carb - self.step_sensitivity * habit.steps / 1000.0)
            / (1.0 - self.glucose_persistence)
    }

    pub fn without_noise(mut self) -> Self {
        self.glucose_noise = 0.0;
        self.weight_noise = 0.0;
        self.ketone_noise = 0.0;
        self.behavior_noise = 0.0;
        self
    }
}

/// Ranges the generator draws from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub baseline_weight: Bounds,
    pub habit_scale: Bounds,
    pub habit_glucose: Bounds,
    /// Habitual weight gain, lb per day.
    pub habit_weight_gain: Bounds,
    pub carb_sensitivity: Bounds,
    pub step_sensitivity: Bounds,
    pub glucose_persistence: Bounds,
    pub glucose_noise: f64,
    pub weight_noise: f64,
    pub ketone_noise: f64,
    pub behavior_noise: f64,
    pub adherence: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            baseline_weight: Bounds::new(170.0, 240.0),
            habit_scale: Bounds::new(0.85, 1.15),
            habit_glucose: Bounds::new(135.0, 170.0),
            habit_weight_gain: Bounds::new(0.01, 0.04),
            carb_sensitivity: Bounds::new(0.08, 0.15),
            step_sensitivity: Bounds::new(2.0, 5.0),
            glucose_persistence: Bounds::new(0.4, 0.6),
            glucose_noise: 8.0,
            weight_noise: 0.1,
            ketone_noise: 0.1,
            behavior_noise: 0.2,
            adherence: 0.7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), TrialError> {
        for (name, b) in [
            ("baseline_weight", self.baseline_weight),
            ("habit_scale", self.habit_scale),
            ("habit_glucose", self.habit_glucose),
            ("habit_weight_gain", self.habit_weight_gain),
            ("carb_sensitivity", self.carb_sensitivity),
            ("step_sensitivity", self.step_sensitivity),
            ("glucose_persistence", self.glucose_persistence),
        ] {
            if !b.is_valid() {
                return Err(TrialError::Config(format!("{name} range is inverted")));
            }
        }
        if !(0.0..1.0).contains(&self.glucose_persistence.hi) || self.glucose_persistence.lo < 0.0 {
            return Err(TrialError::Config("glucose persistence must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.adherence) {
            return Err(TrialError::Config("adherence must lie in [0, 1]".into()));
        }
        for (name, v) in [
            ("glucose_noise", self.glucose_noise),
            ("weight_noise", self.weight_noise),
            ("ketone_noise", self.ketone_noise),
            ("behavior_noise", self.behavior_noise),
        ] {
            if !(v >= 0.0) {
                return Err(TrialError::Config(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPatient {
    pub profile: PatientProfile,
    pub habit: Habit,
    pub params: GeneratorParams,
    /// Fraction of the way from habit to suggestion the patient moves.
    pub adherence: f64,
    pub seed: u64,
}

fn draw(rng: &mut ChaCha8Rng, b: Bounds) -> f64 {
    if b.width() > 0.0 {
        rng.gen_range(b.lo..=b.hi)
    } else {
        b.lo
    }
}

/// Independent random stream for one patient and purpose.
pub(crate) fn stream(seed: u64, patient: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((patient as u64) << 8 | purpose);
    rng
}

impl SyntheticPatient {
    pub fn generate(index: usize, group: Group, arm: Arm, seed: u64, config: &GeneratorConfig) -> Self {
        let mut rng = stream(seed, index, 0);
        let habit = Habit::for_diet(group.diet).scaled(draw(&mut rng, config.habit_scale));
        let baseline_weight = draw(&mut rng, config.baseline_weight);
        let carb_sensitivity = draw(&mut rng, config.carb_sensitivity);
        let step_sensitivity = draw(&mut rng, config.step_sensitivity);
        let glucose_persistence = draw(&mut rng, config.glucose_persistence);
        let target_glucose = draw(&mut rng, config.habit_glucose);
        let gain = draw(&mut rng, config.habit_weight_gain);
        let a0 = target_glucose * (1.0 - glucose_persistence) - carb_sensitivity * habit.net_carb
            + step_sensitivity * habit.steps / 1000.0;
        let basal = habit.intake_calories() - habit.activity_calories - gain * KCAL_PER_LB;

        let mut profile = PatientProfile::new(
            format!("p{index:03}"),
            group,
            arm,
            baseline_weight,
            (basal + habit.activity_calories).round(),
        )
        .expect("generated profile is valid");
        profile.min_protein = Some(50.0);
        match group.diet {
            DietGroup::Keto => profile.min_fat = Some(90.0),
            DietGroup::LowFat => profile.max_fat = Some(55.0),
        }

        SyntheticPatient {
            profile,
            habit,
            params: GeneratorParams {
                a0,
                carb_sensitivity,
                step_sensitivity,
                glucose_persistence,
                glucose_noise: config.glucose_noise,
                basal,
                weight_noise: config.weight_noise,
                ketone_base: 0.1,
                ketone_gain: 2.5,
                ketone_midpoint: 1.2,
                ketone_slope: 4.0,
                ketone_noise: config.ketone_noise,
                behavior_noise: config.behavior_noise,
            },
            adherence: config.adherence,
            seed,
        }
    }

    /// Morning measurements on day 0.
    pub fn initial_state(&self) -> PatientState {
        let k = keto_ratio(self.habit.net_carb, self.habit.fat, self.habit.protein).unwrap_or(0.0);
        PatientState {
            glucose: self.params.steady_glucose(&self.habit),
            weight: self.profile.baseline_weight,
            ketone: self.params.ketone_level(k),
        }
    }

    /// One day of habitual behaviour with day-to-day variation.
    pub fn habit_day(&self, rng: &mut ChaCha8Rng) -> Suggestion {
        let sd = self.params.behavior_noise;
        let mut factor = |spread: f64| {
            if sd == 0.0 {
                1.0
            } else {
                (Normal::new(0.0, sd * spread).unwrap().sample(rng)).exp()
            }
        };
        let h = &self.habit;
        let steps = h.steps * factor(1.5);
        let activity = h.activity_calories * (steps / h.steps).powf(0.8) * factor(0.75);
        Suggestion::from_decision(&[
            h.net_carb * factor(1.0),
            h.fat * factor(1.0),
            h.fiber * factor(1.0),
            h.protein * factor(1.0),
            activity,
            steps,
        ])
    }

    /// Behaviour when following `suggestion` partially, on top of the day's
    /// habitual variation.
    pub fn follow(&self, habit_day: &Suggestion, suggestion: &Suggestion) -> Suggestion {
        let base = self.habit.as_suggestion().decision();
        let day = habit_day.decision();
        let target = suggestion.decision();
        let mut x = [0.0; 6];
        for i in 0..6 {
            x[i] = (day[i] + self.adherence * (target[i] - base[i])).max(0.0);
        }
        Suggestion::from_decision(&x)
    }

    /// Records `behavior` and `state` for `date` and returns the next
    /// morning's state.
    pub fn simulate_day(
        &self,
        date: NaiveDate,
        behavior: &Suggestion,
        state: &PatientState,
        rng: &mut ChaCha8Rng,
    ) -> (DailyRecord, PatientState) {
        let p = &self.params;
        let mut noise = |sd: f64| if sd == 0.0 { 0.0 } else { Normal::new(0.0, sd).unwrap().sample(rng) };
        let glucose = GLUCOSE_LIMITS.clamp(p.next_glucose(state.glucose, behavior) + noise(p.glucose_noise));
        let weight = WEIGHT_LIMITS.clamp(state.weight + p.weight_delta(behavior) + noise(p.weight_noise));
        let k = keto_ratio(behavior.net_carb, behavior.fat, behavior.protein).unwrap_or(0.0);
        let ketone = KETONE_LIMITS.clamp(p.ketone_level(k) + noise(p.ketone_noise));

        let record = DailyRecord {
            date,
            net_carb: Some(behavior.net_carb),
            fat: Some(behavior.fat),
            fiber: Some(behavior.fiber),
            protein: Some(behavior.protein),
            intake_calories: Some(behavior.intake_calories),
            activity_calories: Some(behavior.activity_calories),
            steps: Some(behavior.steps.round()),
            glucose: Some(state.glucose),
            ketone: Some(state.ketone),
            weight: Some(state.weight),
            imputed: Default::default(),
        };
        (record, PatientState { glucose, weight, ketone })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ConditionGroup;

    fn patient() -> SyntheticPatient {
        SyntheticPatient::generate(
            0,
            Group::new(DietGroup::Keto, ConditionGroup::ObeseT2D),
            Arm::NonAi,
            3,
            &GeneratorConfig::default(),
        )
    }

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
    }

    #[test]
    fn energy_balance_fixed_point() {
        let mut p = patient();
        p.params = p.params.without_noise();
        let mut behavior = p.habit.as_suggestion();
        behavior.activity_calories = behavior.intake_calories - p.params.basal;
        let s = p.initial_state();
        let (_, next) = p.simulate_day(date(), &behavior, &s, &mut stream(0, 0, 1));
        assert!((next.weight - s.weight).abs() < 1e-12);
    }

    #[test]
    fn surplus_of_3500_kcal_adds_one_pound() {
        let mut p = patient();
        p.params = p.params.without_noise();
        let mut behavior = p.habit.as_suggestion();
        // 500 kcal surplus for 7 days
        behavior.activity_calories = behavior.intake_calories - p.params.basal - 500.0;
        let mut s = p.initial_state();
        let start = s.weight;
        for d in 0..7 {
            s = p.simulate_day(date() + chrono::Duration::days(d), &behavior, &s, &mut stream(0, 0, 1)).1;
        }
        assert!((s.weight - start - 1.0).abs() < 1e-9);
    }

    #[test]
    fn habit_glucose_is_steady_without_noise() {
        let mut p = patient();
        p.params = p.params.without_noise();
        let s = p.initial_state();
        assert!(GeneratorConfig::default().habit_glucose.contains(s.glucose));
        let (_, next) = p.simulate_day(date(), &p.habit.as_suggestion(), &s, &mut stream(0, 0, 1));
        assert!((next.glucose - s.glucose).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_patient() {
        assert_eq!(patient(), patient());
    }

    #[test]
    fn full_adherence_follows_suggestion() {
        let mut p = patient();
        p.adherence = 1.0;
        let habit = p.habit.as_suggestion();
        let target = Suggestion::from_decision(&[20.0, 150.0, 30.0, 60.0, 800.0, 9000.0]);
        let b = p.follow(&habit, &target);
        for (a, t) in b.decision().iter().zip(target.decision()) {
            assert!((a - t).abs() < 1e-9);
        }
        p.adherence = 0.0;
        assert_eq!(p.follow(&habit, &target), habit);
    }
}
