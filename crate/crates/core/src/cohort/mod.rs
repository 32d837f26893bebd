//! Synthetic cohorts and the closed-loop trial driver.
//!
//! A trial observes every patient on habitual behaviour, trains the twin at
//! the end of the observation period, then runs the intervention: AI-arm
//! patients get a controller suggestion every day and follow it partially,
//! the rest keep their habits. Group twins are retrained at the end of each
//! week on that week's data.

mod patient;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use patient::{GeneratorConfig, GeneratorParams, Habit, SyntheticPatient, KCAL_PER_LB};

use crate::controller::{optimize, ControllerConfig, ControllerError, Penalties, PatientState, Suggestion};
use crate::data::{write_records, Arm, DailyRecord, DataError, Field, Group};
use crate::evaluation::{clarke_zone, AccuracyTable, ZoneReport, GRID_MAX};
use crate::messaging::{
    compose, pick_motivation, plan_meals, step_goal, Catalog, DailyMessage, MealPlan, MessageHistory, MessagePool,
};
use crate::scoring::{auto_penalties, check_boundaries, BoundaryInput, BoundaryTable, Goals, PenaltyLookup};
use crate::twin::{
    finetune, pretrain, train_from_scratch, training_pairs, weekly_retrain, PredictedOutcome, Predictor,
    RetrainWindow, TrainingPair, TwinConfig, TwinError, TwinModel, OUTPUT_COUNT,
};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("group {group} has {pairs} training pairs, at least {required} needed")]
    InsufficientData {
        group: String,
        pairs: usize,
        required: usize,
    },
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub patients: usize,
    pub days_per_month: u32,
    pub observation_months: u32,
    pub intervention_months: u32,
    pub start_date: NaiveDate,
    pub generator: GeneratorConfig,
    pub twin: TwinConfig,
    pub controller: ControllerConfig,
    pub lookup: PenaltyLookup,
    /// Fewest training pairs a group may have at the end of observation.
    pub min_training_pairs: usize,
    /// Compose daily messages for the AI arm.
    pub messages: bool,
    /// Also train and evaluate from-scratch group twins.
    pub compare_scratch: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            patients: 20,
            days_per_month: 28,
            observation_months: 3,
            intervention_months: 3,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date"),
            generator: GeneratorConfig::default(),
            twin: TwinConfig::default(),
            controller: ControllerConfig::default(),
            lookup: PenaltyLookup::default(),
            min_training_pairs: 21,
            messages: true,
            compare_scratch: false,
        }
    }
}

impl TrialConfig {
    pub fn from_json(text: &str) -> Result<Self, TrialError> {
        let c: TrialConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        if self.patients < 2 || !self.patients.is_multiple_of(2) {
            return Err(TrialError::Config(format!(
                "cohort size must be even and at least 2, got {}",
                self.patients
            )));
        }
        if self.days_per_month == 0 || self.observation_months == 0 {
            return Err(TrialError::Config("observation period is empty".into()));
        }
        self.generator.validate()?;
        self.controller.validate()?;
        self.lookup.validate().map_err(|e| TrialError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn observation_days(&self) -> u32 {
        self.days_per_month * self.observation_months
    }

    pub fn total_days(&self) -> u32 {
        self.days_per_month * (self.observation_months + self.intervention_months)
    }
}

/// Patients in pairs: each pair shares a group and splits across arms, and
/// consecutive pairs rotate through the four groups.
pub fn generate_cohort(n: usize, seed: u64, config: &GeneratorConfig) -> Result<Vec<SyntheticPatient>, TrialError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(TrialError::Config(format!("cohort size must be even and at least 2, got {n}")));
    }
    config.validate()?;
    Ok((0..n)
        .map(|i| {
            let group = Group::ALL[(i / 2) % Group::ALL.len()];
            let arm = if i % 2 == 0 { Arm::Ai } else { Arm::NonAi };
            SyntheticPatient::generate(i, group, arm, seed, config)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayLog {
    pub day: u32,
    pub date: NaiveDate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalties: Option<Penalties>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<Suggestion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    /// Twin forecast for the next morning under the behaviour actually followed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast: Option<PredictedOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<DailyMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientTrajectory {
    pub patient: SyntheticPatient,
    pub records: Vec<DailyRecord>,
    /// Morning state after the last simulated day.
    pub final_state: PatientState,
    /// One entry per intervention day.
    pub days: Vec<DayLog>,
}

impl PatientTrajectory {
    pub fn arm(&self) -> Arm {
        self.patient.profile.arm
    }

    /// Glucose on each intervention morning after the first, ending with
    /// the final state.
    pub fn intervention_glucose(&self, start: usize) -> Vec<f64> {
        self.records[start + 1..]
            .iter()
            .filter_map(|r| r.glucose)
            .chain(std::iter::once(self.final_state.glucose))
            .collect()
    }

    /// Weight change from the first intervention morning to the final state.
    pub fn weight_change(&self, start: usize) -> f64 {
        self.final_state.weight - self.records[start].weight.expect("simulated records are complete")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrainLog {
    pub group: Group,
    pub window: RetrainWindow,
    pub pairs: usize,
    /// Latest target date in the batch; never after `run_date`.
    pub latest_target: Option<NaiveDate>,
    pub run_date: NaiveDate,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub patients: usize,
    pub mean_weight_change: f64,
    pub glucose_in_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub arms: Vec<ArmSummary>,
    /// Clarke zones of the group twins' one-day glucose forecasts during
    /// the intervention.
    pub twin_zones: ZoneReport,
    pub group_zones: Vec<(Group, ZoneReport)>,
    pub accuracy: AccuracyTable,
}

impl TrialSummary {
    pub fn arm(&self, arm: Arm) -> &ArmSummary {
        self.arms.iter().find(|a| a.arm == arm).expect("both arms are summarised")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config: TrialConfig,
    pub patients: Vec<PatientTrajectory>,
    pub retrains: Vec<RetrainLog>,
    pub summary: TrialSummary,
}

impl TrialResult {
    /// One CSV per patient plus `summary.json` and `log.json`.
    pub fn write(&self, dir: &Path) -> Result<(), TrialError> {
        fs::create_dir_all(dir)?;
        for p in &self.patients {
            let file = fs::File::create(dir.join(format!("{}.csv", p.patient.profile.id)))?;
            write_records(&p.records, file)?;
        }
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)?)?;
        let logs: BTreeMap<&str, &[DayLog]> = self
            .patients
            .iter()
            .map(|p| (p.patient.profile.id.as_str(), p.days.as_slice()))
            .collect();
        fs::write(dir.join("log.json"), serde_json::to_string(&logs)?)?;
        fs::write(dir.join("accuracy.txt"), self.summary.accuracy.render())?;
        Ok(())
    }
}

fn state_record(date: NaiveDate, state: &PatientState) -> DailyRecord {
    let mut r = DailyRecord::empty(date);
    r.set(Field::Glucose, Some(state.glucose));
    r.set(Field::Weight, Some(state.weight));
    r.set(Field::Ketone, Some(state.ketone));
    r
}

fn behaviour_of(record: &DailyRecord) -> Suggestion {
    let g = |f| record.get(f).unwrap_or(0.0);
    Suggestion::from_decision(&[
        g(Field::NetCarb),
        g(Field::Fat),
        g(Field::Fiber),
        g(Field::Protein),
        g(Field::ActivityCalories),
        g(Field::Steps),
    ])
}

fn mix(seed: u64, patient: usize, day: u32) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((patient as u64) << 32) ^ day as u64
}

/// Glucose forecasts are clamped into the grid before zoning.
fn zone_pair(actual: f64, predicted: f64) -> (f64, f64) {
    (actual.clamp(1.0, GRID_MAX), predicted.clamp(1.0, GRID_MAX))
}

struct Observation {
    trajectories: Vec<PatientTrajectory>,
    states: Vec<PatientState>,
    behaviour_rngs: Vec<ChaCha8Rng>,
    outcome_rngs: Vec<ChaCha8Rng>,
}

/// Simulates the observation period: every patient follows their habits.
fn observe(cohort: &[SyntheticPatient], seed: u64, config: &TrialConfig) -> Observation {
    let date = |d: u32| config.start_date + Duration::days(d as i64);
    let mut behaviour_rngs: Vec<_> = (0..cohort.len()).map(|i| patient::stream(seed, i, 1)).collect();
    let mut outcome_rngs: Vec<_> = (0..cohort.len()).map(|i| patient::stream(seed, i, 2)).collect();
    let mut states: Vec<PatientState> = cohort.iter().map(SyntheticPatient::initial_state).collect();
    let mut trajectories: Vec<PatientTrajectory> = cohort
        .iter()
        .map(|p| PatientTrajectory {
            patient: p.clone(),
            records: Vec::with_capacity(config.total_days() as usize),
            final_state: p.initial_state(),
            days: Vec::new(),
        })
        .collect();
    for d in 0..config.observation_days() {
        for (i, p) in cohort.iter().enumerate() {
            let behaviour = p.habit_day(&mut behaviour_rngs[i]);
            let (record, next) = p.simulate_day(date(d), &behaviour, &states[i], &mut outcome_rngs[i]);
            trajectories[i].records.push(record);
            states[i] = next;
        }
    }
    for (t, s) in trajectories.iter_mut().zip(&states) {
        t.final_state = *s;
    }
    Observation {
        trajectories,
        states,
        behaviour_rngs,
        outcome_rngs,
    }
}

/// Held-out error of a fine-tuned twin against one trained from scratch on
/// the same few samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferComparison {
    pub seed: u64,
    pub group: Group,
    pub samples: usize,
    pub validation_pairs: usize,
    pub finetuned_mse: f64,
    pub scratch_mse: f64,
}

impl TransferComparison {
    pub fn transfer_helps(&self) -> bool {
        self.finetuned_mse <= self.scratch_mse
    }
}

/// Pre-trains on the observation data of every group except one, then fits
/// that group from `samples` of its pairs twice: fine-tuning the pooled model
/// and training from scratch. Both are scored on the group's remaining pairs.
pub fn transfer_experiment(
    cohort: &[SyntheticPatient],
    seed: u64,
    samples: usize,
    config: &TrialConfig,
) -> Result<TransferComparison, TrialError> {
    config.validate()?;
    let groups: Vec<Group> = {
        let mut g: Vec<Group> = cohort.iter().map(|p| p.profile.group()).collect();
        g.sort();
        g.dedup();
        g
    };
    if groups.len() < 2 {
        return Err(TrialError::Config("transfer needs at least two groups".into()));
    }
    let group = groups[(seed % groups.len() as u64) as usize];
    let observed = observe(cohort, seed, config);

    let mut pooled = Vec::new();
    let mut target = Vec::new();
    for t in &observed.trajectories {
        let pairs = training_pairs(&t.patient.profile.id, &t.records);
        if t.patient.profile.group() == group {
            target.extend(pairs);
        } else {
            pooled.extend(pairs);
        }
    }
    if target.len() <= samples {
        return Err(TrialError::InsufficientData {
            group: group.slug().to_string(),
            pairs: target.len(),
            required: samples + 1,
        });
    }
    target.shuffle(&mut patient::stream(seed, 0, 3));
    let validation = target.split_off(samples);

    let (base, _) = pretrain(&pooled, &config.twin.pretrain)?;
    let (tuned, _) = finetune(&base, group, &target, &config.twin.finetune)?;
    let (scratch, _) = train_from_scratch(group, &target, &config.twin.pretrain)?;
    Ok(TransferComparison {
        seed,
        group,
        samples,
        validation_pairs: validation.len(),
        finetuned_mse: standardized_mse(&tuned, &validation)?,
        scratch_mse: standardized_mse(&scratch, &validation)?,
    })
}

/// Mean squared error per output, each divided by that output's variance
/// over `pairs`, averaged over outputs. Masked targets are skipped.
pub fn standardized_mse(model: &TwinModel, pairs: &[TrainingPair]) -> Result<f64, TrialError> {
    let mut total = 0.0;
    let mut outputs = 0;
    for j in 0..OUTPUT_COUNT {
        let observed: Vec<(f64, &TrainingPair)> = pairs.iter().filter_map(|p| p.next[j].map(|v| (v, p))).collect();
        if observed.len() < 2 {
            continue;
        }
        let n = observed.len() as f64;
        let mean = observed.iter().map(|(v, _)| v).sum::<f64>() / n;
        let var = observed.iter().map(|(v, _)| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sse = 0.0;
        for (v, p) in &observed {
            let f = model.predict(&p.features)?;
            let predicted = [f.glucose, f.weight, f.ketone][j];
            sse += (predicted - v).powi(2);
        }
        total += sse / n / var.max(1e-12);
        outputs += 1;
    }
    if outputs == 0 {
        return Err(TrialError::InsufficientData {
            group: "validation".into(),
            pairs: pairs.len(),
            required: 2,
        });
    }
    Ok(total / outputs as f64)
}

struct GroupModels {
    tuned: BTreeMap<Group, TwinModel>,
    scratch: BTreeMap<Group, TwinModel>,
}

fn train_groups(
    patients: &[PatientTrajectory],
    config: &TrialConfig,
) -> Result<GroupModels, TrialError> {
    let mut pooled = Vec::new();
    let mut by_group: BTreeMap<Group, Vec<TrainingPair>> = BTreeMap::new();
    for p in patients {
        let pairs = training_pairs(&p.patient.profile.id, &p.records);
        by_group.entry(p.patient.profile.group()).or_default().extend(pairs.iter().cloned());
        pooled.extend(pairs);
    }
    let (base, _) = pretrain(&pooled, &config.twin.pretrain)?;
    let mut tuned = BTreeMap::new();
    let mut scratch = BTreeMap::new();
    for (group, pairs) in &by_group {
        if pairs.len() < config.min_training_pairs {
            return Err(TrialError::InsufficientData {
                group: group.slug().to_string(),
                pairs: pairs.len(),
                required: config.min_training_pairs,
            });
        }
        tuned.insert(*group, finetune(&base, *group, pairs, &config.twin.finetune)?.0);
        if config.compare_scratch {
            scratch.insert(*group, train_from_scratch(*group, pairs, &config.twin.pretrain)?.0);
        }
    }
    Ok(GroupModels { tuned, scratch })
}

/// Runs the observation and intervention periods for `cohort`.
pub fn run_trial(cohort: &[SyntheticPatient], seed: u64, config: &TrialConfig) -> Result<TrialResult, TrialError> {
    config.validate()?;
    if cohort.is_empty() {
        return Err(TrialError::Config("empty cohort".into()));
    }
    let obs = config.observation_days();
    let total = config.total_days();
    let date = |d: u32| config.start_date + Duration::days(d as i64);
    let catalog = Catalog::bundled();
    let pool = MessagePool::bundled();

    let Observation {
        mut trajectories,
        mut states,
        mut behaviour_rngs,
        mut outcome_rngs,
    } = observe(cohort, seed, config);

    let GroupModels {
        mut tuned,
        mut scratch,
    } = train_groups(&trajectories, config)?;
    let mut histories: Vec<MessageHistory> = vec![MessageHistory::default(); cohort.len()];
    let mut tuned_reports: BTreeMap<Group, ZoneReport> = BTreeMap::new();
    let mut scratch_reports: BTreeMap<Group, ZoneReport> = BTreeMap::new();
    let mut retrains = Vec::new();

    for d in obs..total {
        for (i, p) in cohort.iter().enumerate() {
            let group = p.profile.group();
            let model = &tuned[&group];
            let state = states[i];
            let habit_day = p.habit_day(&mut behaviour_rngs[i]);
            let mut log = DayLog {
                day: d,
                date: date(d),
                penalties: None,
                suggestion: None,
                cost: None,
                forecast: None,
                message: None,
                message_error: None,
            };

            let behaviour = if p.profile.arm == Arm::Ai {
                let yesterday = behaviour_of(trajectories[i].records.last().expect("observation precedes intervention"));
                let outlook = model.predict(&yesterday.features(state.glucose, state.weight, state.ketone))?;
                let k = yesterday.keto_ratio().unwrap_or(0.0);
                let penalties = auto_penalties(&config.lookup, &outlook, k, state.weight, p.profile.diet_group)
                    .map_err(|e| TrialError::Config(e.to_string()))?;
                let controller = ControllerConfig {
                    seed: mix(seed, i, d),
                    ..config.controller.clone()
                };
                let decision = optimize(model, &state_record(date(d), &state), &p.profile, &penalties, &controller)?;
                if config.messages {
                    match daily_message(p, &decision.suggestion, &decision.predicted, &state, &trajectories[i].records, &catalog, &pool, &mut histories[i], date(d)) {
                        Ok((m, err)) => {
                            log.message = Some(m);
                            log.message_error = err;
                        }
                        Err(e) => log.message_error = Some(e),
                    }
                }
                log.penalties = Some(penalties);
                log.suggestion = Some(decision.suggestion);
                log.cost = Some(decision.cost);
                p.follow(&habit_day, &decision.suggestion)
            } else {
                habit_day
            };

            let features = behaviour.features(state.glucose, state.weight, state.ketone);
            let forecast = model.predict(&features)?;
            let scratch_forecast = match scratch.get(&group) {
                Some(m) => Some(m.predict(&features)?),
                None => None,
            };
            let (record, next) = p.simulate_day(date(d), &behaviour, &state, &mut outcome_rngs[i]);
            let (actual, predicted) = zone_pair(next.glucose, forecast.glucose);
            tuned_reports.entry(group).or_default().add(zone(actual, predicted));
            if let Some(f) = scratch_forecast {
                let (actual, predicted) = zone_pair(next.glucose, f.glucose);
                scratch_reports.entry(group).or_default().add(zone(actual, predicted));
            }
            log.forecast = Some(forecast);
            trajectories[i].records.push(record);
            trajectories[i].days.push(log);
            states[i] = next;
        }

        if (d + 1 - obs).is_multiple_of(7) {
            let window = RetrainWindow {
                start: date(d - 6),
                end: date(d),
            };
            for (group, model) in tuned.iter_mut() {
                let pairs: Vec<TrainingPair> = trajectories
                    .iter()
                    .filter(|t| t.patient.profile.group() == *group)
                    .flat_map(|t| {
                        let from = t.records.len().saturating_sub(8);
                        training_pairs(&t.patient.profile.id, &t.records[from..])
                    })
                    .filter(|p| window.contains(p.target_date))
                    .collect();
                let (next, report) = weekly_retrain(model, &pairs, window, &config.twin.retrain)?;
                retrains.push(RetrainLog {
                    group: *group,
                    window,
                    pairs: pairs.len(),
                    latest_target: pairs.iter().map(|p| p.target_date).max(),
                    run_date: date(d),
                    epochs: report.epochs_run,
                });
                *model = next;
                if let Some(s) = scratch.get_mut(group) {
                    *s = weekly_retrain(s, &pairs, window, &config.twin.retrain)?.0;
                }
            }
        }
    }

    for (t, s) in trajectories.iter_mut().zip(&states) {
        t.final_state = *s;
    }
    let summary = summarise(seed, &trajectories, obs as usize, &tuned_reports, &scratch_reports);
    Ok(TrialResult {
        config: config.clone(),
        patients: trajectories,
        retrains,
        summary,
    })
}

fn zone(actual: f64, predicted: f64) -> crate::evaluation::Zone {
    clarke_zone(actual, predicted).expect("pair was clamped into the grid")
}

#[allow(clippy::too_many_arguments)]
fn daily_message(
    p: &SyntheticPatient,
    suggestion: &Suggestion,
    predicted: &PredictedOutcome,
    state: &PatientState,
    records: &[DailyRecord],
    catalog: &Catalog,
    pool: &MessagePool,
    history: &mut MessageHistory,
    date: NaiveDate,
) -> Result<(DailyMessage, Option<String>), String> {
    let (plan, plan_error) = match plan_meals(suggestion, catalog, &p.profile) {
        Ok(plan) => (plan, None),
        Err(e) => (MealPlan::maintenance(), Some(e.to_string())),
    };
    let checks = check_boundaries(
        &BoundaryTable::for_diet(p.profile.diet_group),
        &BoundaryInput::from_plan(suggestion, predicted, state.weight),
        &Goals::from(&p.profile),
    )
    .map_err(|e| e.to_string())?;
    let motivation = pick_motivation(&checks, pool, history, date).map_err(|e| e.to_string())?;
    history.record(date, &motivation.id);
    let steps: Vec<f64> = records.iter().filter_map(|r| r.steps).collect();
    let goal = step_goal(&steps).map_err(|e| e.to_string())?;
    Ok((compose(&plan, motivation, goal), plan_error))
}

fn summarise(
    seed: u64,
    trajectories: &[PatientTrajectory],
    start: usize,
    tuned: &BTreeMap<Group, ZoneReport>,
    scratch: &BTreeMap<Group, ZoneReport>,
) -> TrialSummary {
    let arms = [Arm::Ai, Arm::NonAi]
        .into_iter()
        .map(|arm| {
            let members: Vec<&PatientTrajectory> = trajectories.iter().filter(|t| t.arm() == arm).collect();
            let n = members.len();
            let mean_weight_change = members.iter().map(|t| t.weight_change(start)).sum::<f64>() / n.max(1) as f64;
            let glucose: Vec<f64> = members.iter().flat_map(|t| t.intervention_glucose(start)).collect();
            let in_range = glucose.iter().filter(|g| (70.0..=130.0).contains(*g)).count();
            ArmSummary {
                arm,
                patients: n,
                mean_weight_change,
                glucose_in_range: if glucose.is_empty() { 0.0 } else { in_range as f64 / glucose.len() as f64 },
            }
        })
        .collect();

    let mut twin_zones = ZoneReport::default();
    for r in tuned.values() {
        twin_zones.merge(r);
    }
    let groups: Vec<Group> = tuned.keys().copied().collect();
    let mut accuracy = AccuracyTable::new(groups.iter().map(|g| g.label().to_string()).collect());
    if !scratch.is_empty() {
        accuracy.push("ANN", groups.iter().map(|g| scratch.get(g).cloned().unwrap_or_default()).collect());
    }
    accuracy.push("ANN-TF", groups.iter().map(|g| tuned[g].clone()).collect());

    TrialSummary {
        seed,
        arms,
        twin_zones,
        group_zones: tuned.iter().map(|(g, r)| (*g, r.clone())).collect(),
        accuracy,
    }
}
