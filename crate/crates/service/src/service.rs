//! Commands: validate, compute, append an event, fold it in.

use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard};

use chrono::{Duration, NaiveDate};
use onlc_core::controller::{optimize, ControllerConfig, PENALTY_RANGE};
use onlc_core::messaging::{compose, pick_motivation, plan_meals, step_goal, Catalog, MealPlan, MessagePool};
use onlc_core::scoring::{
    apply_rating, auto_penalties, check_boundaries, violations, BoundaryInput, BoundaryTable, Goals, PenaltyLookup,
    Rating, Term,
};
use onlc_core::twin::{
    finetune, pretrain, training_pairs, weekly_retrain, FeatureVector, Predictor, RetrainWindow, TrainingPair,
    TwinConfig,
};
use onlc_core::{DailyRecord, DietGroup, Group, PatientProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{
    DispatchedMessage, Envelope, Event, ItemStatus, PatientEntry, PenaltySource, RetrainKind, RetrainReport, ReviewItem, Score,
    State,
};
use crate::store::{EventLog, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Validation(_) => "validation",
            ServiceError::Precondition(_) => "precondition",
            ServiceError::Store(_) | ServiceError::Internal(_) => "internal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Every suggestion waits for a nurse rating before dispatch.
    Manual,
    /// Suggestions run on lookup penalties and dispatch without review.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Static bearer token; `None` disables the check.
    pub token: Option<String>,
    pub scoring_mode: ScoringMode,
    /// Seeds every controller run together with patient and date.
    pub seed: u64,
    pub controller: ControllerConfig,
    pub twin: TwinConfig,
    /// Fewest pairs a group needs for its first model.
    pub min_training_pairs: usize,
    pub data_dir: Option<PathBuf>,
    /// Snapshot interval in events; 0 disables snapshots.
    pub snapshot_every: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            token: None,
            scoring_mode: ScoringMode::Manual,
            seed: 1,
            controller: ControllerConfig::default(),
            twin: TwinConfig::default(),
            min_training_pairs: 21,
            data_dir: None,
            snapshot_every: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestAck {
    pub seq: u64,
    /// Review item created for the next day, if any.
    pub item: Option<u64>,
    /// Why no suggestion was made, for AI-arm patients.
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PenaltyOverrides {
    pub glucose: Option<f64>,
    pub weight: Option<f64>,
    pub ketone: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub rating: Rating,
    /// Terms the rating applies to; all three when absent.
    #[serde(default)]
    pub terms: Option<Vec<Term>>,
    #[serde(default)]
    pub overrides: PenaltyOverrides,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrainResponse {
    pub report: RetrainReport,
    /// True when this (group, week) was already trained and nothing ran.
    pub cached: bool,
}

struct Inner {
    state: State,
    log: EventLog,
    broken: bool,
}

/// The service. All mutations go through one lock, so events are totally
/// ordered and each command sees the state its event will apply to.
pub struct Service {
    config: ServiceConfig,
    catalog: Catalog,
    pool: MessagePool,
    inner: Mutex<Inner>,
}

impl Service {
    /// A service whose log lives only in memory.
    pub fn in_memory(config: ServiceConfig) -> Self {
        Self::with_log(config, EventLog::Memory(Vec::new()), State::default())
    }

    /// Opens the on-disk log in `config.data_dir`, replaying it.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let dir = config
            .data_dir
            .clone()
            .ok_or_else(|| ServiceError::Validation("no data directory configured".into()))?;
        let (log, state) = EventLog::open(&dir, config.snapshot_every)?;
        Ok(Self::with_log(config, log, state))
    }

    fn with_log(config: ServiceConfig, log: EventLog, state: State) -> Self {
        Service {
            config,
            catalog: Catalog::bundled(),
            pool: MessagePool::bundled(),
            inner: Mutex::new(Inner {
                state,
                log,
                broken: false,
            }),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // a panic mid-command happens before any append, so the state is intact
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Copy of the current state.
    pub fn state(&self) -> State {
        self.lock().state.clone()
    }

    /// Events held by an in-memory log.
    pub fn memory_log(&self) -> Vec<Envelope> {
        self.lock().log.memory().to_vec()
    }

    /// Writes a snapshot now (disk logs only).
    pub fn snapshot(&self) -> Result<(), ServiceError> {
        let inner = self.lock();
        inner.log.snapshot(&inner.state)?;
        Ok(())
    }

    fn emit(inner: &mut Inner, event: Event) -> Result<u64, ServiceError> {
        if inner.broken {
            return Err(ServiceError::Internal("event log write failed earlier; restart to recover".into()));
        }
        let envelope = Envelope {
            seq: inner.state.seq + 1,
            event,
        };
        inner
            .state
            .apply(&envelope)
            .map_err(|e| ServiceError::Internal(format!("command produced an inconsistent event: {e}")))?;
        if let Err(e) = inner.log.append(&envelope) {
            // memory is now ahead of disk
            inner.broken = true;
            return Err(e.into());
        }
        inner.log.maybe_snapshot(&inner.state)?;
        Ok(envelope.seq)
    }

    pub fn register_patient(&self, profile: PatientProfile) -> Result<PatientProfile, ServiceError> {
        if profile.id.is_empty() || profile.id.contains('/') {
            return Err(ServiceError::Validation("patient id must be non-empty and contain no '/'".into()));
        }
        if !(profile.calorie_goal > 0.0 && profile.baseline_weight > 0.0 && profile.weight_goal > 0.0) {
            return Err(ServiceError::Validation("weights and calorie goal must be positive".into()));
        }
        onlc_core::controller::patient_box(&profile).map_err(|e| ServiceError::Validation(e.to_string()))?;
        check_boundaries(
            &BoundaryTable::for_diet(profile.diet_group),
            &BoundaryInput::default(),
            &Goals::from(&profile),
        )
        .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let mut inner = self.lock();
        if inner.state.patients.contains_key(&profile.id) {
            return Err(ServiceError::Conflict(format!("patient {} exists", profile.id)));
        }
        Self::emit(&mut inner, Event::PatientRegistered { profile: profile.clone() })?;
        Ok(profile)
    }

    pub fn records(&self, patient: &str) -> Result<Vec<DailyRecord>, ServiceError> {
        let inner = self.lock();
        let entry = inner
            .state
            .patients
            .get(patient)
            .ok_or_else(|| ServiceError::NotFound(format!("no patient {patient}")))?;
        Ok(entry.records.values().cloned().collect())
    }

    /// Stores a record; for AI-arm patients with a trained group twin this
    /// also issues the next day's suggestion.
    pub fn ingest_record(&self, patient: &str, record: DailyRecord) -> Result<IngestAck, ServiceError> {
        record.validate().map_err(ServiceError::Validation)?;
        let mut inner = self.lock();
        let entry = inner
            .state
            .patients
            .get(patient)
            .ok_or_else(|| ServiceError::NotFound(format!("no patient {patient}")))?;
        if entry.records.contains_key(&record.date) {
            return Err(ServiceError::Conflict(format!("{patient} already has a record for {}", record.date)));
        }
        let ai = entry.profile.arm == onlc_core::Arm::Ai;
        let seq = Self::emit(
            &mut inner,
            Event::RecordIngested {
                patient: patient.to_string(),
                record,
            },
        )?;
        let (item, note) = if ai {
            match self.issue_suggestion(&mut inner, patient)? {
                Ok(id) => (Some(id), None),
                Err(why) => (None, Some(why)),
            }
        } else {
            (None, None)
        };
        Ok(IngestAck { seq, item, note })
    }

    /// Issues a suggestion for the day after the patient's latest record
    /// if none exists yet.
    pub fn suggest(&self, patient: &str) -> Result<ReviewItem, ServiceError> {
        let mut inner = self.lock();
        let entry = inner
            .state
            .patients
            .get(patient)
            .ok_or_else(|| ServiceError::NotFound(format!("no patient {patient}")))?;
        if entry.profile.arm != onlc_core::Arm::Ai {
            return Err(ServiceError::Precondition(format!("{patient} is in the control arm")));
        }
        match self.issue_suggestion(&mut inner, patient)? {
            Ok(id) => Ok(inner.state.items[&id].clone()),
            Err(why) => Err(ServiceError::Precondition(why)),
        }
    }

    /// Inner result is the new item id, or why none could be made.
    fn issue_suggestion(&self, inner: &mut Inner, patient: &str) -> Result<Result<u64, String>, ServiceError> {
        let state = &inner.state;
        let entry = &state.patients[patient];
        let profile = &entry.profile;
        let Some(last) = entry.records.values().next_back() else {
            return Ok(Err("no records yet".into()));
        };
        let date = last.date + Duration::days(1);
        if let Some(id) = entry.items.get(&date) {
            return Ok(Ok(*id));
        }
        let Some(model) = state.model(profile.group()) else {
            return Ok(Err(format!("group {} has no trained twin", profile.group())));
        };
        let features = match FeatureVector::from_record(last) {
            Ok(f) => f,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let (penalties, penalty_source) = match entry.pending_penalties {
            Some(p) => (p, PenaltySource::Nurse),
            None => {
                let outlook = model.predict(&features).map_err(|e| ServiceError::Internal(e.to_string()))?;
                let p = auto_penalties(
                    &state.lookup.lookup,
                    &outlook,
                    last.keto_ratio().unwrap_or(0.0),
                    features.prev_weight,
                    profile.diet_group,
                )
                .map_err(|e| ServiceError::Internal(e.to_string()))?;
                (p, PenaltySource::Lookup)
            }
        };
        let controller = ControllerConfig {
            seed: run_seed(self.config.seed, patient, date),
            ..self.config.controller.clone()
        };
        let decision = optimize(model, last, profile, &penalties, &controller)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let checks = check_boundaries(
            &BoundaryTable::for_diet(profile.diet_group),
            &BoundaryInput::from_plan(&decision.suggestion, &decision.predicted, features.prev_weight),
            &Goals::from(profile),
        )
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let item = ReviewItem {
            id: state.next_item_id(),
            patient: patient.to_string(),
            date,
            last_record: last.clone(),
            suggestion: decision.suggestion,
            predicted: decision.predicted,
            cost: decision.cost,
            keto_ratio_last: last.keto_ratio(),
            keto_ratio_suggested: decision
                .suggestion
                .keto_ratio()
                .map_err(|e| ServiceError::Internal(e.to_string()))?,
            penalties,
            penalty_source,
            violations: violations(&checks).into_iter().cloned().collect(),
            model: model.fingerprint(),
            status: ItemStatus::PendingReview,
            score: None,
        };
        let id = item.id;
        Self::emit(inner, Event::SuggestionIssued { item })?;
        Ok(Ok(id))
    }

    /// Items in id order, optionally filtered.
    pub fn review_queue(&self, status: Option<ItemStatus>, patient: Option<&str>) -> Vec<ReviewItem> {
        self.lock()
            .state
            .items
            .values()
            .filter(|i| status.is_none_or(|s| i.status == s))
            .filter(|i| patient.is_none_or(|p| i.patient == p))
            .cloned()
            .collect()
    }

    pub fn item_for(&self, patient: &str, date: NaiveDate) -> Option<ReviewItem> {
        self.lock().state.item_for(patient, date).cloned()
    }

    pub fn item(&self, id: u64) -> Result<ReviewItem, ServiceError> {
        self.lock()
            .state
            .items
            .get(&id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no review item {id}")))
    }

    /// Records a nurse rating; the resulting multipliers drive the
    /// patient's next run.
    pub fn score_item(&self, id: u64, request: &ScoreRequest) -> Result<ReviewItem, ServiceError> {
        let mut inner = self.lock();
        let item = inner
            .state
            .items
            .get(&id)
            .ok_or_else(|| ServiceError::NotFound(format!("no review item {id}")))?;
        if item.status != ItemStatus::PendingReview {
            return Err(ServiceError::Conflict(format!("item {id} is already {}", item.status.slug())));
        }
        let terms = request.terms.clone().unwrap_or_else(|| Term::ALL.to_vec());
        if terms.is_empty() {
            return Err(ServiceError::Validation("a rating must apply to at least one term".into()));
        }
        let mut penalties = apply_rating(item.penalties, request.rating, &terms);
        let o = &request.overrides;
        for (slot, value) in [
            (&mut penalties.glucose, o.glucose),
            (&mut penalties.weight, o.weight),
            (&mut penalties.ketone, o.ketone),
        ] {
            if let Some(v) = value {
                if !PENALTY_RANGE.contains(v) {
                    return Err(ServiceError::Validation(format!("override {v} outside [1, 1000]")));
                }
                *slot = v;
            }
        }
        let score = Score {
            rating: Some(request.rating),
            terms,
            penalties,
            source: PenaltySource::Nurse,
        };
        Self::emit(&mut inner, Event::ItemScored { item: id, score })?;
        Ok(inner.state.items[&id].clone())
    }

    /// The message for `date`, composing and dispatching it on first request.
    pub fn daily_message(&self, patient: &str, date: NaiveDate) -> Result<DispatchedMessage, ServiceError> {
        let mut inner = self.lock();
        if !inner.state.patients.contains_key(patient) {
            return Err(ServiceError::NotFound(format!("no patient {patient}")));
        }
        let item = inner
            .state
            .item_for(patient, date)
            .ok_or_else(|| ServiceError::NotFound(format!("no suggestion for {patient} on {date}")))?
            .clone();
        if let Some(m) = inner.state.messages.get(&item.id) {
            return Ok(m.clone());
        }
        if item.status == ItemStatus::PendingReview {
            if self.config.scoring_mode == ScoringMode::Manual {
                return Err(ServiceError::Precondition(format!("item {} awaits nurse review", item.id)));
            }
            let score = Score {
                rating: None,
                terms: Vec::new(),
                penalties: item.penalties,
                source: PenaltySource::Lookup,
            };
            Self::emit(&mut inner, Event::ItemScored { item: item.id, score })?;
        }

        let (message, plan_error) = {
            let entry = &inner.state.patients[patient];
            let profile = &entry.profile;
            let (plan, plan_error) = match plan_meals(&item.suggestion, &self.catalog, profile) {
                Ok(p) => (p, None),
                Err(e) => (MealPlan::maintenance(), Some(e.to_string())),
            };
            let checks = check_boundaries(
                &BoundaryTable::for_diet(profile.diet_group),
                &BoundaryInput::from_plan(&item.suggestion, &item.predicted, item.last_record.weight.unwrap_or(0.0)),
                &Goals::from(profile),
            )
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
            let motivation = pick_motivation(&checks, &self.pool, &entry.history, date)
                .map_err(|e| ServiceError::Internal(e.to_string()))?;
            let steps: Vec<f64> = entry.records.range(..date).filter_map(|(_, r)| r.steps).collect();
            let goal = step_goal(&steps).map_err(|e| ServiceError::Precondition(e.to_string()))?;
            (compose(&plan, motivation, goal), plan_error)
        };
        Self::emit(
            &mut inner,
            Event::MessageDispatched {
                item: item.id,
                message,
                plan_error,
            },
        )?;
        Ok(inner.state.messages[&item.id].clone())
    }

    /// Trains the group's first model, or continues it on the week ending
    /// `week_end` (default: the group's latest record). Repeating a week
    /// returns the stored report.
    pub fn retrain(&self, group: Group, week_end: Option<NaiveDate>) -> Result<RetrainResponse, ServiceError> {
        let mut inner = self.lock();
        let state = &inner.state;
        let in_group = |p: &&PatientEntry| p.profile.group() == group;
        let latest = state
            .patients
            .values()
            .filter(in_group)
            .filter_map(|p| p.records.keys().next_back())
            .max()
            .copied();
        let Some(week_end) = week_end.or(latest) else {
            return Err(ServiceError::Precondition(format!("group {group} has no records")));
        };
        if let Some(report) = state.retrain(group, week_end) {
            return Ok(RetrainResponse {
                report: report.clone(),
                cached: true,
            });
        }
        let current = state.model(group).cloned();
        let from = current.as_ref().map(|_| week_end - Duration::days(6));
        let group_pairs = pairs_between(state.patients.values().filter(in_group), from, week_end);

        let (model, report) = match current {
            None => {
                if group_pairs.len() < self.config.min_training_pairs {
                    return Err(ServiceError::Precondition(format!(
                        "group {group} has {} training pairs, {} needed",
                        group_pairs.len(),
                        self.config.min_training_pairs
                    )));
                }
                let pooled = match state.pooled.clone() {
                    Some(m) => m,
                    None => {
                        let all = pairs_between(state.patients.values(), None, week_end);
                        let (model, report) =
                            pretrain(&all, &self.config.twin.pretrain).map_err(|e| ServiceError::Internal(e.to_string()))?;
                        Self::emit(
                            &mut inner,
                            Event::PooledModelTrained {
                                model: model.clone(),
                                report,
                            },
                        )?;
                        model
                    }
                };
                let (model, tr) = finetune(&pooled, group, &group_pairs, &self.config.twin.finetune)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                let report = RetrainReport {
                    group,
                    kind: RetrainKind::Initial,
                    week_end,
                    window_start: None,
                    pairs: group_pairs.len(),
                    epochs_run: tr.epochs_run,
                    model: model.fingerprint(),
                };
                (model, report)
            }
            Some(current) => {
                let window = RetrainWindow {
                    start: week_end - Duration::days(6),
                    end: week_end,
                };
                if let Some(t) = current.meta.trained_through {
                    if window.start <= t {
                        return Err(ServiceError::Conflict(format!(
                            "week {}..={} overlaps data the {group} twin has seen (through {t})",
                            window.start, window.end
                        )));
                    }
                }
                let (model, tr) = weekly_retrain(&current, &group_pairs, window, &self.config.twin.retrain)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                let report = RetrainReport {
                    group,
                    kind: RetrainKind::Weekly,
                    week_end,
                    window_start: Some(window.start),
                    pairs: group_pairs.len(),
                    epochs_run: tr.epochs_run,
                    model: model.fingerprint(),
                };
                (model, report)
            }
        };
        Self::emit(
            &mut inner,
            Event::GroupModelTrained {
                model,
                report: report.clone(),
            },
        )?;
        Ok(RetrainResponse { report, cached: false })
    }

    pub fn metrics(&self, group: Group) -> Result<onlc_core::evaluation::ZoneReport, ServiceError> {
        let inner = self.lock();
        match inner.state.forecast_zones.get(group.slug()) {
            Some(r) if r.total > 0 => Ok(r.clone()),
            _ => Err(ServiceError::Precondition(format!("no scored forecasts for {group} yet"))),
        }
    }

    pub fn lookup(&self) -> crate::state::VersionedLookup {
        self.lock().state.lookup.clone()
    }

    pub fn update_lookup(&self, lookup: PenaltyLookup) -> Result<crate::state::VersionedLookup, ServiceError> {
        lookup.validate().map_err(|e| ServiceError::Validation(e.to_string()))?;
        let mut inner = self.lock();
        Self::emit(&mut inner, Event::LookupUpdated { lookup })?;
        Ok(inner.state.lookup.clone())
    }
}

/// Boundary tables for both diets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub keto: BoundaryTable,
    pub low_fat: BoundaryTable,
}

pub fn boundaries() -> Boundaries {
    Boundaries {
        keto: BoundaryTable::for_diet(DietGroup::Keto),
        low_fat: BoundaryTable::for_diet(DietGroup::LowFat),
    }
}

/// FNV-1a over the patient id, mixed with the seed and day number.
fn run_seed(seed: u64, patient: &str, date: NaiveDate) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in patient.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let day = date.signed_duration_since(NaiveDate::default()).num_days() as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ h ^ day.rotate_left(32)
}

/// Training pairs of `patients` whose target date lies in `[from, to]`.
fn pairs_between<'a>(
    patients: impl Iterator<Item = &'a PatientEntry>,
    from: Option<NaiveDate>,
    to: NaiveDate,
) -> Vec<TrainingPair> {
    patients
        .flat_map(|p| {
            let records: Vec<DailyRecord> = p.records.values().cloned().collect();
            training_pairs(&p.profile.id, &records)
        })
        .filter(|pair| pair.target_date <= to && from.is_none_or(|f| pair.target_date >= f))
        .collect()
}
