//! Events and the state they fold into.
//!
//! Every change the service makes is an [`Event`]; [`State`] is nothing but
//! the fold of the log through [`State::apply`]. Events carry their results
//! (trained models, suggestions, composed messages), so replay never reruns
//! training or optimisation and is exact.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use onlc_core::controller::{Penalties, Suggestion};
use onlc_core::evaluation::{clarke_zone, ZoneReport, GRID_MAX};
use onlc_core::messaging::{DailyMessage, MessageHistory};
use onlc_core::scoring::{PenaltyLookup, Rating, RuleCheck, Term};
use onlc_core::twin::{PredictedOutcome, TrainingReport, TwinModel};
use onlc_core::{DailyRecord, Group, PatientProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("event {seq}: {reason}")]
    Inconsistent { seq: u64, reason: String },
    #[error("event {found} follows {previous}; sequence numbers must increase by one")]
    Gap { previous: u64, found: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    PatientRegistered {
        profile: PatientProfile,
    },
    RecordIngested {
        patient: String,
        record: DailyRecord,
    },
    SuggestionIssued {
        item: ReviewItem,
    },
    ItemScored {
        item: u64,
        score: Score,
    },
    MessageDispatched {
        item: u64,
        message: DailyMessage,
        plan_error: Option<String>,
    },
    PooledModelTrained {
        model: TwinModel,
        report: TrainingReport,
    },
    GroupModelTrained {
        model: TwinModel,
        report: RetrainReport,
    },
    LookupUpdated {
        lookup: PenaltyLookup,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    PendingReview,
    Scored,
    Dispatched,
}

impl ItemStatus {
    pub fn slug(self) -> &'static str {
        match self {
            ItemStatus::PendingReview => "pending_review",
            ItemStatus::Scored => "scored",
            ItemStatus::Dispatched => "dispatched",
        }
    }
}

/// Where the multipliers of a run came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySource {
    Nurse,
    Lookup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// `None` when the item was released under automatic scoring.
    pub rating: Option<Rating>,
    pub terms: Vec<Term>,
    /// Multipliers for the patient's next run.
    pub penalties: Penalties,
    pub source: PenaltySource,
}

/// One suggestion awaiting (or past) nurse review.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: u64,
    pub patient: String,
    /// Day the suggestion is for.
    pub date: NaiveDate,
    pub last_record: DailyRecord,
    pub suggestion: Suggestion,
    pub predicted: PredictedOutcome,
    pub cost: f64,
    pub keto_ratio_last: Option<f64>,
    pub keto_ratio_suggested: f64,
    pub penalties: Penalties,
    pub penalty_source: PenaltySource,
    /// Violated boundary rules, most important first.
    pub violations: Vec<RuleCheck>,
    pub model: String,
    pub status: ItemStatus,
    pub score: Option<Score>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainKind {
    Initial,
    Weekly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrainReport {
    pub group: Group,
    pub kind: RetrainKind,
    /// Last target date of the training data; the idempotency key with `group`.
    pub week_end: NaiveDate,
    pub window_start: Option<NaiveDate>,
    pub pairs: usize,
    pub epochs_run: usize,
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientEntry {
    pub profile: PatientProfile,
    pub records: BTreeMap<NaiveDate, DailyRecord>,
    /// Suggestion date to review item id.
    pub items: BTreeMap<NaiveDate, u64>,
    /// Nurse multipliers waiting for the next run.
    pub pending_penalties: Option<Penalties>,
    pub history: MessageHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchedMessage {
    pub item: u64,
    pub patient: String,
    pub date: NaiveDate,
    pub message: DailyMessage,
    pub plan_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VersionedLookup {
    pub version: u32,
    pub lookup: PenaltyLookup,
}

/// Everything derived from the event log. Groups are keyed by slug.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub seq: u64,
    pub patients: BTreeMap<String, PatientEntry>,
    pub items: BTreeMap<u64, ReviewItem>,
    pub messages: BTreeMap<u64, DispatchedMessage>,
    pub pooled: Option<TwinModel>,
    pub models: BTreeMap<String, TwinModel>,
    pub retrains: Vec<RetrainReport>,
    /// Zones of each group twin's glucose forecasts against what was
    /// later recorded.
    pub forecast_zones: BTreeMap<String, ZoneReport>,
    pub lookup: VersionedLookup,
}

impl Default for State {
    fn default() -> Self {
        State {
            seq: 0,
            patients: BTreeMap::new(),
            items: BTreeMap::new(),
            messages: BTreeMap::new(),
            pooled: None,
            models: BTreeMap::new(),
            retrains: Vec::new(),
            forecast_zones: BTreeMap::new(),
            lookup: VersionedLookup {
                version: 1,
                lookup: PenaltyLookup::default(),
            },
        }
    }
}

impl State {
    pub fn next_item_id(&self) -> u64 {
        self.items.keys().next_back().map_or(1, |id| id + 1)
    }

    pub fn model(&self, group: Group) -> Option<&TwinModel> {
        self.models.get(group.slug())
    }

    pub fn retrain(&self, group: Group, week_end: NaiveDate) -> Option<&RetrainReport> {
        self.retrains.iter().find(|r| r.group == group && r.week_end == week_end)
    }

    pub fn item_for(&self, patient: &str, date: NaiveDate) -> Option<&ReviewItem> {
        let id = self.patients.get(patient)?.items.get(&date)?;
        self.items.get(id)
    }

    /// Canonical JSON; two states are the same exactly when these match.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    /// Folds one event in. Fails, leaving `self` untouched, when the event
    /// does not fit the state.
    pub fn apply(&mut self, envelope: &Envelope) -> Result<(), ReplayError> {
        if envelope.seq != self.seq + 1 {
            return Err(ReplayError::Gap {
                previous: self.seq,
                found: envelope.seq,
            });
        }
        let bad = |reason: String| ReplayError::Inconsistent {
            seq: envelope.seq,
            reason,
        };
        match &envelope.event {
            Event::PatientRegistered { profile } => {
                if self.patients.contains_key(&profile.id) {
                    return Err(bad(format!("patient {} registered twice", profile.id)));
                }
                self.patients.insert(
                    profile.id.clone(),
                    PatientEntry {
                        profile: profile.clone(),
                        records: BTreeMap::new(),
                        items: BTreeMap::new(),
                        pending_penalties: None,
                        history: MessageHistory::default(),
                    },
                );
            }
            Event::RecordIngested { patient, record } => {
                let entry = self
                    .patients
                    .get_mut(patient)
                    .ok_or_else(|| bad(format!("unknown patient {patient}")))?;
                if entry.records.contains_key(&record.date) {
                    return Err(bad(format!("{patient} already has a record for {}", record.date)));
                }
                entry.records.insert(record.date, record.clone());
                let forecast = entry
                    .items
                    .get(&record.date)
                    .and_then(|id| self.items.get(id))
                    .map(|item| item.predicted.glucose);
                if let (Some(predicted), Some(actual)) = (forecast, record.glucose) {
                    let zone = clarke_zone(actual.clamp(1.0, GRID_MAX), predicted.clamp(1.0, GRID_MAX))
                        .map_err(|e| bad(e.to_string()))?;
                    self.forecast_zones
                        .entry(entry.profile.group().slug().to_string())
                        .or_default()
                        .add(zone);
                }
            }
            Event::SuggestionIssued { item } => {
                if self.items.contains_key(&item.id) {
                    return Err(bad(format!("item {} issued twice", item.id)));
                }
                let entry = self
                    .patients
                    .get_mut(&item.patient)
                    .ok_or_else(|| bad(format!("unknown patient {}", item.patient)))?;
                if entry.items.contains_key(&item.date) {
                    return Err(bad(format!("{} already has a suggestion for {}", item.patient, item.date)));
                }
                entry.items.insert(item.date, item.id);
                if item.penalty_source == PenaltySource::Nurse {
                    entry.pending_penalties = None;
                }
                self.items.insert(item.id, item.clone());
            }
            Event::ItemScored { item, score } => {
                let it = self.items.get_mut(item).ok_or_else(|| bad(format!("unknown item {item}")))?;
                if it.status != ItemStatus::PendingReview {
                    return Err(bad(format!("item {item} is already {}", it.status.slug())));
                }
                it.status = ItemStatus::Scored;
                it.score = Some(score.clone());
                if score.source == PenaltySource::Nurse {
                    if let Some(entry) = self.patients.get_mut(&it.patient) {
                        entry.pending_penalties = Some(score.penalties);
                    }
                }
            }
            Event::MessageDispatched {
                item,
                message,
                plan_error,
            } => {
                let it = self.items.get_mut(item).ok_or_else(|| bad(format!("unknown item {item}")))?;
                if it.status != ItemStatus::Scored {
                    return Err(bad(format!("item {item} dispatched while {}", it.status.slug())));
                }
                it.status = ItemStatus::Dispatched;
                if let Some(entry) = self.patients.get_mut(&it.patient) {
                    entry.history.record(it.date, &message.motivation.id);
                }
                self.messages.insert(
                    *item,
                    DispatchedMessage {
                        item: *item,
                        patient: it.patient.clone(),
                        date: it.date,
                        message: message.clone(),
                        plan_error: plan_error.clone(),
                    },
                );
            }
            Event::PooledModelTrained { model, .. } => {
                self.pooled = Some(model.clone());
            }
            Event::GroupModelTrained { model, report } => {
                if self.retrain(report.group, report.week_end).is_some() {
                    return Err(bad(format!("{} trained twice for {}", report.group, report.week_end)));
                }
                self.models.insert(report.group.slug().to_string(), model.clone());
                self.retrains.push(report.clone());
            }
            Event::LookupUpdated { lookup } => {
                self.lookup = VersionedLookup {
                    version: self.lookup.version + 1,
                    lookup: lookup.clone(),
                };
            }
        }
        self.seq = envelope.seq;
        Ok(())
    }
}

/// Rebuilds state from a full log.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a Envelope>) -> Result<State, ReplayError> {
    let mut state = State::default();
    for e in events {
        state.apply(e)?;
    }
    Ok(state)
}
