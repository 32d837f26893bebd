//! Motivational message selection.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{MessagingError, NO_REPEAT_DAYS};
use crate::scoring::{violations, Metric, RuleCheck};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    PositiveFeedback,
    Carbohydrate,
    Protein,
    Fat,
    Fiber,
    OverallNutrition,
    SelfMonitoring,
    Exercise,
}

impl Domain {
    pub const ALL: [Domain; 8] = [
        Domain::PositiveFeedback,
        Domain::Carbohydrate,
        Domain::Protein,
        Domain::Fat,
        Domain::Fiber,
        Domain::OverallNutrition,
        Domain::SelfMonitoring,
        Domain::Exercise,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Domain::PositiveFeedback => "Positive Feedback",
            Domain::Carbohydrate => "Carbohydrate",
            Domain::Protein => "Protein",
            Domain::Fat => "Fat",
            Domain::Fiber => "Fiber",
            Domain::OverallNutrition => "Overall Nutrition",
            Domain::SelfMonitoring => "Self-monitoring",
            Domain::Exercise => "Exercise",
        }
    }
}

/// Message domain addressing a violated boundary.
pub fn metric_domain(metric: Metric) -> Domain {
    match metric {
        Metric::NetCarb | Metric::CarbCalorieShare => Domain::Carbohydrate,
        Metric::Protein => Domain::Protein,
        Metric::Fat | Metric::KetoRatio => Domain::Fat,
        Metric::IntakeCalories => Domain::OverallNutrition,
        Metric::Glucose | Metric::Weight | Metric::Ketone => Domain::SelfMonitoring,
        Metric::ActivityCalories | Metric::Steps => Domain::Exercise,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub domain: Domain,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MessagePool {
    pub messages: Vec<Message>,
}

impl MessagePool {
    pub fn new(messages: Vec<Message>) -> Result<Self, MessagingError> {
        let p = MessagePool { messages };
        p.validate()?;
        Ok(p)
    }

    pub fn from_json(json: &str) -> Result<Self, MessagingError> {
        let p: MessagePool = serde_json::from_str(json)?;
        p.validate()?;
        Ok(p)
    }

    /// The placeholder pool shipped with the crate.
    pub fn bundled() -> Self {
        MessagePool::from_json(include_str!("../../fixtures/messages.json")).expect("bundled pool is valid")
    }

    /// Every domain needs at least one message and ids must be unique.
    pub fn validate(&self) -> Result<(), MessagingError> {
        for d in Domain::ALL {
            if !self.messages.iter().any(|m| m.domain == d) {
                return Err(MessagingError::Pool(format!("no messages for {}", d.label())));
            }
        }
        let mut ids: Vec<&str> = self.messages.iter().map(|m| m.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(MessagingError::Pool("duplicate message id".into()));
        }
        Ok(())
    }

    pub fn in_domain(&self, domain: Domain) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.domain == domain)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentMessage {
    pub date: NaiveDate,
    pub id: String,
}

/// Messages already sent to one patient.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageHistory {
    pub sent: Vec<SentMessage>,
}

impl MessageHistory {
    pub fn record(&mut self, date: NaiveDate, id: impl Into<String>) {
        self.sent.push(SentMessage { date, id: id.into() });
    }

    pub fn last_sent(&self, id: &str) -> Option<NaiveDate> {
        self.sent.iter().filter(|s| s.id == id).map(|s| s.date).max()
    }
}

/// Picks a message for `date`. The domain follows the most important
/// violated boundary, or positive feedback when nothing is violated.
/// Messages sent in the previous 13 days are skipped; if a whole domain is
/// blocked, its least recently sent message is reused.
pub fn pick_motivation<'a>(
    checks: &[RuleCheck],
    pool: &'a MessagePool,
    history: &MessageHistory,
    date: NaiveDate,
) -> Result<&'a Message, MessagingError> {
    let domain = violations(checks)
        .first()
        .map(|c| metric_domain(c.rule.metric))
        .unwrap_or(Domain::PositiveFeedback);
    let blocked = |m: &Message| {
        history
            .last_sent(&m.id)
            .is_some_and(|d| (date - d).num_days() < NO_REPEAT_DAYS && d <= date)
    };
    let candidates: Vec<&Message> = pool.in_domain(domain).collect();
    if candidates.is_empty() {
        return Err(MessagingError::Pool(format!("no messages for {}", domain.label())));
    }
    // never-sent first, then oldest; pool order breaks ties
    let lru = |list: &[&'a Message]| -> Option<&'a Message> {
        list.iter().copied().min_by_key(|m| history.last_sent(&m.id))
    };
    let open: Vec<&Message> = candidates.iter().copied().filter(|m| !blocked(m)).collect();
    Ok(lru(&open).or_else(|| lru(&candidates)).expect("candidates are non-empty"))
}
