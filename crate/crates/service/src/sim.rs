//! Drives a synthetic cohort through the service day by day, the way a
//! device feed, a nurse and a message gateway would.

use chrono::{Duration, NaiveDate};
use onlc_core::cohort::SyntheticPatient;
use onlc_core::controller::PatientState;
use onlc_core::scoring::{Importance, Rating};
use onlc_core::{Arm, Group};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::service::{ScoreRequest, ScoringMode, Service, ServiceError};
use crate::state::ReviewItem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub observation_days: u32,
    pub intervention_days: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date"),
            observation_days: 84,
            intervention_days: 84,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub records: usize,
    pub suggestions: usize,
    pub nurse_scores: usize,
    pub messages: usize,
    pub retrains: usize,
}

/// The scripted nurse: the harsher the worst boundary a suggestion breaks,
/// the harsher the rating, applied to every term.
pub fn scripted_rating(item: &ReviewItem) -> Rating {
    match item.violations.first().map(|c| c.rule.importance) {
        None => Rating::VeryGood,
        Some(Importance::Less) => Rating::Good,
        Some(Importance::Moderate) => Rating::Okay,
        Some(Importance::Very) => Rating::Bad,
    }
}

/// Registers `cohort`, feeds the observation period, trains every group
/// twin, then runs the intervention with weekly retraining.
pub fn run(service: &Service, cohort: &[SyntheticPatient], config: &SimConfig) -> Result<SimReport, ServiceError> {
    let date = |d: u32| config.start_date + Duration::days(i64::from(d));
    let mut rngs: Vec<(ChaCha8Rng, ChaCha8Rng)> = (0..cohort.len())
        .map(|i| {
            let mut b = ChaCha8Rng::seed_from_u64(config.seed);
            b.set_stream(2 * i as u64);
            let mut o = ChaCha8Rng::seed_from_u64(config.seed);
            o.set_stream(2 * i as u64 + 1);
            (b, o)
        })
        .collect();
    let mut states: Vec<PatientState> = cohort.iter().map(SyntheticPatient::initial_state).collect();
    let mut report = SimReport::default();
    let mut groups: Vec<Group> = cohort.iter().map(|p| p.profile.group()).collect();
    groups.sort();
    groups.dedup();

    for p in cohort {
        service.register_patient(p.profile.clone())?;
    }
    let obs = config.observation_days;
    for d in 0..obs + config.intervention_days {
        if d == obs {
            for &g in &groups {
                service.retrain(g, Some(date(d - 1)))?;
                report.retrains += 1;
            }
            for p in cohort.iter().filter(|p| p.profile.arm == Arm::Ai) {
                service.suggest(&p.profile.id)?;
                report.suggestions += 1;
            }
        } else if d > obs && (d - obs).is_multiple_of(7) {
            for &g in &groups {
                service.retrain(g, Some(date(d - 1)))?;
                report.retrains += 1;
            }
        }
        for (i, p) in cohort.iter().enumerate() {
            let (behaviour_rng, outcome_rng) = &mut rngs[i];
            let habit = p.habit_day(behaviour_rng);
            let behaviour = match service.item_for(&p.profile.id, date(d)) {
                Some(item) if d >= obs => {
                    if service.config().scoring_mode == ScoringMode::Manual {
                        service.score_item(
                            item.id,
                            &ScoreRequest {
                                rating: scripted_rating(&item),
                                terms: None,
                                overrides: Default::default(),
                            },
                        )?;
                        report.nurse_scores += 1;
                    }
                    service.daily_message(&p.profile.id, date(d))?;
                    report.messages += 1;
                    p.follow(&habit, &item.suggestion)
                }
                _ => habit,
            };
            let (record, next) = p.simulate_day(date(d), &behaviour, &states[i], outcome_rng);
            states[i] = next;
            let ack = service.ingest_record(&p.profile.id, record)?;
            report.records += 1;
            if ack.item.is_some() {
                report.suggestions += 1;
            }
        }
    }
    Ok(report)
}
