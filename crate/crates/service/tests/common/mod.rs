#![allow(dead_code)]

use onlc_core::cohort::{generate_cohort, GeneratorConfig, SyntheticPatient};
use onlc_core::twin::TrainConfig;
use onlc_service::sim::SimConfig;
use onlc_service::{ScoringMode, ServiceConfig};

/// Service settings small enough for a test: a short swarm and capped epochs.
pub fn light_config(mode: ScoringMode) -> ServiceConfig {
    let mut c = ServiceConfig {
        scoring_mode: mode,
        ..ServiceConfig::default()
    };
    c.controller.swarm_size = 10;
    c.controller.iterations = 10;
    let cap = |t: TrainConfig| TrainConfig {
        max_epochs: t.max_epochs.min(60),
        ..t
    };
    c.twin.pretrain = cap(c.twin.pretrain.clone());
    c.twin.finetune = cap(c.twin.finetune.clone());
    c.twin.retrain = cap(c.twin.retrain.clone());
    c
}

pub fn cohort(n: usize, seed: u64) -> Vec<SyntheticPatient> {
    generate_cohort(n, seed, &GeneratorConfig::default()).unwrap()
}

pub fn short_sim(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        observation_days: 28,
        intervention_days: 15,
        ..SimConfig::default()
    }
}
