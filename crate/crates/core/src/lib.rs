//! Online nurse-in-the-loop control for type 2 diabetes lifestyle management.
//!
//! The crate is organised around the daily feedback loop:
//!
//! - [`data`]: daily self-monitoring records, CSV ingestion, imputation and the
//!   closed-form keto-ratio / weight-goal formulas.
//! - [`twin`]: the predictive digital twin, a small feed-forward network that is
//!   pre-trained on pooled data, fine-tuned per diet-condition group and
//!   retrained every week.
//! - [`controller`]: particle swarm search over tomorrow's diet and activity,
//!   minimising a gated, nurse-penalised objective evaluated through the twin.
//! - [`scoring`]: rating scale, hard-boundary tables and the penalty lookup
//!   that automates the nurse's multipliers.
//! - [`evaluation`]: Clarke error grid zones and accuracy reports.
//! - [`messaging`]: meal plans, motivational messages and step goals.
//! - [`cohort`]: synthetic patients and the closed-loop trial driver.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cohort;
pub mod controller;
pub mod data;
pub mod evaluation;
pub mod messaging;
pub mod scoring;
pub mod twin;

pub use data::{
    keto_ratio, weight_goal, Arm, Bounds, ConditionGroup, DailyRecord, DataError, DecisionVar,
    DietGroup, Field, FieldMask, Group, PatientProfile,
};
