//! Predictive digital twin.
//!
//! A three-hidden-layer network maps one day's lifestyle inputs and
//! measurements to the next day's glucose, weight and ketone. Training
//! follows the transfer-learning recipe: pre-train on pooled data from every
//! patient, fine-tune per diet-condition group starting from the pooled
//! weights, then keep fine-tuning on each new week of data.

mod network;
mod train;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DailyRecord, Field, Group};

pub use network::{Dense, Mlp, Sample};
pub use train::{
    finetune, pretrain, train_from_scratch, training_pairs, weekly_retrain, RetrainWindow, TrainConfig,
    TrainingPair, TrainingReport, TwinConfig,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const FEATURE_SET_VERSION: u32 = 1;
pub const FEATURE_COUNT: usize = 9;
pub const OUTPUT_COUNT: usize = 3;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "net_carb",
    "fat",
    "fiber",
    "protein",
    "activity_calories",
    "steps",
    "prev_glucose",
    "prev_weight",
    "prev_ketone",
];

const PREV_WEIGHT: usize = 7;

#[derive(Debug, Error)]
pub enum TwinError {
    #[error("no trainable day pairs")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("architecture mismatch: model has hidden layers {model:?}, config asks for {config:?}")]
    Incompatible { model: Vec<usize>, config: Vec<usize> },
    #[error("retrain window {start}..={end} overlaps data already trained through {trained_through}")]
    Overlap {
        start: NaiveDate,
        end: NaiveDate,
        trained_through: NaiveDate,
    },
    #[error("invalid retrain window: {0}")]
    Window(String),
    #[error("non-finite feature `{0}`")]
    NonFinite(&'static str),
    #[error("record for {date} lacks `{field}` needed as a feature")]
    MissingFeature { date: NaiveDate, field: Field },
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Model inputs in physical units; normalization happens inside the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub net_carb: f64,
    pub fat: f64,
    pub fiber: f64,
    pub protein: f64,
    pub activity_calories: f64,
    pub steps: f64,
    pub prev_glucose: f64,
    pub prev_weight: f64,
    pub prev_ketone: f64,
}

impl FeatureVector {
    pub fn from_record(record: &DailyRecord) -> Result<Self, TwinError> {
        let get = |field: Field| {
            record.get(field).ok_or(TwinError::MissingFeature {
                date: record.date,
                field,
            })
        };
        Ok(FeatureVector {
            net_carb: get(Field::NetCarb)?,
            fat: get(Field::Fat)?,
            fiber: get(Field::Fiber)?,
            protein: get(Field::Protein)?,
            activity_calories: get(Field::ActivityCalories)?,
            steps: get(Field::Steps)?,
            prev_glucose: get(Field::Glucose)?,
            prev_weight: get(Field::Weight)?,
            prev_ketone: get(Field::Ketone)?,
        })
    }

    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.net_carb,
            self.fat,
            self.fiber,
            self.protein,
            self.activity_calories,
            self.steps,
            self.prev_glucose,
            self.prev_weight,
            self.prev_ketone,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            net_carb: a[0],
            fat: a[1],
            fiber: a[2],
            protein: a[3],
            activity_calories: a[4],
            steps: a[5],
            prev_glucose: a[6],
            prev_weight: a[7],
            prev_ketone: a[8],
        }
    }

    pub fn check_finite(&self) -> Result<(), TwinError> {
        match self.to_array().iter().position(|v| !v.is_finite()) {
            Some(i) => Err(TwinError::NonFinite(FEATURE_NAMES[i])),
            None => Ok(()),
        }
    }
}

/// Next-day forecast in physical units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedOutcome {
    pub glucose: f64,
    pub weight: f64,
    pub ketone: f64,
}

/// Anything that can forecast tomorrow from today's features.
pub trait Predictor {
    fn predict(&self, features: &FeatureVector) -> Result<PredictedOutcome, TwinError>;
}

/// Per-feature affine scaling `(x - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    /// Fits mean and standard deviation per column, skipping `None`.
    /// Constant or empty columns get scale 1.
    pub fn fit<'a>(columns: usize, rows: impl Iterator<Item = &'a [Option<f64>]>) -> Self {
        let mut sum = vec![0.0; columns];
        let mut sum_sq = vec![0.0; columns];
        let mut count = vec![0usize; columns];
        let rows: Vec<&[Option<f64>]> = rows.collect();
        for row in &rows {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    sum[j] += v;
                    count[j] += 1;
                }
            }
        }
        let mean: Vec<f64> = (0..columns)
            .map(|j| if count[j] > 0 { sum[j] / count[j] as f64 } else { 0.0 })
            .collect();
        for row in &rows {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    sum_sq[j] += (v - mean[j]) * (v - mean[j]);
                }
            }
        }
        let scale = (0..columns)
            .map(|j| {
                let sd = if count[j] > 1 { (sum_sq[j] / count[j] as f64).sqrt() } else { 0.0 };
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer { mean, scale }
    }

    pub fn normalize(&self, j: usize, x: f64) -> f64 {
        (x - self.mean[j]) / self.scale[j]
    }

    pub fn denormalize(&self, j: usize, z: f64) -> f64 {
        z * self.scale[j] + self.mean[j]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// Trained on pooled data from every patient.
    PooledPretrained,
    /// Initialized from a pooled model, then fine-tuned on one group.
    FineTuned { group: Group, pooled_parent: String },
    /// Trained on a single group's data from random initialization.
    Scratch { group: Group },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    /// Latest target date the model has been trained on.
    pub trained_through: Option<NaiveDate>,
    pub last_retrain: Option<NaiveDate>,
    /// Fingerprint of the model this one was derived from.
    pub parent: Option<String>,
}

/// A trained twin: network, normalization and provenance. Immutable once
/// built; training functions return new models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinModel {
    pub format_version: u32,
    pub feature_set_version: u32,
    pub network: Mlp,
    pub input_norm: Normalizer,
    /// Normalization of the encoded targets: glucose, weight change, ketone.
    pub output_norm: Normalizer,
    pub provenance: Provenance,
    pub meta: TrainingMeta,
}

impl TwinModel {
    pub fn hidden_sizes(&self) -> Vec<usize> {
        let sizes = self.network.sizes();
        sizes[1..sizes.len() - 1].to_vec()
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let sizes = self.network.sizes();
        if sizes.len() != 5 {
            return Err(TwinError::Invalid(format!("expected three hidden layers, got sizes {sizes:?}")));
        }
        if sizes[0] != FEATURE_COUNT || sizes[4] != OUTPUT_COUNT {
            return Err(TwinError::Invalid(format!("bad input/output widths {sizes:?}")));
        }
        if self.input_norm.mean.len() != FEATURE_COUNT || self.output_norm.mean.len() != OUTPUT_COUNT {
            return Err(TwinError::Invalid("normalizer width mismatch".into()));
        }
        Ok(())
    }

    /// Stable FNV-1a hash of the weights and normalization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        self.network.params().into_iter().for_each(&mut eat);
        for n in [&self.input_norm, &self.output_norm] {
            n.mean.iter().chain(&n.scale).copied().for_each(&mut eat);
        }
        format!("{h:016x}")
    }

    pub(crate) fn encode_inputs(&self, features: &FeatureVector) -> [f64; FEATURE_COUNT] {
        let mut x = features.to_array();
        for (j, v) in x.iter_mut().enumerate() {
            *v = self.input_norm.normalize(j, *v);
        }
        x
    }

    pub(crate) fn decode_outputs(&self, features: &FeatureVector, out: &[f64]) -> PredictedOutcome {
        let glucose = self.output_norm.denormalize(0, out[0]);
        let weight_change = self.output_norm.denormalize(1, out[1]);
        let ketone = self.output_norm.denormalize(2, out[2]);
        PredictedOutcome {
            glucose,
            weight: features.prev_weight + weight_change,
            ketone,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TwinError> {
        let model: TwinModel = serde_json::from_str(text).map_err(|e| TwinError::Invalid(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(TwinError::Invalid(format!("unsupported format version {}", model.format_version)));
        }
        model.validate()?;
        Ok(model)
    }
}

impl Predictor for TwinModel {
    fn predict(&self, features: &FeatureVector) -> Result<PredictedOutcome, TwinError> {
        features.check_finite()?;
        let mut out = [0.0; OUTPUT_COUNT];
        self.network.forward_into(&self.encode_inputs(features), &mut out);
        let outcome = self.decode_outputs(features, &out);
        if !(outcome.glucose.is_finite() && outcome.weight.is_finite() && outcome.ketone.is_finite()) {
            return Err(TwinError::Invalid("non-finite prediction".into()));
        }
        Ok(outcome)
    }
}

/// Encoded targets for one pair: glucose, weight change, ketone.
pub(crate) fn encode_targets(features: &FeatureVector, next: &[Option<f64>; OUTPUT_COUNT]) -> [Option<f64>; OUTPUT_COUNT] {
    [next[0], next[1].map(|w| w - features.to_array()[PREV_WEIGHT]), next[2]]
}

/// All model versions of one group, oldest first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinHistory {
    pub versions: Vec<TwinModel>,
}

impl TwinHistory {
    pub fn new(initial: TwinModel) -> Self {
        TwinHistory { versions: vec![initial] }
    }

    pub fn current(&self) -> Option<&TwinModel> {
        self.versions.last()
    }

    pub fn push(&mut self, model: TwinModel) {
        self.versions.push(model);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizer_round_trip() {
        let rows: Vec<Vec<Option<f64>>> = vec![
            vec![Some(1.0), Some(100.0)],
            vec![Some(3.0), None],
            vec![Some(5.0), Some(300.0)],
        ];
        let n = Normalizer::fit(2, rows.iter().map(|r| r.as_slice()));
        assert_eq!(n.mean, vec![3.0, 200.0]);
        for x in [-1e3, -2.5, 0.0, 1.0 / 3.0, 199.2, 1e4] {
            for j in 0..2 {
                assert!((n.denormalize(j, n.normalize(j, x)) - x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_column_gets_unit_scale() {
        let rows: Vec<Vec<Option<f64>>> = vec![vec![Some(2.0)], vec![Some(2.0)]];
        let n = Normalizer::fit(1, rows.iter().map(|r| r.as_slice()));
        assert_eq!(n.scale, vec![1.0]);
        assert_eq!(n.normalize(0, 2.0), 0.0);
    }

    #[test]
    fn feature_vector_array_round_trip() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        assert_eq!(FeatureVector::from_array(a).to_array(), a);
        let mut bad = FeatureVector::from_array(a);
        bad.steps = f64::NAN;
        assert!(matches!(bad.check_finite(), Err(TwinError::NonFinite("steps"))));
    }
}
