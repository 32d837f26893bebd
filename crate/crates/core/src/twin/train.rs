use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Mlp, Sample};
use super::{
    encode_targets, FeatureVector, Normalizer, Provenance, TrainingMeta, TwinError, TwinModel, FEATURE_COUNT,
    FEATURE_SET_VERSION, MODEL_FORMAT_VERSION, OUTPUT_COUNT,
};
use crate::data::{DailyRecord, Field, Group};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: [usize; 3],
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of pairs held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn pretrain() -> Self {
        TrainConfig {
            hidden: [32, 32, 16],
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            max_epochs: 2000,
            patience: 100,
            validation_fraction: 0.2,
            seed: 17,
        }
    }

    pub fn finetune() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            ..Self::pretrain()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinConfig {
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    /// Used for the weekly continuation; a week is too short for a validation split.
    pub retrain: TrainConfig,
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig {
            pretrain: TrainConfig::pretrain(),
            finetune: TrainConfig::finetune(),
            retrain: TrainConfig {
                max_epochs: 200,
                validation_fraction: 0.0,
                ..TrainConfig::finetune()
            },
        }
    }
}

/// Day `t` features paired with day `t + 1` glucose, weight and ketone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub patient_id: String,
    pub feature_date: NaiveDate,
    pub target_date: NaiveDate,
    pub features: FeatureVector,
    /// Next-day glucose, weight, ketone; `None` is masked out of the loss.
    pub next: [Option<f64>; OUTPUT_COUNT],
}

/// Builds every consecutive-day pair whose feature day is complete. Ketone
/// targets that were imputed are masked; glucose and weight are kept.
pub fn training_pairs(patient_id: &str, records: &[DailyRecord]) -> Vec<TrainingPair> {
    records
        .windows(2)
        .filter(|w| (w[1].date - w[0].date).num_days() == 1)
        .filter_map(|w| {
            let features = FeatureVector::from_record(&w[0]).ok()?;
            features.check_finite().ok()?;
            let next = [
                w[1].glucose,
                w[1].weight,
                w[1].ketone.filter(|_| w[1].is_observed(Field::Ketone)),
            ];
            if next.iter().all(Option::is_none) {
                return None;
            }
            Some(TrainingPair {
                patient_id: patient_id.to_string(),
                feature_date: w[0].date,
                target_date: w[1].date,
                features,
                next,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub pairs: usize,
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub initial_validation_loss: Option<f64>,
    pub best_validation_loss: Option<f64>,
}

/// Inclusive range of target dates a weekly retrain may consume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl RetrainWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

/// Canonical order, then a seeded shuffle; the result does not depend on
/// how the caller stored the pairs.
fn shuffled(pairs: &[TrainingPair], rng: &mut ChaCha8Rng) -> Vec<TrainingPair> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        (a.patient_id.as_str(), a.target_date).cmp(&(b.patient_id.as_str(), b.target_date))
    });
    sorted.shuffle(rng);
    sorted
}

fn split(pairs: Vec<TrainingPair>, fraction: f64) -> (Vec<TrainingPair>, Vec<TrainingPair>) {
    let n = pairs.len();
    let n_val = (fraction * n as f64).round() as usize;
    if fraction <= 0.0 || n_val == 0 || n_val >= n {
        return (pairs, Vec::new());
    }
    let mut train = pairs;
    let val = train.drain(..n_val).collect();
    (train, val)
}

fn fit_normalizers(pairs: &[TrainingPair]) -> (Normalizer, Normalizer) {
    let inputs: Vec<Vec<Option<f64>>> = pairs
        .iter()
        .map(|p| p.features.to_array().iter().map(|v| Some(*v)).collect())
        .collect();
    let outputs: Vec<Vec<Option<f64>>> = pairs
        .iter()
        .map(|p| encode_targets(&p.features, &p.next).to_vec())
        .collect();
    (
        Normalizer::fit(FEATURE_COUNT, inputs.iter().map(|r| r.as_slice())),
        Normalizer::fit(OUTPUT_COUNT, outputs.iter().map(|r| r.as_slice())),
    )
}

fn to_samples(pairs: &[TrainingPair], input_norm: &Normalizer, output_norm: &Normalizer) -> Vec<Sample> {
    pairs
        .iter()
        .map(|p| {
            let x = p
                .features
                .to_array()
                .iter()
                .enumerate()
                .map(|(j, v)| input_norm.normalize(j, *v))
                .collect();
            let encoded = encode_targets(&p.features, &p.next);
            let y = encoded
                .iter()
                .enumerate()
                .map(|(k, v)| v.map(|v| output_norm.normalize(k, v)).unwrap_or(0.0))
                .collect();
            let mask = encoded.iter().map(Option::is_some).collect();
            Sample { x, y, mask }
        })
        .collect()
}

/// Mini-batch gradient descent with momentum and optional early stopping.
/// Returns the best network seen (by validation loss when a validation set
/// exists, otherwise the last one).
fn fit(
    mut network: Mlp,
    train: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Mlp, TrainingReport), TwinError> {
    let initial_train_loss = network.loss(train);
    let initial_validation_loss = (!validation.is_empty()).then(|| network.loss(validation));
    let mut best = network.clone();
    let mut best_val = initial_validation_loss;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut velocity = vec![0.0; network.param_count()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch_size = config.batch_size.max(1);
    let mut epochs_run = 0;
    let mut batch = Vec::with_capacity(batch_size);

    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (loss, grad) = network.loss_and_gradient(&batch);
            epoch_loss += loss * chunk.len() as f64;
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * g;
            }
            network.add_to_params(&velocity);
        }
        epochs_run = epoch;
        if !epoch_loss.is_finite() || network.params().iter().any(|p| !p.is_finite()) {
            return Err(TwinError::Diverged { epoch });
        }
        if let Some(best_so_far) = best_val {
            let val = network.loss(validation);
            if !val.is_finite() {
                return Err(TwinError::Diverged { epoch });
            }
            if val < best_so_far {
                best_val = Some(val);
                best = network.clone();
                best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
    }
    if best_val.is_none() {
        best = network;
        best_epoch = epochs_run;
    }
    let report = TrainingReport {
        pairs: train.len() + validation.len(),
        train_pairs: train.len(),
        validation_pairs: validation.len(),
        epochs_run,
        best_epoch,
        initial_train_loss,
        final_train_loss: best.loss(train),
        initial_validation_loss,
        best_validation_loss: best_val,
    };
    Ok((best, report))
}

fn train_new(
    pairs: &[TrainingPair],
    config: &TrainConfig,
    provenance: Provenance,
) -> Result<(TwinModel, TrainingReport), TwinError> {
    if pairs.is_empty() {
        return Err(TwinError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train_pairs, val_pairs) = split(shuffled(pairs, &mut rng), config.validation_fraction);
    let (input_norm, output_norm) = fit_normalizers(&train_pairs);
    let train = to_samples(&train_pairs, &input_norm, &output_norm);
    let validation = to_samples(&val_pairs, &input_norm, &output_norm);

    let mut sizes = vec![FEATURE_COUNT];
    sizes.extend(config.hidden);
    sizes.push(OUTPUT_COUNT);
    let network = Mlp::new(&sizes, &mut rng);
    let (network, report) = fit(network, &train, &validation, config, &mut rng)?;

    let model = TwinModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_set_version: FEATURE_SET_VERSION,
        network,
        input_norm,
        output_norm,
        provenance,
        meta: TrainingMeta {
            epochs: report.epochs_run,
            seed: config.seed,
            trained_through: pairs.iter().map(|p| p.target_date).max(),
            last_retrain: None,
            parent: None,
        },
    };
    Ok((model, report))
}

/// Pre-trains on pairs pooled from every patient.
pub fn pretrain(pairs: &[TrainingPair], config: &TrainConfig) -> Result<(TwinModel, TrainingReport), TwinError> {
    train_new(pairs, config, Provenance::PooledPretrained)
}

/// Trains a group model from random initialization; the no-transfer baseline.
pub fn train_from_scratch(
    group: Group,
    pairs: &[TrainingPair],
    config: &TrainConfig,
) -> Result<(TwinModel, TrainingReport), TwinError> {
    train_new(pairs, config, Provenance::Scratch { group })
}

/// Continues training `base` on `pairs`, keeping its normalization. The
/// result never fits `pairs` worse than `base` does.
fn continue_training(
    base: &TwinModel,
    pairs: &[TrainingPair],
    config: &TrainConfig,
) -> Result<(Mlp, TrainingReport), TwinError> {
    if base.hidden_sizes() != config.hidden {
        return Err(TwinError::Incompatible {
            model: base.hidden_sizes(),
            config: config.hidden.to_vec(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train_pairs, val_pairs) = split(shuffled(pairs, &mut rng), config.validation_fraction);
    let train = to_samples(&train_pairs, &base.input_norm, &base.output_norm);
    let validation = to_samples(&val_pairs, &base.input_norm, &base.output_norm);
    let (network, mut report) = fit(base.network.clone(), &train, &validation, config, &mut rng)?;

    let all: Vec<Sample> = train.iter().chain(&validation).cloned().collect();
    if network.loss(&all) > base.network.loss(&all) {
        report.final_train_loss = report.initial_train_loss;
        report.best_epoch = 0;
        return Ok((base.network.clone(), report));
    }
    Ok((network, report))
}

/// Fine-tunes a pooled (or already fine-tuned) model on one group's pairs.
pub fn finetune(
    pretrained: &TwinModel,
    group: Group,
    pairs: &[TrainingPair],
    config: &TrainConfig,
) -> Result<(TwinModel, TrainingReport), TwinError> {
    if pairs.is_empty() {
        return Err(TwinError::EmptyDataset);
    }
    let pooled_parent = match &pretrained.provenance {
        Provenance::FineTuned { pooled_parent, .. } => pooled_parent.clone(),
        _ => pretrained.fingerprint(),
    };
    let (network, report) = continue_training(pretrained, pairs, config)?;
    let trained_through = pairs.iter().map(|p| p.target_date).chain(pretrained.meta.trained_through).max();
    let model = TwinModel {
        network,
        provenance: Provenance::FineTuned { group, pooled_parent },
        meta: TrainingMeta {
            epochs: report.epochs_run,
            seed: config.seed,
            trained_through,
            last_retrain: pretrained.meta.last_retrain,
            parent: Some(pretrained.fingerprint()),
        },
        ..pretrained.clone()
    };
    Ok((model, report))
}

/// Fine-tuned continuation on one new week. Every pair's target date must lie
/// inside `window`, and the window must start after everything the model
/// has already seen.
pub fn weekly_retrain(
    model: &TwinModel,
    pairs: &[TrainingPair],
    window: RetrainWindow,
    config: &TrainConfig,
) -> Result<(TwinModel, TrainingReport), TwinError> {
    let span = (window.end - window.start).num_days();
    if !(0..7).contains(&span) {
        return Err(TwinError::Window(format!(
            "{}..={} spans {} days, expected 1 to 7",
            window.start,
            window.end,
            span + 1
        )));
    }
    if let Some(trained_through) = model.meta.trained_through {
        if window.start <= trained_through {
            return Err(TwinError::Overlap {
                start: window.start,
                end: window.end,
                trained_through,
            });
        }
    }
    if let Some(p) = pairs.iter().find(|p| !window.contains(p.target_date)) {
        return Err(TwinError::Window(format!(
            "pair targeting {} lies outside {}..={}",
            p.target_date, window.start, window.end
        )));
    }

    let mut next = model.clone();
    next.meta.trained_through = Some(window.end);
    next.meta.last_retrain = Some(window.end);
    next.meta.parent = Some(model.fingerprint());
    if pairs.is_empty() {
        next.meta.epochs = 0;
        let report = TrainingReport {
            pairs: 0,
            train_pairs: 0,
            validation_pairs: 0,
            epochs_run: 0,
            best_epoch: 0,
            initial_train_loss: 0.0,
            final_train_loss: 0.0,
            initial_validation_loss: None,
            best_validation_loss: None,
        };
        return Ok((next, report));
    }
    let (network, report) = continue_training(model, pairs, config)?;
    next.network = network;
    next.meta.epochs = report.epochs_run;
    next.meta.seed = config.seed;
    Ok((next, report))
}
