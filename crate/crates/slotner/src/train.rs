//! Training loop: per-turn Adam updates, a dev split carved from the
//! training data, early stopping on dev macro-F1, and best-checkpoint
//! restore. Everything is seeded, so identical configs give bitwise
//! identical parameters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_corpus, Corpus};
use crate::eval::evaluate;
use crate::numeric::Adam;
use crate::tagger::TaggerModel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Stop after this many consecutive epochs without a dev improvement.
    pub patience: usize,
    /// Fraction of the training corpus held out as the dev split, in (0,1).
    pub dev_fraction: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 30,
            learning_rate: 1e-3,
            patience: 3,
            dev_fraction: 0.1,
            seed: 42,
            shuffle_each_epoch: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_train_loss: f64,
    pub dev_macro_f1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters the returned model carries.
    pub best_epoch: usize,
    pub best_dev_macro_f1: f64,
}

fn validate(config: &TrainConfig) -> Result<()> {
    if config.max_epochs == 0 {
        return Err(Error::Config("max_epochs must be at least 1".into()));
    }
    if config.patience == 0 {
        return Err(Error::Config("patience must be at least 1".into()));
    }
    if !(config.dev_fraction > 0.0 && config.dev_fraction < 1.0) {
        return Err(Error::Config(format!(
            "dev_fraction must lie in (0,1), got {}",
            config.dev_fraction
        )));
    }
    if !config.learning_rate.is_finite() || config.learning_rate < 0.0 {
        return Err(Error::Config(format!(
            "learning_rate must be a non-negative number, got {}",
            config.learning_rate
        )));
    }
    Ok(())
}

/// Train in place, returning the per-epoch history. The model ends up with
/// the parameters of the best-dev epoch (ties keep the latest), never worse
/// on dev than anything observed during the run.
pub fn train(model: &mut TaggerModel, corpus: &Corpus, config: &TrainConfig) -> Result<TrainHistory> {
    validate(config)?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus is empty".into()));
    }
    if corpus.label_set != model.labels {
        return Err(Error::LabelSetMismatch(format!(
            "corpus labels {:?} differ from model labels {:?}",
            corpus.label_set.labels(),
            model.labels.labels()
        )));
    }
    let dev_count = ((corpus.len() as f64) * config.dev_fraction).round() as usize;
    if dev_count == 0 || dev_count >= corpus.len() {
        return Err(Error::Config(format!(
            "dev_fraction {} leaves an empty train or dev split for {} turns",
            config.dev_fraction,
            corpus.len()
        )));
    }
    let (train_half, dev_half) = split_corpus(corpus, corpus.len() - dev_count, config.seed)?;

    let trainable = model.trainable_tensors();
    let mut optimizer = Adam::new(
        trainable.iter().map(|(_, t)| t.clone()).collect(),
        config.learning_rate,
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    let mut history = Vec::new();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_snapshot = model.snapshot();
    let mut stale_epochs = 0;

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..train_half.len()).collect();
        if config.shuffle_each_epoch {
            order.shuffle(&mut shuffle_rng);
        }
        let mut loss_sum = 0.0;
        for &i in &order {
            optimizer.zero_grads();
            let loss = model.loss(&train_half.turns[i])?;
            loss_sum += loss.item();
            loss.backward()?;
            optimizer.step()?;
        }
        let dev_report = evaluate(model, &dev_half)?;
        history.push(EpochRecord {
            epoch,
            mean_train_loss: loss_sum / train_half.len() as f64,
            dev_macro_f1: dev_report.macro_f1,
        });

        if dev_report.macro_f1 >= best_f1 {
            if dev_report.macro_f1 > best_f1 {
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
            }
            best_f1 = dev_report.macro_f1;
            best_epoch = epoch;
            best_snapshot = model.snapshot();
        } else {
            stale_epochs += 1;
        }
        if stale_epochs >= config.patience {
            break;
        }
    }

    model.restore(&best_snapshot);
    Ok(TrainHistory {
        epochs: history,
        best_epoch,
        best_dev_macro_f1: best_f1,
    })
}
