//! Minibatch Adam training of the per-pixel MLP under any supported loss.
//!
//! Every epoch shuffles the train split, walks it in minibatches (batch loss
//! is the mean of per-image losses), and takes one Adam step per batch. When
//! the loss is the per-image Student-t one, its degrees-of-freedom parameter
//! gets its own Adam moments and is updated jointly from the same batches.
//!
//! Train metrics are accumulated from the training forward passes as the
//! epoch progresses (so they see the weights of the moment, like the running
//! metrics of common training loops); test dice is evaluated once at each
//! epoch's end.

use crate::adam::{AdamParams, AdamState};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::losses::{self, LossKind, LossSpec};
use crate::metrics;
use crate::model::{Features, MlpGrads, MlpModel, Workspace, DEFAULT_HIDDEN_DIM};
use crate::seed;
use crate::tloss::{self, Residual, TLossState};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH_SIZE: usize = 16;

/// Everything that defines one training run except the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossSpec,
    /// Seeds model init and epoch shuffling (distinct derived streams).
    pub seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    /// Start value of the log-degrees-of-freedom parameter.
    #[serde(default)]
    pub nu_tilde_init: f64,
    /// Binarization threshold for all dice metrics.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_lr() -> f64 {
    AdamParams::default().lr
}

fn default_beta1() -> f64 {
    AdamParams::default().beta1
}

fn default_beta2() -> f64 {
    AdamParams::default().beta2
}

fn default_adam_eps() -> f64 {
    AdamParams::default().eps
}

fn default_hidden_dim() -> usize {
    DEFAULT_HIDDEN_DIM
}

fn default_threshold() -> f64 {
    metrics::DEFAULT_THRESHOLD
}

impl TrainConfig {
    /// Config with defaults everywhere but the loss and the seed.
    pub fn new(loss: LossSpec, seed: u64) -> Self {
        Self {
            loss,
            seed,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            lr: AdamParams::default().lr,
            adam_beta1: AdamParams::default().beta1,
            adam_beta2: AdamParams::default().beta2,
            adam_eps: AdamParams::default().eps,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            nu_tilde_init: 0.0,
            threshold: metrics::DEFAULT_THRESHOLD,
        }
    }

    pub fn adam_params(&self) -> AdamParams {
        AdamParams {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.adam_params().validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if !self.nu_tilde_init.is_finite() {
            return Err(Error::Config(format!(
                "nu_tilde_init must be finite, got {}",
                self.nu_tilde_init
            )));
        }
        if !self.threshold.is_finite() || self.threshold <= 0.0 || self.threshold >= 1.0 {
            return Err(Error::Config(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Metrics of one epoch, recorded at its end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
    /// Mean train dice against the clean ground truth, accumulated from the
    /// training forward passes.
    pub train_dice_clean: f64,
    /// Same, against the (possibly corrupted) training labels.
    pub train_dice_noisy: f64,
    /// Mean test dice against clean ground truth at the epoch's end.
    pub test_dice: f64,
    /// Log-degrees-of-freedom after the epoch's updates.
    pub nu_tilde: f64,
}

/// Per-epoch history of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn test_dice_series(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.test_dice).collect()
    }

    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Result of [`train`]: final weights, final Student-t state, and the trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub tloss: TLossState,
    pub trace: TrainTrace,
}

/// Final model weights plus the Student-t state, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: MlpModel,
    pub nu_tilde: f64,
    pub epochs_trained: usize,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, checkpoint)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path)?;
    let checkpoint: Checkpoint = serde_json::from_reader(file)?;
    checkpoint.model.validate()?;
    if !checkpoint.nu_tilde.is_finite() {
        return Err(Error::Format("checkpoint nu_tilde is not finite".into()));
    }
    Ok(checkpoint)
}

fn validate_dataset(data: &Dataset) -> Result<()> {
    if data.train.is_empty() {
        return Err(Error::Empty("train split"));
    }
    if data.test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    for (split, samples) in [("train", &data.train), ("test", &data.test)] {
        for (i, s) in samples.iter().enumerate() {
            let ok = s.image.width() == data.side
                && s.image.height() == data.side
                && s.clean_mask.width() == data.side
                && s.clean_mask.height() == data.side
                && s.train_mask.width() == data.side
                && s.train_mask.height() == data.side;
            if !ok {
                return Err(Error::Shape(format!(
                    "{split} sample {i} does not match the dataset side {}",
                    data.side
                )));
            }
            if s.image.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{split} sample {i} contains non-finite intensities"
                )));
            }
        }
    }
    Ok(())
}

fn ensure_finite_loss(
    loss: f64,
    epoch: usize,
    batch: usize,
    theta: &[f64],
    nu_tilde: f64,
) -> Result<()> {
    if loss.is_finite() {
        return Ok(());
    }
    let weight_norm = theta.iter().map(|w| w * w).sum::<f64>().sqrt();
    Err(Error::NonFiniteLoss {
        epoch,
        batch,
        weight_norm,
        nu_tilde,
    })
}

/// Trains a fresh model on the dataset's train split (against its possibly
/// corrupted `train_mask` labels) and scores test dice against clean ground
/// truth each epoch.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    validate_dataset(data)?;
    let n_pixels = data.side * data.side;
    let is_tloss = cfg.loss.kind == LossKind::Tloss;

    let train_feats: Vec<Features> =
        data.train.iter().map(|s| Features::from_image(&s.image)).collect();
    let test_feats: Vec<Features> =
        data.test.iter().map(|s| Features::from_image(&s.image)).collect();

    let mut init_rng = seed::stream(&[cfg.seed, seed::tag("init")]);
    let mut shuffle_rng = seed::stream(&[cfg.seed, seed::tag("shuffle")]);
    let mut model = MlpModel::init(cfg.hidden_dim, &mut init_rng)?;
    let mut state = TLossState::with_nu_tilde(cfg.nu_tilde_init, n_pixels)?;

    let adam_params = cfg.adam_params();
    let mut theta = model.params_flat();
    let mut adam_w = AdamState::new(theta.len());
    let mut adam_nu = AdamState::new(1);

    let mut ws = Workspace::new();
    let mut d_p = vec![0.0; n_pixels];
    let mut img_grads = MlpGrads::zeros(cfg.hidden_dim);
    let mut batch_grads = MlpGrads::zeros(cfg.hidden_dim);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut trace = TrainTrace::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        let mut dice_clean_sum = 0.0;
        let mut dice_noisy_sum = 0.0;

        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let inv = 1.0 / chunk.len() as f64;
            batch_grads.reset();
            let mut d_nu_tilde = 0.0;
            let mut batch_loss = 0.0;

            for &i in chunk {
                let sample = &data.train[i];
                model.forward(&train_feats[i], &mut ws);

                if is_tloss {
                    let residual = Residual::from_label_probs(&sample.train_mask, &ws.probs)?;
                    batch_loss += tloss::value(&state, &residual)? * inv;
                    let g = tloss::grad(&state, &residual)?;
                    for (slot, d) in d_p.iter_mut().zip(&g.d_prediction) {
                        *slot = d * inv;
                    }
                    d_nu_tilde += g.d_nu_tilde * inv;
                } else {
                    let img_loss = losses::slice_loss_and_grad(
                        &cfg.loss,
                        &ws.probs,
                        sample.train_mask.bits(),
                        &mut d_p,
                    )?;
                    batch_loss += img_loss * inv;
                    for slot in d_p.iter_mut() {
                        *slot *= inv;
                    }
                }

                model.backward(&train_feats[i], &mut ws, &d_p, &mut img_grads)?;
                batch_grads.add_assign(&img_grads)?;

                dice_clean_sum +=
                    metrics::dice_of_probs(&ws.probs, cfg.threshold, &sample.clean_mask)?.value();
                dice_noisy_sum +=
                    metrics::dice_of_probs(&ws.probs, cfg.threshold, &sample.train_mask)?.value();
            }

            ensure_finite_loss(batch_loss, epoch, batch_idx, &theta, state.nu_tilde())?;
            loss_sum += batch_loss;
            n_batches += 1;

            adam_w.step(&adam_params, &mut theta, &batch_grads.flat())?;
            model.set_params_flat(&theta)?;
            if is_tloss {
                let mut nt = [state.nu_tilde()];
                adam_nu.step(&adam_params, &mut nt, &[d_nu_tilde])?;
                state.set_nu_tilde(nt[0])?;
            }
        }

        let mut test_dice_sum = 0.0;
        for (feats, sample) in test_feats.iter().zip(&data.test) {
            model.forward(feats, &mut ws);
            test_dice_sum +=
                metrics::dice_of_probs(&ws.probs, cfg.threshold, &sample.clean_mask)?.value();
        }

        trace.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            train_dice_clean: dice_clean_sum / data.train.len() as f64,
            train_dice_noisy: dice_noisy_sum / data.train.len() as f64,
            test_dice: test_dice_sum / data.test.len() as f64,
            nu_tilde: state.nu_tilde(),
        });
    }

    Ok(TrainOutcome {
        model,
        tloss: state,
        trace,
    })
}
