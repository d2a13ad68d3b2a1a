//! JSON config files for the command-line tool, with field-path errors.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tlosslab::datagen::DatasetConfig;
use tlosslab::losses::LossSpec;
use tlosslab::trainer::TrainConfig;
use tlosslab::{Error, Result};

/// Training hyperparameters shared by every sweep cell. The cell supplies
/// the loss and the seed, so those two [`TrainConfig`] fields live outside
/// this struct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub hidden_dim: usize,
    pub nu_tilde_init: f64,
    pub threshold: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::new(LossSpec::new(tlosslab::losses::LossKind::Mse), 0);
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
            adam_beta1: d.adam_beta1,
            adam_beta2: d.adam_beta2,
            adam_eps: d.adam_eps,
            hidden_dim: d.hidden_dim,
            nu_tilde_init: d.nu_tilde_init,
            threshold: d.threshold,
        }
    }
}

impl TrainSettings {
    /// Combines these settings with a cell's loss and seed.
    pub fn to_train_config(self, loss: LossSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            loss,
            seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            hidden_dim: self.hidden_dim,
            nu_tilde_init: self.nu_tilde_init,
            threshold: self.threshold,
        }
    }
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.3, 0.5, 0.7]
}

fn default_betas() -> Vec<f64> {
    vec![0.5, 0.7]
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

/// Full experiment grid: losses x noise levels x seeds on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub losses: Vec<LossSpec>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub train: TrainSettings,
    pub out_dir: PathBuf,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.losses.is_empty() {
            return Err(Error::Config("losses must not be empty".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("alphas must not be empty".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::Config("betas must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        for spec in &self.losses {
            spec.validate()?;
        }
        for &a in &self.alphas {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
            }
        }
        for &b in &self.betas {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::Config(format!("beta {b} outside [0, 1]")));
            }
        }
        self.dataset.validate()?;
        self.train
            .to_train_config(self.losses[0], self.seeds[0])
            .validate()?;
        Ok(())
    }

    /// Number of runs: alpha = 0 is a single no-noise cell per loss and
    /// seed, every positive alpha is crossed with every beta.
    pub fn n_cells(&self) -> usize {
        let has_zero = self.alphas.iter().any(|&a| a == 0.0) as usize;
        let positive = self.alphas.iter().filter(|&&a| a > 0.0).count();
        self.losses.len() * self.seeds.len() * (has_zero + positive * self.betas.len())
    }
}

/// Config of the `inject-noise` subcommand: which dataset directory to read
/// and how to corrupt its training labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectNoiseConfig {
    pub data_dir: PathBuf,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl InjectNoiseConfig {
    pub fn noise_config(&self) -> tlosslab::noise::NoiseConfig {
        tlosslab::noise::NoiseConfig {
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
        }
    }
}

/// Parses a JSON config file, reporting errors with the path of the
/// offending field (for example `dataset.side: invalid type ...`).
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        Error::Config(format!("{}: {}: {}", path.display(), e.path(), e.inner()))
    })
}
