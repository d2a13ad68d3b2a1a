//! Robust-loss toolkit for binary segmentation under label noise.
//!
//! The centerpiece is a per-image Student-t negative log-likelihood whose
//! degrees-of-freedom parameter is optimized jointly with the model weights
//! ([`tloss`]), next to a family of per-pixel baseline losses ([`losses`]),
//! a morphological label-noise injector ([`noise`]), a synthetic ellipse
//! dataset generator ([`datagen`]), and a small gradient-checked MLP
//! segmentation trainer ([`trainer`]).

mod fastmath;

pub mod adam;
pub mod datagen;
pub mod error;
pub mod gradcheck;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod seed;
pub mod special;
pub mod tloss;
pub mod trainer;

pub use error::{Error, Result};
pub use grid::{Grid, Mask};
pub use losses::{LossKind, LossSpec, PixelPrediction};
pub use metrics::{DiceScore, SummaryStat};
pub use tloss::{Residual, TLossGrad, TLossState};
pub use trainer::{TrainConfig, TrainTrace};
