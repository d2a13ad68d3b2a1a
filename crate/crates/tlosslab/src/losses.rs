//! Two-class per-pixel losses and their gradients.
//!
//! Every loss here is evaluated per pixel on a clipped foreground
//! probability p and a binary label y, writing p_y for the probability
//! assigned to the true class (p when y = 1, otherwise 1 - p). The
//! Student-t loss is per image, not per pixel; it lives in [`crate::tloss`]
//! and is rejected by the pixel-level entry points.

use crate::error::{Error, Result};
use crate::fastmath;
use crate::grid::{Grid, Mask};
use serde::{Deserialize, Serialize};

/// Probabilities are clipped into [CLIP, 1 - CLIP] before any logarithm.
pub const PROB_CLIP: f64 = 1e-7;

pub const DEFAULT_Q: f64 = 0.7;
pub const DEFAULT_CLAMP_A: f64 = -4.0;
pub const DEFAULT_SCE_ALPHA: f64 = 0.1;
pub const DEFAULT_SCE_BETA: f64 = 1.0;
pub const DEFAULT_APL_WEIGHT: f64 = 1.0;

/// Available loss families, including active/passive combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Mae,
    Ce,
    Rce,
    Gce,
    Nce,
    Ngce,
    Sce,
    NceRce,
    NgceMae,
    NgceRce,
    Tloss,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Mae => "mae",
            LossKind::Ce => "ce",
            LossKind::Rce => "rce",
            LossKind::Gce => "gce",
            LossKind::Nce => "nce",
            LossKind::Ngce => "ngce",
            LossKind::Sce => "sce",
            LossKind::NceRce => "nce_rce",
            LossKind::NgceMae => "ngce_mae",
            LossKind::NgceRce => "ngce_rce",
            LossKind::Tloss => "tloss",
        }
    }

    /// True for the per-image Student-t loss, which needs its own state.
    pub fn is_per_image(self) -> bool {
        self == LossKind::Tloss
    }

    pub fn all() -> [LossKind; 12] {
        [
            LossKind::Mse,
            LossKind::Mae,
            LossKind::Ce,
            LossKind::Rce,
            LossKind::Gce,
            LossKind::Nce,
            LossKind::Ngce,
            LossKind::Sce,
            LossKind::NceRce,
            LossKind::NgceMae,
            LossKind::NgceRce,
            LossKind::Tloss,
        ]
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::all()
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss kind {s:?}")))
    }
}

/// A loss choice plus every tunable the families share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Exponent of the generalized cross entropy families, in (0, 1].
    #[serde(default = "default_q")]
    pub q: f64,
    /// Stand-in for ln 0 in the reverse cross entropy; must be negative.
    #[serde(default = "default_clamp_a")]
    pub clamp_a: f64,
    /// Forward weight of the symmetric cross entropy.
    #[serde(default = "default_sce_alpha")]
    pub sce_alpha: f64,
    /// Reverse weight of the symmetric cross entropy.
    #[serde(default = "default_sce_beta")]
    pub sce_beta: f64,
    /// Weight of the active term in active/passive combinations.
    #[serde(default = "default_apl_weight")]
    pub apl_active_w: f64,
    /// Weight of the passive term in active/passive combinations.
    #[serde(default = "default_apl_weight")]
    pub apl_passive_w: f64,
}

fn default_q() -> f64 {
    DEFAULT_Q
}

fn default_clamp_a() -> f64 {
    DEFAULT_CLAMP_A
}

fn default_sce_alpha() -> f64 {
    DEFAULT_SCE_ALPHA
}

fn default_sce_beta() -> f64 {
    DEFAULT_SCE_BETA
}

fn default_apl_weight() -> f64 {
    DEFAULT_APL_WEIGHT
}

impl LossSpec {
    /// Spec with every tunable at its default.
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            q: DEFAULT_Q,
            clamp_a: DEFAULT_CLAMP_A,
            sce_alpha: DEFAULT_SCE_ALPHA,
            sce_beta: DEFAULT_SCE_BETA,
            apl_active_w: DEFAULT_APL_WEIGHT,
            apl_passive_w: DEFAULT_APL_WEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.q.is_finite() || self.q <= 0.0 || self.q > 1.0 {
            return Err(Error::Config(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if !self.clamp_a.is_finite() || self.clamp_a >= 0.0 {
            return Err(Error::Config(format!(
                "clamp_a must be negative, got {}",
                self.clamp_a
            )));
        }
        for (name, v) in [
            ("sce_alpha", self.sce_alpha),
            ("sce_beta", self.sce_beta),
            ("apl_active_w", self.apl_active_w),
            ("apl_passive_w", self.apl_passive_w),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Foreground probability clipped away from 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPrediction {
    p: f64,
}

impl PixelPrediction {
    /// Accepts probabilities in [0, 1] and clips them to [1e-7, 1 - 1e-7].
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")));
        }
        Ok(Self {
            p: p.clamp(PROB_CLIP, 1.0 - PROB_CLIP),
        })
    }

    pub fn prob(self) -> f64 {
        self.p
    }
}

/// Loss of one pixel.
pub fn pixel_loss(spec: &LossSpec, pred: PixelPrediction, label: u8) -> Result<f64> {
    Ok(pixel_loss_and_grad(spec, pred, label)?.0)
}

/// Gradient of one pixel's loss with respect to the (clipped) probability.
pub fn pixel_loss_grad(spec: &LossSpec, pred: PixelPrediction, label: u8) -> Result<f64> {
    Ok(pixel_loss_and_grad(spec, pred, label)?.1)
}

/// (loss, dloss/dp) of one pixel, sharing the intermediate terms.
pub fn pixel_loss_and_grad(spec: &LossSpec, pred: PixelPrediction, label: u8) -> Result<(f64, f64)> {
    spec.validate()?;
    check_label(label)?;
    if spec.kind.is_per_image() {
        return Err(Error::Config(
            "the Student-t loss is per image; evaluate it on a residual instead".into(),
        ));
    }
    Ok(eval(spec, pred.p, label))
}

/// Mean pixel loss over one image.
pub fn mask_loss(spec: &LossSpec, probs: &Grid, labels: &Mask) -> Result<f64> {
    check_mask_args(spec, probs, labels)?;
    let n = probs.data().len() as f64;
    let mut acc = 0.0;
    for (&p, &y) in probs.data().iter().zip(labels.bits()) {
        acc += eval(spec, clip(p)?, y).0;
    }
    Ok(acc / n)
}

/// Mean pixel loss over one image plus its gradient (already divided by the
/// pixel count) written into `d_p`, one slot per pixel.
pub fn mask_loss_and_grad(
    spec: &LossSpec,
    probs: &Grid,
    labels: &Mask,
    d_p: &mut [f64],
) -> Result<f64> {
    check_mask_args(spec, probs, labels)?;
    slice_loss_and_grad(spec, probs.data(), labels.bits(), d_p)
}

/// Slice-level core of [`mask_loss_and_grad`]; `spec` must already be
/// validated and per-pixel (the trainer hot loop relies on this shape).
pub(crate) fn slice_loss_and_grad(
    spec: &LossSpec,
    probs: &[f64],
    labels: &[u8],
    d_p: &mut [f64],
) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Empty("probability slice"));
    }
    if labels.len() != probs.len() || d_p.len() != probs.len() {
        return Err(Error::Shape(format!(
            "{} probabilities, {} labels, {} gradient slots",
            probs.len(),
            labels.len(),
            d_p.len()
        )));
    }
    let inv_n = 1.0 / probs.len() as f64;
    let mut acc = 0.0;
    for ((&p, &y), slot) in probs.iter().zip(labels).zip(d_p) {
        let (v, g) = eval(spec, clip(p)?, y);
        acc += v;
        *slot = g * inv_n;
    }
    Ok(acc * inv_n)
}

fn check_mask_args(spec: &LossSpec, probs: &Grid, labels: &Mask) -> Result<()> {
    spec.validate()?;
    if spec.kind.is_per_image() {
        return Err(Error::Config(
            "the Student-t loss is per image; evaluate it on a residual instead".into(),
        ));
    }
    if probs.width() != labels.width() || probs.height() != labels.height() {
        return Err(Error::Shape(format!(
            "probabilities are {}x{} but labels are {}x{}",
            probs.width(),
            probs.height(),
            labels.width(),
            labels.height()
        )));
    }
    Ok(())
}

fn check_label(label: u8) -> Result<()> {
    if label > 1 {
        return Err(Error::Domain(format!("label must be 0 or 1, got {label}")));
    }
    Ok(())
}

fn clip(p: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(p.clamp(PROB_CLIP, 1.0 - PROB_CLIP))
}

/// Dispatch on a validated spec; p must already be clipped.
fn eval(spec: &LossSpec, p: f64, y: u8) -> (f64, f64) {
    match spec.kind {
        LossKind::Mse => mse(p, y),
        LossKind::Mae => mae(p, y),
        LossKind::Ce => ce(p, y),
        LossKind::Rce => rce(p, y, spec.clamp_a),
        LossKind::Gce => gce(p, y, spec.q),
        LossKind::Nce => nce(p, y),
        LossKind::Ngce => ngce(p, y, spec.q),
        LossKind::Sce => combine(
            ce(p, y),
            rce(p, y, spec.clamp_a),
            spec.sce_alpha,
            spec.sce_beta,
        ),
        LossKind::NceRce => combine(
            nce(p, y),
            rce(p, y, spec.clamp_a),
            spec.apl_active_w,
            spec.apl_passive_w,
        ),
        LossKind::NgceMae => combine(
            ngce(p, y, spec.q),
            mae(p, y),
            spec.apl_active_w,
            spec.apl_passive_w,
        ),
        LossKind::NgceRce => combine(
            ngce(p, y, spec.q),
            rce(p, y, spec.clamp_a),
            spec.apl_active_w,
            spec.apl_passive_w,
        ),
        LossKind::Tloss => unreachable!("per-image loss rejected before dispatch"),
    }
}

fn combine(a: (f64, f64), b: (f64, f64), wa: f64, wb: f64) -> (f64, f64) {
    (wa * a.0 + wb * b.0, wa * a.1 + wb * b.1)
}

/// Probability of the true class and its derivative sign: dp_y/dp.
fn true_class(p: f64, y: u8) -> (f64, f64) {
    if y == 1 {
        (p, 1.0)
    } else {
        (1.0 - p, -1.0)
    }
}

fn mse(p: f64, y: u8) -> (f64, f64) {
    let r = f64::from(y) - p;
    (2.0 * r * r, -4.0 * r)
}

fn mae(p: f64, y: u8) -> (f64, f64) {
    let (py, s) = true_class(p, y);
    (2.0 * (1.0 - py), -2.0 * s)
}

fn ce(p: f64, y: u8) -> (f64, f64) {
    let (py, s) = true_class(p, y);
    (-fastmath::ln(py), -s / py)
}

fn rce(p: f64, y: u8, clamp_a: f64) -> (f64, f64) {
    let (py, s) = true_class(p, y);
    (-clamp_a * (1.0 - py), clamp_a * s)
}

fn gce(p: f64, y: u8, q: f64) -> (f64, f64) {
    let (py, s) = true_class(p, y);
    let pq = fastmath::pow(py, q);
    ((1.0 - pq) / q, -s * pq / py)
}

fn nce(p: f64, y: u8) -> (f64, f64) {
    let (py, s) = true_class(p, y);
    let po = 1.0 - py;
    let a = fastmath::ln(py);
    let b = fastmath::ln(po);
    let t = a + b;
    (a / t, s * (b / py + a / po) / (t * t))
}

fn ngce(p: f64, y: u8, q: f64) -> (f64, f64) {
    let (py, s) = true_class(p, y);
    let pyq = fastmath::pow(py, q);
    let pq = fastmath::pow(p, q);
    let oq = fastmath::pow(1.0 - p, q);
    let num = 1.0 - pyq;
    let den = 2.0 - pq - oq;
    let dnum = -s * q * pyq / py;
    let dden = -q * pq / p + q * oq / (1.0 - p);
    (num / den, (dnum * den - num * dden) / (den * den))
}
