//! Per-image Student-t negative log-likelihood with learned degrees of freedom.
//!
//! For one image with per-pixel residual vector r (label minus prediction,
//! dimension D) and squared norm δ² = ‖r‖², the loss is
//!
//! ```text
//! L(ν) = −ln Γ((ν+D)/2) + ln Γ(ν/2) + (D/2) ln(πν) + ((ν+D)/2) ln(1 + δ²/ν)
//! ```
//!
//! ν is kept positive through ν = e^ν̃ + ε and the optimizer works on ν̃.
//! A dataset loss is the arithmetic mean of the per-image values.

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::special;

/// Default offset keeping ν strictly positive.
pub const NU_EPSILON: f64 = 1e-8;

/// Ceiling applied to e^ν̃ so extreme ν̃ cannot overflow downstream math.
pub const NU_MAX: f64 = 1e12;

/// Degrees-of-freedom state shared by every image of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TLossState {
    nu_tilde: f64,
    epsilon: f64,
    dim: usize,
}

impl TLossState {
    /// State with ν̃ = 0 (ν ≈ 1) for images of `dim` pixels.
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_nu_tilde(0.0, dim)
    }

    pub fn with_nu_tilde(nu_tilde: f64, dim: usize) -> Result<Self> {
        Self::with_parts(nu_tilde, NU_EPSILON, dim)
    }

    pub fn with_parts(nu_tilde: f64, epsilon: f64, dim: usize) -> Result<Self> {
        if !nu_tilde.is_finite() {
            return Err(Error::Domain(format!("nu_tilde must be finite, got {nu_tilde}")));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if dim == 0 {
            return Err(Error::Domain("residual dimension must be at least 1".into()));
        }
        Ok(Self {
            nu_tilde,
            epsilon,
            dim,
        })
    }

    pub fn nu_tilde(&self) -> f64 {
        self.nu_tilde
    }

    pub fn set_nu_tilde(&mut self, nu_tilde: f64) -> Result<()> {
        if !nu_tilde.is_finite() {
            return Err(Error::Domain(format!("nu_tilde must be finite, got {nu_tilde}")));
        }
        self.nu_tilde = nu_tilde;
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Derived degrees of freedom ν = min(e^ν̃, NU_MAX) + ε, always positive.
    pub fn nu(&self) -> f64 {
        let e = self.nu_tilde.exp();
        e.min(NU_MAX) + self.epsilon
    }

    /// (ν, dν/dν̃); the derivative is zero where the e^ν̃ ceiling is active.
    fn nu_and_chain(&self) -> (f64, f64) {
        let e = self.nu_tilde.exp();
        if e >= NU_MAX {
            (NU_MAX + self.epsilon, 0.0)
        } else {
            (e + self.epsilon, e)
        }
    }
}

/// Per-image residual vector with its cached squared norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    per_pixel: Vec<f64>,
    delta_sq: f64,
}

impl Residual {
    /// Wraps per-pixel residuals (label minus prediction) and caches δ².
    pub fn new(per_pixel: Vec<f64>) -> Result<Self> {
        if per_pixel.is_empty() {
            return Err(Error::Empty("residual vector"));
        }
        if let Some(bad) = per_pixel.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("residual entry {bad} is not finite")));
        }
        let delta_sq = sum_of_squares(&per_pixel);
        if !delta_sq.is_finite() {
            return Err(Error::Domain("squared residual norm overflows".into()));
        }
        Ok(Self {
            per_pixel,
            delta_sq,
        })
    }

    /// Residual `label - prediction` over a full image.
    pub fn between(labels: &Mask, predictions: &Grid) -> Result<Self> {
        if labels.width() != predictions.width() || labels.height() != predictions.height() {
            return Err(Error::Shape(format!(
                "labels are {}x{} but predictions are {}x{}",
                labels.width(),
                labels.height(),
                predictions.width(),
                predictions.height()
            )));
        }
        Self::from_label_probs(labels, predictions.data())
    }

    /// Residual `label - probability` from a raw probability slice.
    pub fn from_label_probs(labels: &Mask, probs: &[f64]) -> Result<Self> {
        if labels.bits().len() != probs.len() {
            return Err(Error::Shape(format!(
                "{} labels but {} probabilities",
                labels.bits().len(),
                probs.len()
            )));
        }
        let r = labels
            .bits()
            .iter()
            .zip(probs)
            .map(|(&y, &p)| f64::from(y) - p)
            .collect();
        Self::new(r)
    }

    pub fn per_pixel(&self) -> &[f64] {
        &self.per_pixel
    }

    /// Cached squared Euclidean norm of the residual vector.
    pub fn delta_sq(&self) -> f64 {
        self.delta_sq
    }

    pub fn len(&self) -> usize {
        self.per_pixel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_pixel.is_empty()
    }
}

/// Neumaier-compensated sum of squares: accurate to ~1 ulp regardless of
/// element order, so permuting a residual cannot shift the loss measurably.
fn sum_of_squares(v: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in v {
        let sq = x * x;
        let t = sum + sq;
        if sum.abs() >= sq {
            comp += (sum - t) + sq;
        } else {
            comp += (sq - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Gradient of the per-image loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TLossGrad {
    /// ∂L/∂f per pixel (f is the prediction; residual is label − f).
    pub d_prediction: Vec<f64>,
    /// ∂L/∂ν̃ through the reparametrization chain rule.
    pub d_nu_tilde: f64,
    /// ∂L/∂ν before the chain rule, useful for diagnostics.
    pub d_nu: f64,
}

/// Loss value for one image.
pub fn value(state: &TLossState, residual: &Residual) -> Result<f64> {
    check_dim(state, residual)?;
    nll_at(state.nu(), state.dim(), residual.delta_sq())
}

/// Core formula at explicit ν; shared by [`value`] and the asymptote checks.
pub fn nll_at(nu: f64, dim: usize, delta_sq: f64) -> Result<f64> {
    if !nu.is_finite() || nu <= 0.0 {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    if !delta_sq.is_finite() || delta_sq < 0.0 {
        return Err(Error::Domain(format!("delta_sq must be non-negative, got {delta_sq}")));
    }
    if dim == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let d = dim as f64;
    let half = 0.5 * (nu + d);
    Ok(-special::log_gamma(half)? + special::log_gamma(0.5 * nu)?
        + 0.5 * d * (std::f64::consts::PI * nu).ln()
        + half * (delta_sq / nu).ln_1p())
}

/// Analytic gradient for one image.
pub fn grad(state: &TLossState, residual: &Residual) -> Result<TLossGrad> {
    check_dim(state, residual)?;
    let (nu, chain) = state.nu_and_chain();
    let d = state.dim() as f64;
    let dsq = residual.delta_sq();

    let scale = (nu + d) / (nu + dsq);
    let d_prediction = residual.per_pixel().iter().map(|&r| -scale * r).collect();

    let d_nu = -0.5 * special::digamma(0.5 * (nu + d))? + 0.5 * special::digamma(0.5 * nu)?
        + 0.5 * d / nu
        + 0.5 * (dsq / nu).ln_1p()
        - (nu + d) * dsq / (2.0 * nu * (nu + dsq));

    Ok(TLossGrad {
        d_prediction,
        d_nu_tilde: d_nu * chain,
        d_nu,
    })
}

/// Arithmetic mean of per-image losses over a dataset.
pub fn dataset_mean(state: &TLossState, residuals: &[Residual]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::Empty("residual list"));
    }
    let mut acc = 0.0;
    for r in residuals {
        acc += value(state, r)?;
    }
    Ok(acc / residuals.len() as f64)
}

fn check_dim(state: &TLossState, residual: &Residual) -> Result<()> {
    if residual.len() != state.dim() {
        return Err(Error::Shape(format!(
            "residual has {} entries but the state expects {}",
            residual.len(),
            state.dim()
        )));
    }
    Ok(())
}
