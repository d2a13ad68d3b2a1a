//! Regression checks of the Student-t loss's two asymptotic regimes.
//!
//! For tiny residuals the loss grows linearly in the squared residual norm
//! with slope (nu + D) / (2 nu); for huge residuals it grows linearly in the
//! log residual norm with slope (nu + D). Both are fitted over fixed grids
//! and compared against the closed forms.

use serde::{Deserialize, Serialize};
use tlosslab::metrics::linear_fit;
use tlosslab::tloss::nll_at;
use tlosslab::Result;

pub const SLOPE_RTOL: f64 = 0.01;
pub const MIN_R_SQUARED: f64 = 0.9999;
const N_GRID: usize = 50;

/// Fit of both regimes for one (nu, D) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCase {
    pub nu: f64,
    pub dim: usize,
    pub small_slope_fitted: f64,
    pub small_slope_expected: f64,
    pub small_r_squared: f64,
    pub large_slope_fitted: f64,
    pub large_slope_expected: f64,
    pub large_r_squared: f64,
}

impl SlopeCase {
    pub fn passed(&self) -> bool {
        let rel = |fit: f64, want: f64| (fit - want).abs() / want.abs();
        rel(self.small_slope_fitted, self.small_slope_expected) <= SLOPE_RTOL
            && rel(self.large_slope_fitted, self.large_slope_expected) <= SLOPE_RTOL
            && self.small_r_squared >= MIN_R_SQUARED
            && self.large_r_squared >= MIN_R_SQUARED
    }
}

/// Geometric grid of `n` deltas from `lo` to `hi`.
fn delta_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Fits both regimes at one (nu, D).
pub fn check_case(nu: f64, dim: usize) -> Result<SlopeCase> {
    // Small regime: delta^2 far below nu, so the log term is in its linear
    // range. The grid tops out at nu * 1e-3.
    let small = delta_grid((nu * 1e-6).sqrt(), (nu * 1e-3).sqrt(), N_GRID);
    let xs: Vec<f64> = small.iter().map(|d| d * d).collect();
    let ys = small
        .iter()
        .map(|&d| nll_at(nu, dim, d * d))
        .collect::<Result<Vec<f64>>>()?;
    let small_fit = linear_fit(&xs, &ys)?;

    // Large regime: delta^2 far above nu.
    let large = delta_grid(1e3, 1e6, N_GRID);
    let xs: Vec<f64> = large.iter().map(|d| d.ln()).collect();
    let ys = large
        .iter()
        .map(|&d| nll_at(nu, dim, d * d))
        .collect::<Result<Vec<f64>>>()?;
    let large_fit = linear_fit(&xs, &ys)?;

    let d = dim as f64;
    Ok(SlopeCase {
        nu,
        dim,
        small_slope_fitted: small_fit.slope,
        small_slope_expected: (nu + d) / (2.0 * nu),
        small_r_squared: small_fit.r_squared,
        large_slope_fitted: large_fit.slope,
        large_slope_expected: nu + d,
        large_r_squared: large_fit.r_squared,
    })
}

/// Full report over the standard (nu, D) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsReport {
    pub cases: Vec<SlopeCase>,
}

impl LimitsReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(SlopeCase::passed)
    }
}

pub fn run_all() -> Result<LimitsReport> {
    let cases = [(1.0, 1), (2.0, 1), (5.0, 64)]
        .into_iter()
        .map(|(nu, dim)| check_case(nu, dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitsReport { cases })
}
