//! Dice overlap, probability binarization, run summaries, and a line fit.

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};

/// Binarization threshold used when a config does not override it.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Dice coefficient in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DiceScore(f64);

impl DiceScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Dice overlap 2|A∩B| / (|A|+|B|); two empty masks count as a perfect match.
pub fn dice(a: &Mask, b: &Mask) -> Result<DiceScore> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Shape(format!(
            "masks are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let inter: u64 = a
        .bits()
        .iter()
        .zip(b.bits())
        .map(|(&x, &y)| u64::from(x & y))
        .sum();
    let total = a.area() + b.area();
    if total == 0 {
        return Ok(DiceScore(1.0));
    }
    Ok(DiceScore(2.0 * inter as f64 / total as f64))
}

/// Foreground where probability exceeds the threshold (strictly).
pub fn binarize(probs: &Grid, threshold: f64) -> Result<Mask> {
    if !threshold.is_finite() {
        return Err(Error::Domain(format!("threshold must be finite, got {threshold}")));
    }
    let bits = probs.data().iter().map(|&p| u8::from(p > threshold)).collect();
    Mask::from_bits(probs.width(), probs.height(), bits)
}

/// Dice between thresholded probabilities and a reference mask, without
/// materializing the prediction mask.
pub fn dice_of_probs(probs: &[f64], threshold: f64, reference: &Mask) -> Result<DiceScore> {
    if !threshold.is_finite() {
        return Err(Error::Domain(format!("threshold must be finite, got {threshold}")));
    }
    if probs.len() != reference.bits().len() {
        return Err(Error::Shape(format!(
            "{} probabilities for {} reference pixels",
            probs.len(),
            reference.bits().len()
        )));
    }
    let mut inter = 0usize;
    let mut pred_area = 0usize;
    for (&p, &y) in probs.iter().zip(reference.bits()) {
        let fg = p > threshold;
        pred_area += usize::from(fg);
        inter += usize::from(fg && y == 1);
    }
    let total = pred_area + reference.area();
    if total == 0 {
        return Ok(DiceScore(1.0));
    }
    Ok(DiceScore(2.0 * inter as f64 / total as f64))
}

/// Mean and sample standard deviation over a set of runs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean with (n-1)-normalized standard deviation; a single value has std 0.
pub fn summary_of(values: &[f64]) -> Result<SummaryStat> {
    if values.is_empty() {
        return Err(Error::Empty("summary input"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("summary input {bad} is not finite")));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(SummaryStat { mean, std, n })
}

/// Mean of the final `k` entries (or of the whole series when shorter).
pub fn last_k_mean(series: &[f64], k: usize) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Empty("series"));
    }
    if k == 0 {
        return Err(Error::Domain("window must be at least 1".into()));
    }
    let tail = &series[series.len().saturating_sub(k)..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Per-seed tail means rolled up into a cross-seed summary.
pub fn summarize(series_per_seed: &[Vec<f64>], k: usize) -> Result<SummaryStat> {
    let means: Vec<f64> = series_per_seed
        .iter()
        .map(|s| last_k_mean(s, k))
        .collect::<Result<_>>()?;
    summary_of(&means)
}

/// Ordinary least-squares line y = slope*x + intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit; requires at least two points and non-constant x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Domain("need at least two points to fit a line".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("fit inputs must be finite".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("x values are all identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - (slope * u + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}
