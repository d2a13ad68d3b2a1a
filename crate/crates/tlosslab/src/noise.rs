//! Morphological label corruption: erosion, dilation, and affine displacement.
//!
//! Each mask of a dataset is independently selected with probability alpha;
//! a selected mask receives one uniformly chosen transform whose strength is
//! scaled by beta. The transform is resampled (at most five times) if it
//! would wipe out a non-empty mask. Every mask draws from its own RNG stream,
//! so results do not depend on processing order.

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::metrics;
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Corruption strength settings for one dataset pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Probability that a mask is corrupted at all.
    pub alpha: f64,
    /// Severity in [0, 1], scaling every transform parameter range.
    pub beta: f64,
    /// Root of the per-mask RNG streams.
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

/// One sampled corruption, as recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", content = "params", rename_all = "snake_case")]
pub enum Transform {
    Erode { radius: u32 },
    Dilate { radius: u32 },
    Affine { dx: f64, dy: f64, angle_deg: f64, scale: f64 },
}

/// Per-mask manifest line: what happened to mask `index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub index: usize,
    pub selected: bool,
    #[serde(flatten, skip_serializing_if = "Option::is_none", default)]
    pub transform: Option<Transform>,
    pub dice_vs_original: f64,
}

/// Erosion by a square (Chebyshev) structuring element of the given radius;
/// pixels outside the frame count as background.
pub fn erode(mask: &Mask, radius: u32) -> Result<Mask> {
    morph(mask, radius, true)
}

/// Dilation by a square structuring element of the given radius.
pub fn dilate(mask: &Mask, radius: u32) -> Result<Mask> {
    morph(mask, radius, false)
}

/// Separable two-pass window count; erosion needs the full (2r+1)^2 square
/// foreground, dilation needs any foreground hit.
fn morph(mask: &Mask, radius: u32, erode: bool) -> Result<Mask> {
    if radius == 0 {
        return Err(Error::Domain("structuring element radius must be at least 1".into()));
    }
    let (w, h) = (mask.width(), mask.height());
    let r = radius as usize;
    let side = 2 * r + 1;

    // Horizontal foreground counts, clipped at the frame.
    let mut horiz = vec![0u32; w * h];
    for y in 0..h {
        let row = &mask.bits()[y * w..(y + 1) * w];
        let mut run: u32 = row.iter().take(r.min(w)).map(|&b| u32::from(b)).sum();
        for x in 0..w {
            if x + r < w {
                run += u32::from(row[x + r]);
            }
            horiz[y * w + x] = run;
            if x >= r {
                run -= u32::from(row[x - r]);
            }
        }
    }

    // Vertical accumulation of the horizontal counts.
    let full = (side * side) as u32;
    let mut bits = vec![0u8; w * h];
    for x in 0..w {
        let mut run: u32 = (0..r.min(h)).map(|y| horiz[y * w + x]).sum();
        for y in 0..h {
            if y + r < h {
                run += horiz[(y + r) * w + x];
            }
            bits[y * w + x] = if erode {
                u8::from(run == full)
            } else {
                u8::from(run > 0)
            };
            if y >= r {
                run -= horiz[(y - r) * w + x];
            }
        }
    }
    Mask::from_bits(w, h, bits)
}

/// Scale about the foreground centroid, rotate about it, then translate by
/// (dx*width, dy*height) pixels; resampled by inverse mapping with
/// nearest-neighbor lookup, out-of-frame sources count as background.
/// An empty mask is returned unchanged.
pub fn affine_displace(mask: &Mask, dx: f64, dy: f64, angle_deg: f64, scale: f64) -> Result<Mask> {
    if !(dx.is_finite() && dy.is_finite() && angle_deg.is_finite() && scale.is_finite()) {
        return Err(Error::Domain("affine parameters must be finite".into()));
    }
    if scale <= 0.0 {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    let Some((cx, cy)) = mask.centroid() else {
        return Ok(mask.clone());
    };
    let (w, h) = (mask.width(), mask.height());
    let (tx, ty) = (dx * w as f64, dy * h as f64);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let inv_s = 1.0 / scale;

    let mut bits = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            // Undo translation, then rotation, then scaling.
            let vx = x as f64 + 0.5 - cx - tx;
            let vy = y as f64 + 0.5 - cy - ty;
            let rx = (cos * vx + sin * vy) * inv_s + cx;
            let ry = (-sin * vx + cos * vy) * inv_s + cy;
            let (sx, sy) = (rx.floor(), ry.floor());
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h {
                bits[y * w + x] = mask.bits()[sy as usize * w + sx as usize];
            }
        }
    }
    Mask::from_bits(w, h, bits)
}

/// Applies one recorded transform.
pub fn apply(mask: &Mask, transform: Transform) -> Result<Mask> {
    match transform {
        Transform::Erode { radius } => erode(mask, radius),
        Transform::Dilate { radius } => dilate(mask, radius),
        Transform::Affine {
            dx,
            dy,
            angle_deg,
            scale,
        } => affine_displace(mask, dx, dy, angle_deg, scale),
    }
}

/// Uniform draw that tolerates a zero-width range (beta = 0).
fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// One transform with beta-scaled parameters; the morphological radius grows
/// with the square root of the foreground area.
fn sample_transform<R: Rng>(rng: &mut R, beta: f64, fg_area: usize) -> Transform {
    let radius = (beta * 0.15 * (fg_area as f64).sqrt()).round().max(1.0) as u32;
    match rng.gen_range(0..3u8) {
        0 => Transform::Erode { radius },
        1 => Transform::Dilate { radius },
        _ => Transform::Affine {
            dx: uniform(rng, -0.15 * beta, 0.15 * beta),
            dy: uniform(rng, -0.15 * beta, 0.15 * beta),
            angle_deg: uniform(rng, -30.0 * beta, 30.0 * beta),
            scale: uniform(rng, 1.0 - 0.25 * beta, 1.0 + 0.25 * beta),
        },
    }
}

/// At most this many fresh draws when a transform empties a non-empty mask.
pub const MAX_RESAMPLES: usize = 5;

/// Corrupts one mask with its own RNG stream; `index` selects the stream.
fn corrupt_one(mask: &Mask, cfg: &NoiseConfig, index: usize) -> Result<(Mask, CorruptionRecord)> {
    let mut rng = seed::stream(&[cfg.seed, seed::tag("noise"), index as u64]);
    if !rng.gen_bool(cfg.alpha) {
        return Ok((
            mask.clone(),
            CorruptionRecord {
                index,
                selected: false,
                transform: None,
                dice_vs_original: 1.0,
            },
        ));
    }
    let area = mask.area();
    let mut transform = sample_transform(&mut rng, cfg.beta, area);
    let mut corrupted = apply(mask, transform)?;
    for _ in 0..MAX_RESAMPLES {
        if area == 0 || corrupted.area() > 0 {
            break;
        }
        transform = sample_transform(&mut rng, cfg.beta, area);
        corrupted = apply(mask, transform)?;
    }
    let dice = metrics::dice(mask, &corrupted)?.value();
    Ok((
        corrupted,
        CorruptionRecord {
            index,
            selected: true,
            transform: Some(transform),
            dice_vs_original: dice,
        },
    ))
}

/// Corrupts a whole dataset, returning the new masks and one manifest record
/// per mask (in input order).
pub fn corrupt_dataset(masks: &[Mask], cfg: &NoiseConfig) -> Result<(Vec<Mask>, Vec<CorruptionRecord>)> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(masks.len());
    let mut records = Vec::with_capacity(masks.len());
    for (i, m) in masks.iter().enumerate() {
        let (c, r) = corrupt_one(m, cfg, i)?;
        out.push(c);
        records.push(r);
    }
    Ok((out, records))
}

/// Writes the manifest as JSON Lines, one record per line.
pub fn write_manifest<W: Write>(mut w: W, records: &[CorruptionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON Lines manifest; blank lines are skipped.
pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<CorruptionRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
