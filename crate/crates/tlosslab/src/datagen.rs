//! Synthetic binary-segmentation data: one random filled ellipse per image.
//!
//! Each sample draws an ellipse (center in the central 60% of the frame,
//! semi-axes between an eighth and a third of the side, random orientation),
//! rasterizes it at pixel centers, and renders an intensity image as
//! background + contrast * mask + Gaussian pixel noise, clipped to [0, 1].
//! Train and test splits use disjoint RNG streams keyed by (seed, split,
//! index), so changing one split never perturbs the other.

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const DEFAULT_SIDE: usize = 64;
pub const DEFAULT_CONTRAST: f64 = 0.5;
pub const DEFAULT_PIXEL_NOISE_SIGMA: f64 = 0.15;
pub const MIN_SIDE: usize = 16;

/// Shape and rendering settings for one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default = "default_side")]
    pub side: usize,
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_sigma")]
    pub pixel_noise_sigma: f64,
    pub seed: u64,
}

fn default_side() -> usize {
    DEFAULT_SIDE
}

fn default_contrast() -> f64 {
    DEFAULT_CONTRAST
}

fn default_sigma() -> f64 {
    DEFAULT_PIXEL_NOISE_SIGMA
}

impl DatasetConfig {
    /// Config with default geometry and rendering.
    pub fn new(n_train: usize, n_test: usize, seed: u64) -> Self {
        Self {
            n_train,
            n_test,
            side: DEFAULT_SIDE,
            contrast: DEFAULT_CONTRAST,
            pixel_noise_sigma: DEFAULT_PIXEL_NOISE_SIGMA,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < MIN_SIDE {
            return Err(Error::Config(format!(
                "side must be at least {MIN_SIDE}, got {}",
                self.side
            )));
        }
        if !self.contrast.is_finite() || self.contrast <= 0.0 || self.contrast > 1.0 {
            return Err(Error::Config(format!(
                "contrast must lie in (0, 1], got {}",
                self.contrast
            )));
        }
        if !self.pixel_noise_sigma.is_finite() || self.pixel_noise_sigma < 0.0 {
            return Err(Error::Config(format!(
                "pixel_noise_sigma must be non-negative, got {}",
                self.pixel_noise_sigma
            )));
        }
        Ok(())
    }

    /// Flat intensity behind the ellipse, kept below mid-gray and low enough
    /// that background + contrast stays within range.
    pub fn background(&self) -> f64 {
        (1.0 - self.contrast).min(0.25)
    }
}

/// One image with its ground truth and its (possibly corrupted) label.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    /// Intensities in [0, 1].
    pub image: Grid,
    /// Rasterized ellipse, the ground truth.
    pub clean_mask: Mask,
    /// Label used for training; equals `clean_mask` until noise is injected.
    pub train_mask: Mask,
}

/// Train/test splits of equally sized square samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<ImageSample>,
    pub test: Vec<ImageSample>,
    pub side: usize,
}

impl Dataset {
    /// Replaces the train labels, e.g. with morphologically corrupted masks.
    pub fn set_train_labels(&mut self, labels: Vec<Mask>) -> Result<()> {
        if labels.len() != self.train.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} train samples",
                labels.len(),
                self.train.len()
            )));
        }
        for (sample, label) in self.train.iter_mut().zip(labels) {
            if label.width() != self.side || label.height() != self.side {
                return Err(Error::Shape(format!(
                    "label is {}x{} but samples are {}x{}",
                    label.width(),
                    label.height(),
                    self.side,
                    self.side
                )));
            }
            sample.train_mask = label;
        }
        Ok(())
    }
}

/// Pixel-center rasterization of a rotated ellipse.
fn rasterize_ellipse(side: usize, cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Mask {
    let (sin, cos) = theta.sin_cos();
    Mask::from_fn(side, side, |x, y| {
        let dx = x as f64 + 0.5 - cx;
        let dy = y as f64 + 0.5 - cy;
        let u = (cos * dx + sin * dy) / a;
        let v = (-sin * dx + cos * dy) / b;
        u * u + v * v <= 1.0
    })
    .expect("side is validated nonzero")
}

fn sample_image(cfg: &DatasetConfig, split: &str, index: usize) -> ImageSample {
    let mut rng = seed::stream(&[cfg.seed, seed::tag(split), index as u64]);
    let s = cfg.side as f64;
    let cx = rng.gen_range(0.2 * s..0.8 * s);
    let cy = rng.gen_range(0.2 * s..0.8 * s);
    let a = rng.gen_range(s / 8.0..s / 3.0);
    let b = rng.gen_range(s / 8.0..s / 3.0);
    let theta = rng.gen_range(0.0..std::f64::consts::PI);
    let mask = rasterize_ellipse(cfg.side, cx, cy, a, b, theta);

    let bg = cfg.background();
    let noise = if cfg.pixel_noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.pixel_noise_sigma).expect("sigma is validated finite"))
    } else {
        None
    };
    let data = mask
        .bits()
        .iter()
        .map(|&bit| {
            let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            (bg + cfg.contrast * f64::from(bit) + n).clamp(0.0, 1.0)
        })
        .collect();
    let image = Grid::from_data(cfg.side, cfg.side, data).expect("side matches data length");
    ImageSample {
        image,
        clean_mask: mask.clone(),
        train_mask: mask,
    }
}

/// Generates both splits from their disjoint RNG streams.
pub fn generate(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let train = (0..cfg.n_train).map(|i| sample_image(cfg, "train", i)).collect();
    let test = (0..cfg.n_test).map(|i| sample_image(cfg, "test", i)).collect();
    Ok(Dataset {
        train,
        test,
        side: cfg.side,
    })
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    image: String,
    clean: String,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    side: usize,
    train: Vec<IndexEntry>,
    test: Vec<IndexEntry>,
}

/// Writes a grid as an 8-bit binary PGM (P5, maxval 255).
fn write_pgm(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    fs::write(path, out)?;
    Ok(())
}

fn grid_bytes(grid: &Grid) -> Vec<u8> {
    grid.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

fn mask_bytes(mask: &Mask) -> Vec<u8> {
    mask.bits().iter().map(|&b| b * 255).collect()
}

/// Parses a binary PGM with maxval 255; `#` comments are allowed in the header.
fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(bad("not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and comment lines between header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == start {
            return Err(bad("malformed header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ASCII");
        *field = text.parse().map_err(|_| bad("header value out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(bad("missing separator before pixel data"));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| bad("image dimensions overflow"))?;
    let data = bytes[pos..].to_vec();
    if data.len() != n {
        return Err(bad("pixel payload does not match header dimensions"));
    }
    Ok((width, height, data))
}

fn read_grid(path: &Path, side: usize) -> Result<Grid> {
    let (w, h, data) = read_pgm(path)?;
    if w != side || h != side {
        return Err(Error::Format(format!(
            "{}: expected {side}x{side}, got {w}x{h}",
            path.display()
        )));
    }
    Grid::from_data(w, h, data.into_iter().map(|b| f64::from(b) / 255.0).collect())
}

/// Masks are stored as 0/255; anything above 127 imports as foreground.
fn read_mask(path: &Path, side: usize) -> Result<Mask> {
    let (w, h, data) = read_pgm(path)?;
    if w != side || h != side {
        return Err(Error::Format(format!(
            "{}: expected {side}x{side}, got {w}x{h}",
            path.display()
        )));
    }
    Mask::from_bits(w, h, data.into_iter().map(|b| u8::from(b > 127)).collect())
}

/// Writes every sample as PGM files plus an `index.json` manifest.
pub fn export(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = IndexFile {
        side: dataset.side,
        train: Vec::new(),
        test: Vec::new(),
    };
    for (split, samples, entries) in [
        ("train", &dataset.train, &mut index.train),
        ("test", &dataset.test, &mut index.test),
    ] {
        for (i, sample) in samples.iter().enumerate() {
            let entry = IndexEntry {
                image: format!("{split}_{i:04}_image.pgm"),
                clean: format!("{split}_{i:04}_clean.pgm"),
                label: format!("{split}_{i:04}_label.pgm"),
            };
            let side = dataset.side;
            write_pgm(&dir.join(&entry.image), side, side, &grid_bytes(&sample.image))?;
            write_pgm(&dir.join(&entry.clean), side, side, &mask_bytes(&sample.clean_mask))?;
            write_pgm(&dir.join(&entry.label), side, side, &mask_bytes(&sample.train_mask))?;
            entries.push(entry);
        }
    }
    let file = fs::File::create(dir.join("index.json"))?;
    serde_json::to_writer_pretty(file, &index)?;
    Ok(())
}

/// Reads a dataset previously written by [`export`].
pub fn import(dir: &Path) -> Result<Dataset> {
    let file = fs::File::open(dir.join("index.json"))?;
    let index: IndexFile = serde_json::from_reader(file)?;
    let load = |entries: &[IndexEntry]| -> Result<Vec<ImageSample>> {
        entries
            .iter()
            .map(|e| {
                Ok(ImageSample {
                    image: read_grid(&dir.join(&e.image), index.side)?,
                    clean_mask: read_mask(&dir.join(&e.clean), index.side)?,
                    train_mask: read_mask(&dir.join(&e.label), index.side)?,
                })
            })
            .collect()
    };
    Ok(Dataset {
        train: load(&index.train)?,
        test: load(&index.test)?,
        side: index.side,
    })
}
