//! Row-major raster containers: binary masks and real-valued grids.

use crate::error::{Error, Result};

/// Binary segmentation mask. Pixels are stored row-major as 0/1 bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl Mask {
    /// All-background mask of the given dimensions.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![0; width * height],
        })
    }

    /// Wraps row-major 0/1 bytes.
    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::Shape(format!(
                "mask data has {} entries for a {}x{} raster",
                bits.len(),
                width,
                height
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Domain(format!("mask byte {b} is neither 0 nor 1")));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Builds a mask by evaluating `f` at every (x, y).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = u8::from(f(x, y));
            }
        }
        Ok(m)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel value, 0 or 1.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = u8::from(value);
    }

    /// Row-major pixel bytes.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Foreground centroid in pixel-center coordinates, `None` when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0f64, 0.0f64);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.bits[y * self.width + x] == 1 {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1;
                }
            }
        }
        if n == 0 {
            None
        } else {
            Some((sx / n as f64, sy / n as f64))
        }
    }
}

/// Real-valued raster (intensities, probabilities, gradients), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    /// All-zero grid of the given dimensions.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![0.0; width * height],
        })
    }

    /// Wraps row-major values.
    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "grid data has {} entries for a {}x{} raster",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Row-major values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Shape(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}
