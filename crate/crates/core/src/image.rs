use alloc::vec::Vec;

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if pixels.len() != 3 * width * height {
            return Err(Error::LengthMismatch { expected: 3 * width * height, found: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(3 * width * height).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Rec.601 luma per pixel, row-major.
    pub fn luminance(&self) -> Vec<f64> {
        self.pixels.chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect()
    }

    /// Rec.601 luma rounded to the nearest gray level.
    pub fn gray(&self) -> Vec<u8> {
        self.pixels
            .chunks_exact(3)
            .map(|p| ((luma_millis([p[0], p[1], p[2]]) + 500) / 1000) as u8)
            .collect()
    }

    pub fn mirrored_horizontally(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(3 * self.width) {
            for px in row.chunks_exact(3).rev() {
                pixels.extend_from_slice(px);
            }
        }
        Self { width: self.width, height: self.height, pixels }
    }
}

/// `1000 * (0.299 R + 0.587 G + 0.114 B)`, exact in integers.
#[inline]
pub(crate) fn luma_millis(rgb: [u8; 3]) -> u32 {
    299 * u32::from(rgb[0]) + 587 * u32::from(rgb[1]) + 114 * u32::from(rgb[2])
}

/// Rec.601 luma. Computed from the exact integer sum so equal sums give
/// bit-identical results.
#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    f64::from(luma_millis(rgb)) / 1000.0
}
