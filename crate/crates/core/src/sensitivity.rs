//! Channel-wise sensitivity sweep: scale one latent channel at a time by a
//! constant while holding prompt, seed and the other channels fixed, and
//! record brightness and chroma statistics of each output.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, GenerationRequest, OutputSize};
use crate::error::{Error, Result};
use crate::image::{luma, RgbImage};
use crate::latent::{sample_initial_noise, scale_channel, Channel, ChannelPerturbation};

pub const DEFAULT_ALPHAS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub prompt: String,
    pub seeds: Vec<u64>,
    pub channels: Vec<Channel>,
    pub alphas: Vec<f64>,
    pub output_size: OutputSize,
}

impl SweepConfig {
    pub fn new(prompt: impl Into<String>, seeds: Vec<u64>, channels: Vec<Channel>, output_size: OutputSize) -> Self {
        Self { prompt: prompt.into(), seeds, channels, alphas: DEFAULT_ALPHAS.to_vec(), output_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidSweep("at least one seed is required".into()));
        }
        if self.channels.is_empty() {
            return Err(Error::InvalidSweep("at least one channel is required".into()));
        }
        if self.alphas.is_empty() || !self.alphas.contains(&1.0) {
            return Err(Error::InvalidSweep("alphas must include the reference 1.0".into()));
        }
        if let Some(&a) = self.alphas.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidAlpha(a));
        }
        crate::backend::latent_dims(self.output_size).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuminanceStats {
    pub mean_luminance: f64,
    /// Luminance-weighted mean pixel position, normalized to `[0, 1]`.
    pub centroid: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub seed: u64,
    pub channel: Channel,
    pub alpha: f64,
    pub mean_luminance: f64,
    pub luminance_centroid: (f64, f64),
    /// Mean per-pixel Euclidean distance in (B - Y, R - Y) against the
    /// unperturbed output of the same seed.
    pub mean_chroma_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub prompt: String,
    pub output_size: OutputSize,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn series(&self, seed: u64, channel: Channel) -> impl Iterator<Item = &SweepEntry> {
        self.entries.iter().filter(move |e| e.seed == seed && e.channel == channel)
    }
}

/// Rec.601 mean luminance and luminance centroid. An all-black image has its
/// centroid at `(0.5, 0.5)`.
pub fn luminance_stats(image: &RgbImage) -> LuminanceStats {
    let (w, h) = (image.width(), image.height());
    let mut total = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for row in 0..h {
        let y = (row as f64 + 0.5) / h as f64;
        for col in 0..w {
            let l = luma(image.pixel(row, col));
            total += l;
            sx += l * (col as f64 + 0.5) / w as f64;
            sy += l * y;
        }
    }
    let mean_luminance = total / (w * h) as f64;
    let centroid = if total > 0.0 { (sx / total, sy / total) } else { (0.5, 0.5) };
    LuminanceStats { mean_luminance, centroid }
}

fn chroma(rgb: [u8; 3]) -> (f64, f64) {
    let y = luma(rgb);
    (f64::from(rgb[2]) - y, f64::from(rgb[0]) - y)
}

pub fn mean_chroma_shift(image: &RgbImage, reference: &RgbImage) -> f64 {
    let n = image.width() * image.height();
    let sum: f64 = image
        .pixels()
        .chunks_exact(3)
        .zip(reference.pixels().chunks_exact(3))
        .map(|(a, b)| {
            let (ca, cb) = (chroma([a[0], a[1], a[2]]), chroma([b[0], b[1], b[2]]));
            libm::hypot(ca.0 - cb.0, ca.1 - cb.1)
        })
        .sum();
    sum / n as f64
}

/// Runs the sweep. Noise is sampled once per seed and reused for every
/// (channel, alpha) pair; the reference for chroma shift is the unperturbed
/// output of that seed. Any backend error aborts the whole sweep.
pub fn run_sweep<B: Backend + ?Sized>(config: &SweepConfig, backend: &B) -> Result<SweepReport> {
    config.validate()?;
    let (h, w) = backend.latent_dims(config.output_size)?;
    let mut entries = Vec::with_capacity(config.seeds.len() * config.channels.len() * config.alphas.len());
    for &seed in &config.seeds {
        let request = GenerationRequest::new(config.prompt.clone(), seed, config.output_size);
        let noise = sample_initial_noise(seed, h, w)?;
        let reference = backend.denoise(&request, &noise)?.image;
        for &channel in &config.channels {
            for &alpha in &config.alphas {
                let perturbed = scale_channel(&noise, ChannelPerturbation { channel, alpha });
                let image = backend.denoise(&request, &perturbed)?.image;
                let stats = luminance_stats(&image);
                entries.push(SweepEntry {
                    seed,
                    channel,
                    alpha,
                    mean_luminance: stats.mean_luminance,
                    luminance_centroid: stats.centroid,
                    mean_chroma_shift: mean_chroma_shift(&image, &reference),
                });
            }
        }
    }
    Ok(SweepReport { prompt: config.prompt.clone(), output_size: config.output_size, entries })
}
