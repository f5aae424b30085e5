//! Initial latent noise and the two channel-level transforms applied to it:
//! uniform per-channel scaling (used by the sensitivity sweep) and light
//! guidance on the brightness channel.
//!
//! Channel indices in the public API are 1-based: channel 1 is the first of
//! the four latent channels and is stored at offset 0.

use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LightMask;

pub const LATENT_CHANNELS: usize = 4;

/// Timestep label recorded on freshly sampled noise (the start of a
/// 1000-step training schedule).
pub const DEFAULT_TIMESTEP: u32 = 1000;

/// A latent channel in 1-based numbering, `1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Channel(u8);

impl Channel {
    /// The channel that carries global brightness and light direction.
    pub const LIGHT: Channel = Channel(1);
    pub const ALL: [Channel; 4] = [Channel(1), Channel(2), Channel(3), Channel(4)];

    pub fn new(number: u8) -> Result<Self> {
        if (1..=LATENT_CHANNELS as u8).contains(&number) {
            Ok(Self(number))
        } else {
            Err(Error::InvalidChannel(number))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }

    /// Storage offset (0-based).
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for Channel {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Channel::new(value)
    }
}

impl From<Channel> for u8 {
    fn from(c: Channel) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPerturbation {
    pub channel: Channel,
    pub alpha: f64,
}

impl ChannelPerturbation {
    pub fn new(channel: u8, alpha: f64) -> Result<Self> {
        let channel = Channel::new(channel)?;
        if !alpha.is_finite() {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self { channel, alpha })
    }
}

/// A 4-channel latent grid, channel-major then row-major, with the seed and
/// timestep it was sampled for.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentNoise {
    height: usize,
    width: usize,
    values: Vec<f64>,
    seed: u64,
    timestep: u32,
}

impl LatentNoise {
    pub fn from_values(
        height: usize,
        width: usize,
        values: Vec<f64>,
        seed: u64,
        timestep: u32,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let expected = LATENT_CHANNELS * height * width;
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(Self { height, width, values, seed, timestep })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::from_values(height, width, alloc::vec![0.0; LATENT_CHANNELS * height * width], 0, DEFAULT_TIMESTEP)
    }

    pub fn channels(&self) -> usize {
        LATENT_CHANNELS
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn timestep(&self) -> u32 {
        self.timestep
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        let n = self.plane_len();
        &self.values[channel.index() * n..(channel.index() + 1) * n]
    }

    fn channel_mut(&mut self, channel: Channel) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.values[channel.index() * n..(channel.index() + 1) * n]
    }

    /// Returns a copy with one channel replaced.
    pub fn with_channel(&self, channel: Channel, plane: &[f64]) -> Result<Self> {
        if plane.len() != self.plane_len() {
            return Err(Error::LengthMismatch { expected: self.plane_len(), found: plane.len() });
        }
        if plane.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        let mut out = self.clone();
        out.channel_mut(channel).copy_from_slice(plane);
        Ok(out)
    }
}

/// Draws i.i.d. standard-normal latent noise. Identical seeds give
/// bit-identical grids.
pub fn sample_initial_noise(seed: u64, height: usize, width: usize) -> Result<LatentNoise> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values = (0..LATENT_CHANNELS * height * width)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Ok(LatentNoise { height, width, values, seed, timestep: DEFAULT_TIMESTEP })
}

/// Multiplies one channel by a constant; every other channel is copied bit
/// for bit.
pub fn scale_channel(z: &LatentNoise, perturbation: ChannelPerturbation) -> LatentNoise {
    let mut out = z.clone();
    let alpha = perturbation.alpha;
    out.channel_mut(perturbation.channel).iter_mut().for_each(|v| *v *= alpha);
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GuidanceOptions {
    /// Rescale the lit cells (mask > 0) of channel 1 to unit standard
    /// deviation after guidance. Off by default.
    pub normalize: bool,
}

/// Light guidance: channel 1 becomes `z1 * (1 + m)`. The mask must already be
/// at latent resolution.
pub fn apply_light_guidance(z: &LatentNoise, mask: &LightMask) -> Result<LatentNoise> {
    apply_light_guidance_with(z, mask, GuidanceOptions::default())
}

pub fn apply_light_guidance_with(
    z: &LatentNoise,
    mask: &LightMask,
    options: GuidanceOptions,
) -> Result<LatentNoise> {
    if mask.width() != z.width || mask.height() != z.height {
        return Err(Error::DimensionMismatch {
            expected_width: z.width,
            expected_height: z.height,
            found_width: mask.width(),
            found_height: mask.height(),
        });
    }
    let mut out = z.clone();
    let plane = out.channel_mut(Channel::LIGHT);
    for (v, &m) in plane.iter_mut().zip(mask.values()) {
        *v *= 1.0 + m;
    }
    if options.normalize {
        normalize_lit_region(plane, mask.values());
    }
    Ok(out)
}

fn normalize_lit_region(plane: &mut [f64], mask: &[f64]) {
    let lit = || plane.iter().zip(mask).filter(|(_, &m)| m > 0.0).map(|(&v, _)| v);
    let count = lit().count();
    if count < 2 {
        return;
    }
    let mean = lit().sum::<f64>() / count as f64;
    let var = lit().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    let std = libm::sqrt(var);
    if std.is_nan() || std <= 0.0 {
        return;
    }
    for (v, &m) in plane.iter_mut().zip(mask) {
        if m > 0.0 {
            *v /= std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_initial_noise(42, 8, 8).unwrap();
        let b = sample_initial_noise(42, 8, 8).unwrap();
        assert_eq!(a, b);
        let c = sample_initial_noise(43, 8, 8).unwrap();
        assert_ne!(a.values(), c.values());
        assert_eq!(a.seed(), 42);
        assert_eq!(a.timestep(), DEFAULT_TIMESTEP);
    }

    #[test]
    fn sampling_statistics() {
        // n = 4 * 64 * 64 = 16384; mean sd = 1/128, bounds are about 4 sigma
        let z = sample_initial_noise(7, 64, 64).unwrap();
        let n = z.values().len() as f64;
        let mean = z.values().iter().sum::<f64>() / n;
        let var = z.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((0.95..1.05).contains(&var.sqrt()), "std {}", var.sqrt());
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(matches!(sample_initial_noise(0, 0, 4), Err(Error::InvalidDimensions { .. })));
    }

    #[test]
    fn channel_numbering() {
        assert_eq!(Channel::new(1).unwrap().index(), 0);
        assert_eq!(Channel::new(4).unwrap().index(), 3);
        assert_eq!(Channel::new(0), Err(Error::InvalidChannel(0)));
        assert_eq!(Channel::new(5), Err(Error::InvalidChannel(5)));
        assert!(ChannelPerturbation::new(2, f64::NAN).is_err());
    }

    #[test]
    fn scale_identity_and_annihilation() {
        let z = sample_initial_noise(1, 4, 5).unwrap();
        let c = Channel::new(2).unwrap();
        assert_eq!(scale_channel(&z, ChannelPerturbation { channel: c, alpha: 1.0 }), z);
        let zeroed = scale_channel(&z, ChannelPerturbation { channel: c, alpha: 0.0 });
        assert!(zeroed.channel(c).iter().all(|&v| v == 0.0));
        for other in Channel::ALL.into_iter().filter(|&o| o != c) {
            assert_eq!(zeroed.channel(other), z.channel(other));
        }
    }

    #[test]
    fn scale_composition() {
        let z = sample_initial_noise(3, 6, 6).unwrap();
        let c = Channel::LIGHT;
        let twice = scale_channel(&scale_channel(&z, ChannelPerturbation { channel: c, alpha: 2.0 }), ChannelPerturbation { channel: c, alpha: 3.0 });
        let once = scale_channel(&z, ChannelPerturbation { channel: c, alpha: 6.0 });
        assert_eq!(twice, once);
    }

    #[test]
    fn guidance_zero_and_unit_masks() {
        let z = sample_initial_noise(5, 4, 4).unwrap();
        let zero = LightMask::constant(4, 4, 0.0).unwrap();
        assert_eq!(apply_light_guidance(&z, &zero).unwrap(), z);
        let one = LightMask::constant(4, 4, 1.0).unwrap();
        let doubled = apply_light_guidance(&z, &one).unwrap();
        for (a, b) in doubled.channel(Channel::LIGHT).iter().zip(z.channel(Channel::LIGHT)) {
            assert_eq!(*a, 2.0 * b);
        }
        for c in &Channel::ALL[1..] {
            assert_eq!(doubled.channel(*c), z.channel(*c));
        }
    }

    #[test]
    fn guidance_single_cell() {
        let z = LatentNoise::from_values(1, 1, alloc::vec![-0.8, 0.1, 0.2, 0.3], 0, 1000).unwrap();
        let m = LightMask::constant(1, 1, 0.5).unwrap();
        let out = apply_light_guidance(&z, &m).unwrap();
        assert!((out.values()[0] - (-1.2)).abs() < 1e-15);
        assert_eq!(&out.values()[1..], &z.values()[1..]);
    }

    #[test]
    fn guidance_rejects_mismatched_mask() {
        let z = sample_initial_noise(5, 4, 4).unwrap();
        let m = LightMask::constant(8, 4, 0.5).unwrap();
        assert!(matches!(apply_light_guidance(&z, &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn normalize_gives_unit_std_on_lit_cells() {
        let z = sample_initial_noise(11, 16, 16).unwrap();
        let values: Vec<f64> = (0..256).map(|i| if i % 16 < 8 { 0.8 } else { 0.0 }).collect();
        let m = LightMask::from_values(16, 16, values).unwrap();
        let out = apply_light_guidance_with(&z, &m, GuidanceOptions { normalize: true }).unwrap();
        let lit: Vec<f64> = out
            .channel(Channel::LIGHT)
            .iter()
            .zip(m.values())
            .filter(|(_, &m)| m > 0.0)
            .map(|(&v, _)| v)
            .collect();
        let mean = lit.iter().sum::<f64>() / lit.len() as f64;
        let var = lit.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / lit.len() as f64;
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
        // unlit cells untouched
        for ((a, b), &mv) in out.channel(Channel::LIGHT).iter().zip(z.channel(Channel::LIGHT)).zip(m.values()) {
            if mv == 0.0 {
                assert_eq!(a, b);
            }
        }
    }
}
