//! The backend contract driven by the guidance pipeline, plus a deterministic
//! mock decoder.
//!
//! A backend receives the full request and an already-prepared initial latent.
//! Light guidance happens before the backend is called and touches nothing
//! but the initial noise, so structural conditioning (edge maps and the like)
//! is passed through as an opaque payload.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::resample_bilinear;
use crate::image::RgbImage;
use crate::latent::{apply_light_guidance, sample_initial_noise, Channel, LatentNoise};
use crate::mask::{make_light_mask, resample_mask, LightSource, LightSpec};

pub const DEFAULT_STEPS: u32 = 50;
pub const DEFAULT_GUIDANCE_SCALE: f64 = 7.5;
/// Pixel-to-latent downsampling factor of SD-family VAEs.
pub const VAE_SCALE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSize {
    pub width: u32,
    pub height: u32,
}

impl OutputSize {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Opaque conditioning payload (for example an edge map for a ControlNet
/// adapter). Serialized as base64. The pipeline never inspects it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructuralCondition(pub Vec<u8>);

impl Serialize for StructuralCondition {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&base64::engine::general_purpose::STANDARD.encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for StructuralCondition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        base64::engine::general_purpose::STANDARD
            .decode(text.as_bytes())
            .map(StructuralCondition)
            .map_err(serde::de::Error::custom)
    }
}

fn default_steps() -> u32 {
    DEFAULT_STEPS
}

fn default_guidance_scale() -> f64 {
    DEFAULT_GUIDANCE_SCALE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRequest {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light: Option<LightSpec>,
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: u32,
    #[serde(default = "default_guidance_scale")]
    pub guidance_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_condition: Option<StructuralCondition>,
    pub output_size: OutputSize,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, seed: u64, output_size: OutputSize) -> Self {
        Self {
            prompt: prompt.into(),
            negative_prompt: None,
            light: None,
            seed,
            steps: DEFAULT_STEPS,
            guidance_scale: DEFAULT_GUIDANCE_SCALE,
            structural_condition: None,
            output_size,
        }
    }

    pub fn with_light(mut self, light: LightSpec) -> Self {
        self.light = Some(light);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidRequest("steps must be >= 1".into()));
        }
        if !(self.guidance_scale >= 0.0 && self.guidance_scale.is_finite()) {
            return Err(Error::InvalidRequest("guidance_scale must be finite and >= 0".into()));
        }
        latent_dims(self.output_size).map(|_| ())
    }

    /// SHA-256 over a canonical binary encoding of every field, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"lgtm-request-v1");
        put_bytes(&mut h, self.prompt.as_bytes());
        match &self.negative_prompt {
            Some(n) => {
                h.update([1]);
                put_bytes(&mut h, n.as_bytes());
            }
            None => h.update([0]),
        }
        match &self.light {
            Some(spec) => {
                let (kind, a, b) = match spec.source() {
                    LightSource::Point(a) => (1u8, a, a),
                    LightSource::Segment(a, b) => (2u8, a, b),
                };
                h.update([kind]);
                for v in [a.x, a.y, b.x, b.y, spec.radius()] {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
            None => h.update([0]),
        }
        h.update(self.seed.to_le_bytes());
        h.update(self.steps.to_le_bytes());
        h.update(self.guidance_scale.to_bits().to_le_bytes());
        match &self.structural_condition {
            Some(c) => {
                h.update([1]);
                put_bytes(&mut h, &c.0);
            }
            None => h.update([0]),
        }
        h.update(self.output_size.width.to_le_bytes());
        h.update(self.output_size.height.to_le_bytes());
        let mut out = String::with_capacity(64);
        for byte in h.finalize() {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

fn put_bytes(h: &mut Sha256, bytes: &[u8]) {
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(bytes);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImage {
    pub image: RgbImage,
    pub request_fingerprint: String,
}

impl GeneratedImage {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }
}

/// Latent grid `(height, width)` for an output size: both sides divided by 8.
pub fn latent_dims(size: OutputSize) -> Result<(usize, usize)> {
    let ok = |v: u32| v > 0 && v.is_multiple_of(VAE_SCALE);
    if !(ok(size.width) && ok(size.height)) {
        return Err(Error::NotMultipleOf8 { width: size.width, height: size.height });
    }
    Ok(((size.height / VAE_SCALE) as usize, (size.width / VAE_SCALE) as usize))
}

/// A text-to-image backend that starts from externally supplied initial
/// latents.
///
/// Implementations must be deterministic for a fixed `(request, noise)` pair
/// when they claim to be, and must forward `structural_condition` untouched.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn latent_dims(&self, size: OutputSize) -> Result<(usize, usize)> {
        latent_dims(size)
    }

    fn denoise(&self, request: &GenerationRequest, initial_noise: &LatentNoise) -> Result<GeneratedImage>;
}

impl<B: Backend + ?Sized> Backend for alloc::boxed::Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn latent_dims(&self, size: OutputSize) -> Result<(usize, usize)> {
        (**self).latent_dims(size)
    }

    fn denoise(&self, request: &GenerationRequest, initial_noise: &LatentNoise) -> Result<GeneratedImage> {
        (**self).denoise(request, initial_noise)
    }
}

impl<B: Backend + ?Sized> Backend for alloc::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn latent_dims(&self, size: OutputSize) -> Result<(usize, usize)> {
        (**self).latent_dims(size)
    }

    fn denoise(&self, request: &GenerationRequest, initial_noise: &LatentNoise) -> Result<GeneratedImage> {
        (**self).denoise(request, initial_noise)
    }
}

/// Direct latent decoder standing in for a diffusion model.
///
/// Luminance is `clamp(128 + 40 * u1, 0, 255)` rounded to a gray level, where
/// `u1` is channel 1 bilinearly upsampled to output resolution. Channels 2-4
/// drive chroma along two integer directions in the null space of the Rec.601
/// luma weights, so they never change the luma of a pixel.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl MockBackend {
    pub const LUMA_OFFSET: f64 = 128.0;
    pub const LUMA_GAIN: f64 = 40.0;
    const CHROMA_GAIN: f64 = 2.0;
    // 299*15 - 587*9 + 114*7 = 0 and 299*(-11) - 587 + 114*34 = 0
    const CHROMA_A: [i32; 3] = [15, -9, 7];
    const CHROMA_B: [i32; 3] = [-11, -1, 34];

    pub fn new() -> Self {
        Self
    }

    pub fn decode(&self, noise: &LatentNoise, width: usize, height: usize) -> RgbImage {
        let up = |c: u8| {
            let channel = Channel::new(c).expect("static channel");
            resample_bilinear(noise.channel(channel), noise.width(), noise.height(), width, height)
        };
        let (u1, u2, u3, u4) = (up(1), up(2), up(3), up(4));
        let mut pixels = Vec::with_capacity(3 * width * height);
        for i in 0..width * height {
            let y = libm::round((Self::LUMA_OFFSET + Self::LUMA_GAIN * u1[i]).clamp(0.0, 255.0)) as i32;
            let a = Self::chroma_step(u2[i] + 0.5 * u4[i]);
            let b = Self::chroma_step(u3[i] - 0.5 * u4[i]);
            pixels.extend_from_slice(&Self::chroma_pixel(y, a, b));
        }
        RgbImage::new(width, height, pixels).expect("decoder output sized from inputs")
    }

    fn chroma_step(v: f64) -> i32 {
        // beyond +-32 steps every pixel saturates anyway
        libm::round((Self::CHROMA_GAIN * v).clamp(-32.0, 32.0)) as i32
    }

    /// Gray level `y` offset along the chroma directions, shrunk toward gray
    /// until every component fits in a byte.
    fn chroma_pixel(y: i32, mut a: i32, mut b: i32) -> [u8; 3] {
        loop {
            let rgb: [i32; 3] = core::array::from_fn(|k| y + a * Self::CHROMA_A[k] + b * Self::CHROMA_B[k]);
            if rgb.iter().all(|v| (0..=255).contains(v)) {
                return rgb.map(|v| v as u8);
            }
            if a.abs() >= b.abs() {
                a -= a.signum();
            } else {
                b -= b.signum();
            }
        }
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn denoise(&self, request: &GenerationRequest, initial_noise: &LatentNoise) -> Result<GeneratedImage> {
        let (h, w) = self.latent_dims(request.output_size)?;
        if initial_noise.height() != h || initial_noise.width() != w {
            return Err(Error::DimensionMismatch {
                expected_width: w,
                expected_height: h,
                found_width: initial_noise.width(),
                found_height: initial_noise.height(),
            });
        }
        let size = request.output_size;
        Ok(GeneratedImage {
            image: self.decode(initial_noise, size.width as usize, size.height as usize),
            request_fingerprint: request.fingerprint(),
        })
    }
}

/// Applies the request's light (if any) to a given initial latent. The mask is
/// rendered at output resolution and resampled down to the latent grid.
pub fn guide_noise(request: &GenerationRequest, noise: &LatentNoise) -> Result<LatentNoise> {
    let Some(spec) = &request.light else {
        return Ok(noise.clone());
    };
    light_mask_for_latent(spec, request.output_size, noise.width(), noise.height())
        .and_then(|mask| apply_light_guidance(noise, &mask))
}

pub fn light_mask_for_latent(
    spec: &LightSpec,
    output_size: OutputSize,
    latent_width: usize,
    latent_height: usize,
) -> Result<crate::mask::LightMask> {
    let full = make_light_mask(spec, output_size.width as usize, output_size.height as usize)?;
    resample_mask(&full, latent_width, latent_height)
}

/// Samples the seeded initial noise for a request and applies its light.
pub fn prepare_initial_noise<B: Backend + ?Sized>(request: &GenerationRequest, backend: &B) -> Result<LatentNoise> {
    request.validate()?;
    let (h, w) = backend.latent_dims(request.output_size)?;
    let noise = sample_initial_noise(request.seed, h, w)?;
    guide_noise(request, &noise)
}

pub fn generate<B: Backend + ?Sized>(request: &GenerationRequest, backend: &B) -> Result<GeneratedImage> {
    let noise = prepare_initial_noise(request, backend)?;
    backend.denoise(request, &noise)
}

/// Like [`generate`] but starting from caller-supplied noise instead of the
/// seeded sample.
pub fn generate_with_noise<B: Backend + ?Sized>(
    request: &GenerationRequest,
    noise: &LatentNoise,
    backend: &B,
) -> Result<GeneratedImage> {
    request.validate()?;
    let guided = guide_noise(request, noise)?;
    backend.denoise(request, &guided)
}
