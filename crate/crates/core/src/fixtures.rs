//! Synthetic shadow scenes with a known light direction, for exercising the
//! light-accuracy metric without pretrained detectors.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::eval::{EvalSample, LightDirection};
use crate::image::RgbImage;

/// Uniform sample in `[lo, hi)`.
fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * unit
}

/// A textured backdrop with one bright disk-shaped subject and an elliptical
/// cast shadow on the side away from `light`.
pub fn shadow_scene(seed: u64, light: LightDirection, width: usize, height: usize) -> RgbImage {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let side = width.min(height) as f64;
    let background = uniform(&mut rng, 90.0, 130.0);
    let subject = background + uniform(&mut rng, 60.0, 100.0);
    let shade = background - uniform(&mut rng, 45.0, 70.0);
    let cx = uniform(&mut rng, 0.38, 0.62) * width as f64;
    let cy = uniform(&mut rng, 0.40, 0.50) * height as f64;
    let radius = uniform(&mut rng, 0.14, 0.20) * side;
    let away = match light {
        LightDirection::Left => 1.0,
        LightDirection::Right => -1.0,
    };
    let (sx, sy) = (cx + away * 0.95 * radius, cy + 0.55 * radius);
    let (srx, sry) = (0.9 * radius, 0.45 * radius);

    let mut pixels = Vec::with_capacity(3 * width * height);
    for row in 0..height {
        for col in 0..width {
            let (x, y) = (col as f64 + 0.5, row as f64 + 0.5);
            let texture = uniform(&mut rng, -4.0, 4.0);
            let in_subject = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius;
            let (ex, ey) = ((x - sx) / srx, (y - sy) / sry);
            let in_shadow = ex * ex + ey * ey <= 1.0;
            let level = if in_subject {
                subject
            } else if in_shadow {
                shade
            } else {
                background
            } + texture;
            let v = libm::round(level.clamp(0.0, 255.0)) as u8;
            pixels.extend_from_slice(&[v, v, v]);
        }
    }
    RgbImage::new(width, height, pixels).expect("sized from loop bounds")
}

/// `per_direction` left-lit scenes followed by `per_direction` right-lit ones.
pub fn shadow_dataset(per_direction: usize, width: usize, height: usize) -> Vec<EvalSample> {
    [LightDirection::Left, LightDirection::Right]
        .into_iter()
        .enumerate()
        .flat_map(|(d, direction)| {
            (0..per_direction).map(move |i| {
                let seed = (d * per_direction + i) as u64;
                EvalSample {
                    id: format!("{}-{i:04}", direction_label(direction)),
                    image: shadow_scene(seed, direction, width, height),
                    direction,
                }
            })
        })
        .collect()
}

pub fn direction_label(direction: LightDirection) -> &'static str {
    match direction {
        LightDirection::Left => "left",
        LightDirection::Right => "right",
    }
}
