//! Light-accuracy metric: find the subject, widen its box, look for the cast
//! shadow inside that region and check that the shadow falls on the side
//! opposite the requested light.
//!
//! Object and shadow detection sit behind [`ObjectDetector`] and
//! [`ShadowDetector`] so pretrained models can be plugged in. The baseline
//! detectors here are simple contrast thresholds meant for synthetic scenes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbImage;

/// Box expansion applied around detected subjects.
pub const BBOX_EXPANSION: f64 = 1.25;
/// Minimum horizontal shadow offset (normalized) for a verdict.
pub const OFFSET_THRESHOLD: f64 = 0.02;
/// Minimum shadow area as a fraction of the evaluated region.
pub const MIN_SHADOW_AREA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightDirection {
    Left,
    Right,
}

impl LightDirection {
    pub fn opposite(self) -> Self {
        match self {
            Self::Left => Self::Right,
            Self::Right => Self::Left,
        }
    }
}

/// Light direction inferred from a shadow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadowVerdict {
    Left,
    Right,
    Undetermined,
}

impl From<LightDirection> for ShadowVerdict {
    fn from(d: LightDirection) -> Self {
        match d {
            LightDirection::Left => Self::Left,
            LightDirection::Right => Self::Right,
        }
    }
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self { x_min, y_min, x_max, y_max };
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || !(x_min < x_max && y_min < y_max) {
            return Err(Error::InvalidBoundingBox);
        }
        Ok(b)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x_min <= other.x_min && self.y_min <= other.y_min && self.x_max >= other.x_max && self.y_max >= other.y_max
    }

    /// Smallest pixel rectangle covering the box.
    pub fn to_pixels(&self, width: usize, height: usize) -> Result<PixelRect> {
        let lo = |v: f64, n: usize| (libm::floor(v * n as f64).max(0.0) as usize).min(n);
        let hi = |v: f64, n: usize| (libm::ceil(v * n as f64).max(0.0) as usize).min(n);
        let rect = PixelRect {
            x0: lo(self.x_min, width),
            y0: lo(self.y_min, height),
            x1: hi(self.x_max, width),
            y1: hi(self.y_max, height),
        };
        if rect.width() == 0 || rect.height() == 0 {
            return Err(Error::EmptyRegion);
        }
        Ok(rect)
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn to_normalized(&self, width: usize, height: usize) -> Result<BoundingBox> {
        BoundingBox::new(
            self.x0 as f64 / width as f64,
            self.y0 as f64 / height as f64,
            self.x1 as f64 / width as f64,
            self.y1 as f64 / height as f64,
        )
    }
}

/// Scales width and height about the center, then clamps to the unit square.
pub fn expand_bbox(bbox: &BoundingBox, factor: f64) -> Result<BoundingBox> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::InvalidExpansion(factor));
    }
    let (cx, cy) = bbox.center();
    let hw = 0.5 * (bbox.x_max - bbox.x_min) * factor;
    let hh = 0.5 * (bbox.y_max - bbox.y_min) * factor;
    BoundingBox::new(
        (cx - hw).max(0.0),
        (cy - hh).max(0.0),
        (cx + hw).min(1.0),
        (cy + hh).min(1.0),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::LengthMismatch { expected: width * height, found: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn mirrored_horizontally(&self) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len());
        for row in self.bits.chunks_exact(self.width.max(1)) {
            bits.extend(row.iter().rev());
        }
        Self { width: self.width, height: self.height, bits }
    }
}

/// Classifies the light direction from a shadow mask covering `region`.
///
/// The shadow centroid is compared against the object center: a shadow to the
/// right means light from the left and vice versa. Offsets within
/// [`OFFSET_THRESHOLD`] or shadows smaller than [`MIN_SHADOW_AREA`] of the
/// region are undetermined.
pub fn classify_shadow_direction(
    object_box: &BoundingBox,
    shadow_mask: &BinaryMask,
    region: &BoundingBox,
) -> Result<ShadowVerdict> {
    let (w, h) = (shadow_mask.width(), shadow_mask.height());
    if w == 0 || h == 0 {
        return Err(Error::EmptyRegion);
    }
    let region_width = region.x_max - region.x_min;
    let mut count = 0usize;
    let mut sum_x = 0.0;
    for row in 0..h {
        for col in 0..w {
            if shadow_mask.get(row, col) {
                count += 1;
                sum_x += region.x_min + (col as f64 + 0.5) / w as f64 * region_width;
            }
        }
    }
    if count == 0 || (count as f64) < MIN_SHADOW_AREA * (w * h) as f64 {
        return Ok(ShadowVerdict::Undetermined);
    }
    let dx = sum_x / count as f64 - object_box.center().0;
    Ok(if dx > OFFSET_THRESHOLD {
        ShadowVerdict::Left
    } else if dx < -OFFSET_THRESHOLD {
        ShadowVerdict::Right
    } else {
        ShadowVerdict::Undetermined
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct DetectorError(pub String);

/// A detected subject. `mask`, when present, is at full image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub mask: Option<BinaryMask>,
}

pub trait ObjectDetector: Send + Sync {
    fn detect(&self, image: &RgbImage) -> core::result::Result<Option<Detection>, DetectorError>;
}

pub trait ShadowDetector: Send + Sync {
    /// Returns a shadow mask with the dimensions of `region`.
    fn detect(
        &self,
        image: &RgbImage,
        region: PixelRect,
        object: &Detection,
    ) -> core::result::Result<BinaryMask, DetectorError>;
}

fn lower_median(values: impl Iterator<Item = u8>) -> Option<u8> {
    let mut hist = [0usize; 256];
    let mut n = 0usize;
    for v in values {
        hist[usize::from(v)] += 1;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let target = (n - 1) / 2;
    let mut seen = 0;
    for (level, &c) in hist.iter().enumerate() {
        seen += c;
        if seen > target {
            return Some(level as u8);
        }
    }
    None
}

/// Largest 4-connected component at least `min_contrast` gray levels above
/// the image median.
#[derive(Debug, Clone, Copy)]
pub struct BaselineObjectDetector {
    pub min_contrast: u8,
}

impl Default for BaselineObjectDetector {
    fn default() -> Self {
        Self { min_contrast: 20 }
    }
}

impl ObjectDetector for BaselineObjectDetector {
    fn detect(&self, image: &RgbImage) -> core::result::Result<Option<Detection>, DetectorError> {
        let (w, h) = (image.width(), image.height());
        let gray = image.gray();
        let median = lower_median(gray.iter().copied()).ok_or_else(|| DetectorError("empty image".into()))?;
        let threshold = u16::from(median) + u16::from(self.min_contrast);
        let bright: Vec<bool> = gray.iter().map(|&g| u16::from(g) >= threshold).collect();

        let mut label = vec![0u32; w * h];
        let mut best: Option<(usize, u32)> = None;
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !bright[start] || label[start] != 0 {
                continue;
            }
            next += 1;
            label[start] = next;
            stack.push(start);
            let mut size = 0usize;
            while let Some(i) = stack.pop() {
                size += 1;
                let (r, c) = (i / w, i % w);
                let mut visit = |j: usize| {
                    if bright[j] && label[j] == 0 {
                        label[j] = next;
                        stack.push(j);
                    }
                };
                if c > 0 {
                    visit(i - 1);
                }
                if c + 1 < w {
                    visit(i + 1);
                }
                if r > 0 {
                    visit(i - w);
                }
                if r + 1 < h {
                    visit(i + w);
                }
            }
            if best.is_none_or(|(s, _)| size > s) {
                best = Some((size, next));
            }
        }
        let Some((_, id)) = best else {
            return Ok(None);
        };

        let mut mask = BinaryMask::empty(w, h);
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        for (i, _) in label.iter().enumerate().filter(|(_, &l)| l == id) {
            let (r, c) = (i / w, i % w);
            mask.set(r, c, true);
            x0 = x0.min(c);
            y0 = y0.min(r);
            x1 = x1.max(c + 1);
            y1 = y1.max(r + 1);
        }
        let bbox = PixelRect { x0, y0, x1, y1 }
            .to_normalized(w, h)
            .map_err(|e| DetectorError(alloc::format!("{e}")))?;
        Ok(Some(Detection { bbox, mask: Some(mask) }))
    }
}

/// Pixels at least `min_contrast` gray levels below the median of the
/// region's non-object pixels, object pixels excluded.
#[derive(Debug, Clone, Copy)]
pub struct BaselineShadowDetector {
    pub min_contrast: u8,
}

impl Default for BaselineShadowDetector {
    fn default() -> Self {
        Self { min_contrast: 25 }
    }
}

impl ShadowDetector for BaselineShadowDetector {
    fn detect(
        &self,
        image: &RgbImage,
        region: PixelRect,
        object: &Detection,
    ) -> core::result::Result<BinaryMask, DetectorError> {
        let w = image.width();
        let gray = image.gray();
        let is_object = |r: usize, c: usize| object.mask.as_ref().is_some_and(|m| m.get(r, c));
        let background = (region.y0..region.y1)
            .flat_map(|r| (region.x0..region.x1).map(move |c| (r, c)))
            .filter(|&(r, c)| !is_object(r, c))
            .map(|(r, c)| gray[r * w + c]);
        let mut mask = BinaryMask::empty(region.width(), region.height());
        let Some(median) = lower_median(background) else {
            return Ok(mask);
        };
        let Some(threshold) = median.checked_sub(self.min_contrast) else {
            return Ok(mask);
        };
        for r in region.y0..region.y1 {
            for c in region.x0..region.x1 {
                if !is_object(r, c) && gray[r * w + c] <= threshold {
                    mask.set(r - region.y0, c - region.x0, true);
                }
            }
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub id: String,
    pub image: RgbImage,
    pub direction: LightDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Classified,
    NoObject,
    DetectorFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageVerdict {
    pub image_id: String,
    pub specified_direction: LightDirection,
    pub classified_direction: ShadowVerdict,
    pub correct: bool,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightAccuracyReport {
    pub per_image: Vec<ImageVerdict>,
    /// Fraction correct among left-lit images with a determined verdict;
    /// absent when there are none.
    pub accuracy_left: Option<f64>,
    pub accuracy_right: Option<f64>,
    pub excluded_no_object: usize,
    pub excluded_undetermined: usize,
    pub detector_failures: usize,
}

impl LightAccuracyReport {
    pub fn from_verdicts(per_image: Vec<ImageVerdict>) -> Self {
        let accuracy = |dir: LightDirection| {
            let determined: Vec<&ImageVerdict> = per_image
                .iter()
                .filter(|v| v.specified_direction == dir && v.classified_direction != ShadowVerdict::Undetermined)
                .collect();
            (!determined.is_empty())
                .then(|| determined.iter().filter(|v| v.correct).count() as f64 / determined.len() as f64)
        };
        let count = |pred: &dyn Fn(&ImageVerdict) -> bool| per_image.iter().filter(|v| pred(v)).count();
        Self {
            accuracy_left: accuracy(LightDirection::Left),
            accuracy_right: accuracy(LightDirection::Right),
            excluded_no_object: count(&|v| v.outcome == Outcome::NoObject),
            excluded_undetermined: count(&|v| {
                v.outcome == Outcome::Classified && v.classified_direction == ShadowVerdict::Undetermined
            }),
            detector_failures: count(&|v| matches!(v.outcome, Outcome::DetectorFailed { .. })),
            per_image,
        }
    }
}

/// Runs detect, expand, shadow-detect and classify for one image.
pub fn evaluate_image(
    sample: &EvalSample,
    objects: &dyn ObjectDetector,
    shadows: &dyn ShadowDetector,
) -> ImageVerdict {
    let verdict = |classified: ShadowVerdict, outcome: Outcome| ImageVerdict {
        image_id: sample.id.clone(),
        specified_direction: sample.direction,
        classified_direction: classified,
        correct: classified == ShadowVerdict::from(sample.direction),
        outcome,
    };
    let failed = |message: String| verdict(ShadowVerdict::Undetermined, Outcome::DetectorFailed { message });
    let (w, h) = (sample.image.width(), sample.image.height());

    let detection = match objects.detect(&sample.image) {
        Ok(Some(d)) => d,
        Ok(None) => return verdict(ShadowVerdict::Undetermined, Outcome::NoObject),
        Err(e) => return failed(alloc::format!("object detector: {e}")),
    };
    let region = match expand_bbox(&detection.bbox, BBOX_EXPANSION).and_then(|b| b.to_pixels(w, h)) {
        Ok(r) => r,
        Err(e) => return failed(alloc::format!("region: {e}")),
    };
    let shadow = match shadows.detect(&sample.image, region, &detection) {
        Ok(m) => m,
        Err(e) => return failed(alloc::format!("shadow detector: {e}")),
    };
    let classified = region
        .to_normalized(w, h)
        .and_then(|region_box| classify_shadow_direction(&detection.bbox, &shadow, &region_box));
    match classified {
        Ok(c) => verdict(c, Outcome::Classified),
        Err(e) => failed(alloc::format!("classifier: {e}")),
    }
}

pub fn evaluate_light_accuracy(
    samples: &[EvalSample],
    objects: &dyn ObjectDetector,
    shadows: &dyn ShadowDetector,
) -> LightAccuracyReport {
    LightAccuracyReport::from_verdicts(samples.iter().map(|s| evaluate_image(s, objects, shadows)).collect())
}
