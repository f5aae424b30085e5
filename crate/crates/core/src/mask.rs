//! Light masks from user-placed light sources.
//!
//! Coordinates are normalized to the unit square: `(0, 0)` is the top-left
//! corner of the frame and `(1, 1)` the bottom-right. Distances are measured
//! in fractions of the frame diagonal, so a single [`LightSpec`] renders the
//! same mask at preview, image and latent resolution.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::resample_bilinear;

/// Sources may sit up to half a frame outside the image.
pub const COORD_MIN: f64 = -0.5;
pub const COORD_MAX: f64 = 1.5;
pub const RADIUS_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn checked(self) -> Result<Self> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        Ok(Self {
            x: self.x.clamp(COORD_MIN, COORD_MAX),
            y: self.y.clamp(COORD_MIN, COORD_MAX),
        })
    }

    fn mirrored(self) -> Self {
        Self { x: 1.0 - self.x, y: self.y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightSource {
    Point(Point),
    Segment(Point, Point),
}

/// A validated light condition: source geometry plus falloff radius.
///
/// `radius` is a fraction of the frame diagonal in `(0, 4]`. Coordinates
/// outside `[-0.5, 1.5]` are clamped into that range on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LightSpecWire", into = "LightSpecWire")]
pub struct LightSpec {
    source: LightSource,
    radius: f64,
}

impl LightSpec {
    pub fn point(at: Point, radius: f64) -> Result<Self> {
        Self::new(LightSource::Point(at), radius)
    }

    pub fn segment(a: Point, b: Point, radius: f64) -> Result<Self> {
        Self::new(LightSource::Segment(a, b), radius)
    }

    pub fn new(source: LightSource, radius: f64) -> Result<Self> {
        // written as a negated range check so NaN is rejected too
        if !(radius > 0.0 && radius <= RADIUS_MAX) {
            return Err(Error::InvalidRadius(radius));
        }
        let source = match source {
            LightSource::Point(p) => LightSource::Point(p.checked()?),
            LightSource::Segment(a, b) => LightSource::Segment(a.checked()?, b.checked()?),
        };
        Ok(Self { source, radius })
    }

    pub fn source(&self) -> LightSource {
        self.source
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Reflects the source across the vertical midline `x = 0.5`.
    pub fn mirrored_horizontally(&self) -> Self {
        let source = match self.source {
            LightSource::Point(p) => LightSource::Point(p.mirrored()),
            LightSource::Segment(a, b) => LightSource::Segment(a.mirrored(), b.mirrored()),
        };
        Self { source, radius: self.radius }
    }

    /// Distance from a normalized position to the source, in diagonal units.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let raw = match self.source {
            LightSource::Point(p) => libm::hypot(x - p.x, y - p.y),
            LightSource::Segment(a, b) => point_segment_distance(x, y, a, b),
        };
        raw / SQRT_2
    }

    /// Linear falloff: 1 at the source, 0 at and beyond the radius.
    pub fn intensity_at(&self, x: f64, y: f64) -> f64 {
        falloff(self.distance_to(x, y), self.radius)
    }
}

#[inline]
fn falloff(distance: f64, radius: f64) -> f64 {
    (1.0 - distance / radius).max(0.0)
}

fn point_segment_distance(x: f64, y: f64, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return libm::hypot(x - a.x, y - a.y);
    }
    let t = (((x - a.x) * dx + (y - a.y) * dy) / len_sq).clamp(0.0, 1.0);
    libm::hypot(x - (a.x + t * dx), y - (a.y + t * dy))
}

/// JSON shape: `{kind, ax, ay, bx?, by?, radius}`. Unknown fields are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSpecWire {
    pub kind: SourceKind,
    pub ax: f64,
    pub ay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by: Option<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Point,
    Segment,
}

impl TryFrom<LightSpecWire> for LightSpec {
    type Error = Error;

    fn try_from(wire: LightSpecWire) -> Result<Self> {
        let a = Point::new(wire.ax, wire.ay);
        let source = match (wire.kind, wire.bx, wire.by) {
            (SourceKind::Point, None, None) => LightSource::Point(a),
            (SourceKind::Point, _, _) => {
                return Err(Error::InvalidRequest("point source must not carry bx/by".into()))
            }
            (SourceKind::Segment, Some(bx), Some(by)) => LightSource::Segment(a, Point::new(bx, by)),
            (SourceKind::Segment, _, _) => return Err(Error::MissingSegmentEnd),
        };
        LightSpec::new(source, wire.radius)
    }
}

impl From<LightSpec> for LightSpecWire {
    fn from(spec: LightSpec) -> Self {
        let (kind, a, b) = match spec.source {
            LightSource::Point(a) => (SourceKind::Point, a, None),
            LightSource::Segment(a, b) => (SourceKind::Segment, a, Some(b)),
        };
        Self {
            kind,
            ax: a.x,
            ay: a.y,
            bx: b.map(|p| p.x),
            by: b.map(|p| p.y),
            radius: spec.radius,
        }
    }
}

/// A light mask: row-major values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LightMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LightMask {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::LengthMismatch { expected: width * height, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::MaskOutOfRange);
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_values(width, height, alloc::vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mirrored_horizontally(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(self.width) {
            values.extend(row.iter().rev());
        }
        Self { width: self.width, height: self.height, values }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

/// Normalized center of pixel `(row, col)` in a `width x height` grid.
#[inline]
pub fn pixel_center(row: usize, col: usize, width: usize, height: usize) -> (f64, f64) {
    ((col as f64 + 0.5) / width as f64, (row as f64 + 0.5) / height as f64)
}

/// Per-pixel distance to the light source in diagonal units, row-major.
pub fn distance_field(spec: &LightSpec, width: usize, height: usize) -> Result<Vec<f64>> {
    check_dims(width, height)?;
    let mut out = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (x, y) = pixel_center(row, col, width, height);
            out.push(spec.distance_to(x, y));
        }
    }
    Ok(out)
}

pub fn make_light_mask(spec: &LightSpec, width: usize, height: usize) -> Result<LightMask> {
    let values = distance_field(spec, width, height)?
        .into_iter()
        .map(|d| falloff(d, spec.radius))
        .collect();
    Ok(LightMask { width, height, values })
}

/// Bilinear resampling to a new resolution; values stay within `[0, 1]`.
pub fn resample_mask(mask: &LightMask, new_width: usize, new_height: usize) -> Result<LightMask> {
    check_dims(new_width, new_height)?;
    let values = resample_bilinear(&mask.values, mask.width, mask.height, new_width, new_height)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(LightMask { width: new_width, height: new_height, values })
}
