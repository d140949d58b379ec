//! Vector math, photodiode orientations, ADR layout generation, and
//! segment/cylinder blockage tests.
//!
//! Room coordinates put the floor corner at the origin with z pointing up.
//! All angles are radians; degrees appear only at the CLI/config boundary.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("vertical distance must be positive, got {0}")]
    NonPositiveVerticalDistance(f64),
    #[error("horizontal distance must be non-negative, got {0}")]
    NegativeHorizontalDistance(f64),
    #[error("tier count must be in 0..=3, got {0}")]
    TiersOutOfRange(u32),
    #[error("elevation must be in [0, pi/2], got {0}")]
    ElevationOutOfRange(f64),
    #[error("source and destination points coincide")]
    CoincidentPoints,
}

/// Position or direction in room coordinates, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction; zero-length input yields zero.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return Self::new(0.0, 0.0, 0.0);
        }
        Self::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn distance(self, other: Self) -> f64 {
        (other - self).norm()
    }

    /// Horizontal (xy-plane) distance.
    pub fn horizontal_distance(self, other: Self) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// One photodiode of an angle-diversity receiver.
///
/// `azimuth` is wrapped into [0, 2π); `elevation` is measured from the
/// vertical axis and must lie in [0, π/2]. The cached `pointing` vector is
/// `[cos α sin θ, sin α sin θ, cos θ]` and has unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotodiodeOrientation {
    pub azimuth: f64,
    pub elevation: f64,
    pub pointing: Vec3,
}

impl PhotodiodeOrientation {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self, GeometryError> {
        if !(0.0..=FRAC_PI_2).contains(&elevation) {
            return Err(GeometryError::ElevationOutOfRange(elevation));
        }
        let azimuth = azimuth.rem_euclid(TAU);
        Ok(Self {
            azimuth,
            elevation,
            pointing: pointing_vector(azimuth, elevation),
        })
    }
}

/// Vertical cylinder standing on the floor, used as a body blockage model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyCylinder {
    /// Center of the cylinder base on the floor.
    pub axis_base: Vec3,
    pub height: f64,
    pub radius: f64,
}

/// Minimum half field-of-view required for an upward-looking receiver to
/// capture a source at horizontal distance `x` and vertical distance `z`:
/// `arctan(x / z)`, in [0, π/2).
pub fn min_half_fov(x: f64, z: f64) -> Result<f64, GeometryError> {
    if z <= 0.0 {
        return Err(GeometryError::NonPositiveVerticalDistance(z));
    }
    if x < 0.0 {
        return Err(GeometryError::NegativeHorizontalDistance(x));
    }
    Ok((x / z).atan())
}

/// Unit pointing vector for a photodiode at azimuth `α` and elevation `θ`
/// (from the vertical axis): `[cos α sin θ, sin α sin θ, cos θ]`.
///
/// Angles outside their principal ranges are accepted; the trigonometric
/// evaluation wraps them naturally.
pub fn pointing_vector(azimuth: f64, elevation: f64) -> Vec3 {
    let (sin_a, cos_a) = azimuth.sin_cos();
    let (sin_e, cos_e) = elevation.sin_cos();
    Vec3::new(cos_a * sin_e, sin_a * sin_e, cos_e)
}

/// Per-tier elevation of the photodiodes, from the vertical axis.
const TIER_ELEVATION_DEG: [f64; 3] = [30.0, 60.0, 90.0];
/// Per-tier azimuthal step between consecutive photodiodes.
const TIER_AZIMUTH_STEP_DEG: [f64; 3] = [60.0, 30.0, 20.0];

/// Photodiode layout of an angle-diversity receiver with `tiers` rings.
///
/// Tier 0 is a single upward photodiode. Each tier t ≥ 1 adds a ring of
/// `360° / step` photodiodes at its elevation, all rings starting at
/// azimuth 0. Layouts are nested: the tier-k layout extends the
/// tier-(k−1) layout, giving N = 1, 7, 19, 37 photodiodes for tiers 0..=3.
pub fn adr_layout(tiers: u32) -> Result<Vec<PhotodiodeOrientation>, GeometryError> {
    if tiers > 3 {
        return Err(GeometryError::TiersOutOfRange(tiers));
    }
    let mut layout = vec![PhotodiodeOrientation::new(0.0, 0.0)?];
    for tier in 0..tiers as usize {
        let elevation = TIER_ELEVATION_DEG[tier].to_radians();
        let step_deg = TIER_AZIMUTH_STEP_DEG[tier];
        let count = (360.0 / step_deg).round() as usize;
        for i in 0..count {
            let azimuth = (i as f64 * step_deg).to_radians();
            layout.push(PhotodiodeOrientation::new(azimuth, elevation)?);
        }
    }
    Ok(layout)
}

/// Cosine of the angle between `normal` and the direction from `src` to
/// `dst`. `normal` must be a unit vector.
pub fn cos_angle_between(src: Vec3, dst: Vec3, normal: Vec3) -> Result<f64, GeometryError> {
    let dir = dst - src;
    let n = dir.norm();
    if n == 0.0 {
        return Err(GeometryError::CoincidentPoints);
    }
    Ok(normal.dot(dir) * (1.0 / n))
}

/// True iff the open segment (p0, p1) passes through the solid finite
/// cylinder `body` (lateral surface or caps). Endpoints lying exactly on
/// the surface do not count as blocked, so a device touching its own
/// clearance cylinder is never self-occluded by numerical noise.
pub fn segment_blocked(p0: Vec3, p1: Vec3, body: &BodyCylinder) -> bool {
    let d = p1 - p0;

    // Parameter interval where the line is inside the infinite cylinder
    // of radius r around the vertical axis.
    let rel_x = p0.x - body.axis_base.x;
    let rel_y = p0.y - body.axis_base.y;
    let a = d.x * d.x + d.y * d.y;
    let (mut t_lo, mut t_hi) = if a == 0.0 {
        if rel_x * rel_x + rel_y * rel_y <= body.radius * body.radius {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            return false;
        }
    } else {
        let b = rel_x * d.x + rel_y * d.y;
        let c = rel_x * rel_x + rel_y * rel_y - body.radius * body.radius;
        let disc = b * b - a * c;
        if disc < 0.0 {
            return false;
        }
        let sqrt_disc = disc.sqrt();
        ((-b - sqrt_disc) / a, (-b + sqrt_disc) / a)
    };

    // Clip against the slab between the base and top caps.
    let z_bot = body.axis_base.z;
    let z_top = body.axis_base.z + body.height;
    if d.z == 0.0 {
        if p0.z < z_bot || p0.z > z_top {
            return false;
        }
    } else {
        let mut s0 = (z_bot - p0.z) / d.z;
        let mut s1 = (z_top - p0.z) / d.z;
        if s0 > s1 {
            std::mem::swap(&mut s0, &mut s1);
        }
        t_lo = t_lo.max(s0);
        t_hi = t_hi.min(s1);
    }

    // Blocked iff the remaining interval meets the open (0, 1).
    t_lo <= t_hi && t_hi > 0.0 && t_lo < 1.0
}
