//! Equal-area mappings between hemisphere directions, the unit disc, and the
//! square texture domain.
//!
//! A unit direction in tangent space (+z along the surface normal) projects
//! onto the unit disc with radius sqrt(2)*sin(theta/2), where theta is the
//! polar angle. The projection preserves solid-angle area: the disc measure
//! of {|a| <= r} equals r^2 of the hemisphere measure. The disc is then
//! stretched radially onto [-1,1]^2 so square texel grids waste no corners.
//! Texel addressing clamps the square coordinate half a texel inside the
//! border to keep bilinear taps inside one bucket.
//!
//! All functions are generic over [`Real`]; f64 is the reference path and
//! f32 the bulk path, which must agree within 1e-4 per component.

use crate::math::{Real, Vec3};
use thiserror::Error;

/// Tolerance on |v|^2 - 1 for unit-direction validation.
const UNIT_TOL: f64 = 1e-6;
/// Tolerance on |a|^2 - 1 for disc membership.
const DISC_TOL: f64 = 1e-6;
/// Tolerance on component overshoot for square membership.
const SQUARE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("direction ({x}, {y}, {z}) is not unit length (|v|^2 = {len_sq})")]
    NotUnit { x: f64, y: f64, z: f64, len_sq: f64 },
    #[error("cannot normalize a near-zero vector")]
    ZeroVector,
    #[error("disc point ({x}, {y}) lies outside the unit disc")]
    OutsideDisc { x: f64, y: f64 },
    #[error("square point ({x}, {y}) lies outside [-1,1]^2")]
    OutsideSquare { x: f64, y: f64 },
    #[error("direction is antipodal to the projection axis")]
    Antipode,
    #[error("direction lies below the horizon (z < 0)")]
    BelowHorizon,
    #[error("bucket resolution {0} is too small (minimum 2)")]
    BucketResTooSmall(u32),
}

fn f<S: Real>(v: S) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}

/// Unit-length direction. In tangent space +z is the surface normal, so
/// hemisphere directions have z >= 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitDir3<S> {
    x: S,
    y: S,
    z: S,
}

impl<S: Real> UnitDir3<S> {
    /// Validates that (x, y, z) is unit length within 1e-6 on |v|^2.
    pub fn new(x: S, y: S, z: S) -> Result<Self, MappingError> {
        let len_sq = x * x + y * y + z * z;
        if (len_sq - S::one()).abs() > S::of(UNIT_TOL) {
            return Err(MappingError::NotUnit {
                x: f(x),
                y: f(y),
                z: f(z),
                len_sq: f(len_sq),
            });
        }
        Ok(Self { x, y, z })
    }

    /// Normalizes an arbitrary vector; errors on near-zero input.
    pub fn from_vec(v: Vec3<S>) -> Result<Self, MappingError> {
        let n = v.normalized().ok_or(MappingError::ZeroVector)?;
        Ok(Self { x: n.x, y: n.y, z: n.z })
    }

    /// Constructor for results that are unit by algebraic identity.
    pub(crate) fn new_unchecked(x: S, y: S, z: S) -> Self {
        debug_assert!(
            (x * x + y * y + z * z - S::one()).abs() < S::of(1e-4),
            "unchecked unit direction must be unit length"
        );
        Self { x, y, z }
    }

    pub fn x(self) -> S {
        self.x
    }

    pub fn y(self) -> S {
        self.y
    }

    pub fn z(self) -> S {
        self.z
    }

    pub fn to_vec(self) -> Vec3<S> {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Point of the closed unit disc: x^2 + y^2 <= 1 (within 1e-6).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscPoint2<S> {
    x: S,
    y: S,
}

impl<S: Real> DiscPoint2<S> {
    pub fn new(x: S, y: S) -> Result<Self, MappingError> {
        if x * x + y * y > S::one() + S::of(DISC_TOL) {
            return Err(MappingError::OutsideDisc { x: f(x), y: f(y) });
        }
        Ok(Self { x, y })
    }

    pub(crate) fn new_unchecked(x: S, y: S) -> Self {
        debug_assert!(
            x * x + y * y <= S::one() + S::of(1e-4),
            "unchecked disc point must lie inside the unit disc"
        );
        Self { x, y }
    }

    pub fn x(self) -> S {
        self.x
    }

    pub fn y(self) -> S {
        self.y
    }

    pub fn radius(self) -> S {
        self.x.hypot(self.y)
    }

    /// Diagnostic azimuth, measured as atan2(y, x).
    pub fn azimuth(self) -> S {
        self.y.atan2(self.x)
    }
}

/// Point of the square texture domain: both components in [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquarePoint2<S> {
    x: S,
    y: S,
}

impl<S: Real> SquarePoint2<S> {
    /// Validates components within [-1, 1] (1e-6 overshoot tolerated and
    /// clamped away so the stored invariant is exact).
    pub fn new(x: S, y: S) -> Result<Self, MappingError> {
        let lim = S::one() + S::of(SQUARE_TOL);
        if x.abs() > lim || y.abs() > lim {
            return Err(MappingError::OutsideSquare { x: f(x), y: f(y) });
        }
        Ok(Self::clamped(x, y))
    }

    /// Clamps components into [-1, 1]; callers guarantee at most an
    /// fp-rounding overshoot.
    pub(crate) fn clamped(x: S, y: S) -> Self {
        Self {
            x: x.min(S::one()).max(-S::one()),
            y: y.min(S::one()).max(-S::one()),
        }
    }

    pub fn x(self) -> S {
        self.x
    }

    pub fn y(self) -> S {
        self.y
    }
}

/// Projects a hemisphere direction onto the unit disc (equisolid fisheye):
/// a = sqrt(2) / |(x, y, z+1)| * (x, y), so |a| = sqrt(2)*sin(theta/2).
///
/// The antipode z = -1 has no projection; directions below the horizon
/// (z < 0) fall outside the unit disc and are reported as such. Callers that
/// need a graceful grazing fallback use [`incidence_to_bucket_coord`].
pub fn project_equisolid<S: Real>(i: UnitDir3<S>) -> Result<DiscPoint2<S>, MappingError> {
    let (ax, ay) = project_raw(i)?;
    if ax * ax + ay * ay > S::one() + S::of(DISC_TOL) {
        return Err(MappingError::BelowHorizon);
    }
    Ok(DiscPoint2::new_unchecked(ax, ay))
}

/// Unchecked disc components of the equisolid projection; radius exceeds 1
/// for below-horizon directions.
fn project_raw<S: Real>(i: UnitDir3<S>) -> Result<(S, S), MappingError> {
    let zp = i.z + S::one();
    let denom = (i.x * i.x + i.y * i.y + zp * zp).sqrt();
    if denom <= S::of(1e-9) {
        return Err(MappingError::Antipode);
    }
    let s = S::SQRT_2() / denom;
    Ok((s * i.x, s * i.y))
}

/// General-normal form of the projection: sqrt(2) * normalize(i + n). Returns
/// the first two components as the disc point and the third (equal to
/// sqrt(2)*cos(theta/2)) verbatim.
///
/// The componentwise construction is only self-consistent in frames whose
/// normal is the +z axis; pipeline code transforms into tangent space first.
/// Frames where the construction leaves the unit disc are reported as domain
/// errors rather than reinterpreted.
pub fn project_equisolid_general<S: Real>(
    i: UnitDir3<S>,
    n: UnitDir3<S>,
) -> Result<(DiscPoint2<S>, S), MappingError> {
    let sum = i.to_vec() + n.to_vec();
    let len = sum.length();
    if len <= S::of(1e-9) {
        return Err(MappingError::Antipode);
    }
    let h = sum * (S::SQRT_2() / len);
    let a = DiscPoint2::new(h.x, h.y)?;
    Ok((a, h.z))
}

/// Inverse of [`project_equisolid`]:
/// i = (a_x * sqrt(2 - r^2), a_y * sqrt(2 - r^2), 1 - r^2) with r^2 = |a|^2.
///
/// The result is exactly unit length: r^2(2 - r^2) + (1 - r^2)^2 = 1.
pub fn unproject_equisolid<S: Real>(a: DiscPoint2<S>) -> UnitDir3<S> {
    let r_sq = a.x * a.x + a.y * a.y;
    let s = (S::of(2.0) - r_sq).max(S::zero()).sqrt();
    UnitDir3::new_unchecked(a.x * s, a.y * s, S::one() - r_sq)
}

/// General-normal inverse: reconstructs the halfway direction
/// a' = (a_x/sqrt(2), a_y/sqrt(2), sqrt(1 - |a|^2/2)) and reflects the normal
/// about it: i = 2*(a'.n)*a' - n. Unit for any unit n since |a'| = 1.
pub fn unproject_equisolid_general<S: Real>(a: DiscPoint2<S>, n: UnitDir3<S>) -> UnitDir3<S> {
    let half = S::one() / S::SQRT_2();
    let az_sq = S::one() - (a.x * a.x + a.y * a.y) / S::of(2.0);
    let ap = Vec3::new(a.x * half, a.y * half, az_sq.max(S::zero()).sqrt());
    let i = ap * (S::of(2.0) * ap.dot(n.to_vec())) - n.to_vec();
    UnitDir3::new_unchecked(i.x, i.y, i.z)
}

/// Stretches the unit disc radially onto [-1,1]^2:
/// b = (|a| / max(|a_x|, |a_y|)) * a. The origin maps to the origin by
/// continuous extension.
pub fn disc_to_square<S: Real>(a: DiscPoint2<S>) -> SquarePoint2<S> {
    let m = a.x.abs().max(a.y.abs());
    if m == S::zero() {
        return SquarePoint2::clamped(S::zero(), S::zero());
    }
    let scale = a.radius() / m;
    SquarePoint2::clamped(a.x * scale, a.y * scale)
}

/// Inverse of [`disc_to_square`]: a = (max(|b_x|, |b_y|) / |b|) * b, with the
/// origin fixed. The output radius equals max(|b_x|, |b_y|) <= 1.
pub fn square_to_disc<S: Real>(b: SquarePoint2<S>) -> DiscPoint2<S> {
    let m = b.x.abs().max(b.y.abs());
    if m == S::zero() {
        return DiscPoint2::new_unchecked(S::zero(), S::zero());
    }
    let scale = m / b.x.hypot(b.y);
    DiscPoint2::new_unchecked(b.x * scale, b.y * scale)
}

/// Mirror-reflection direction encoded by a disc point:
/// r = (-a_x * sqrt(2 - |a|^2), -a_y * sqrt(2 - |a|^2), 1 - |a|^2).
/// At the disc center this is the normal; at the rim it grazes (z = 0) with
/// the tangential part negated.
pub fn reflection_vector<S: Real>(a: DiscPoint2<S>) -> UnitDir3<S> {
    let r_sq = a.x * a.x + a.y * a.y;
    let s = (S::of(2.0) - r_sq).max(S::zero()).sqrt();
    UnitDir3::new_unchecked(-a.x * s, -a.y * s, S::one() - r_sq)
}

/// Clamps a square coordinate half a texel inside the border:
/// components limited to [1/n - 1, 1 - 1/n] for bucket resolution n. Keeps
/// all bilinear taps inside one bucket.
pub fn clamp_bucket_coord<S: Real>(
    b: SquarePoint2<S>,
    bucket_res: u32,
) -> Result<SquarePoint2<S>, MappingError> {
    if bucket_res < 2 {
        return Err(MappingError::BucketResTooSmall(bucket_res));
    }
    let lim = S::one() - S::one() / S::from_u32(bucket_res).expect("bucket_res fits scalar");
    Ok(SquarePoint2::clamped(
        b.x.min(lim).max(-lim),
        b.y.min(lim).max(-lim),
    ))
}

/// Full addressing chain for an incidence direction: equisolid projection,
/// square stretch, half-texel clamp. Below-horizon directions are clamped to
/// the grazing rim (disc radius 1) instead of erroring.
pub fn incidence_to_bucket_coord<S: Real>(
    i: UnitDir3<S>,
    bucket_res: u32,
) -> Result<SquarePoint2<S>, MappingError> {
    if bucket_res < 2 {
        return Err(MappingError::BucketResTooSmall(bucket_res));
    }
    let (mut ax, mut ay) = project_raw(i)?;
    let r = ax.hypot(ay);
    if r > S::one() {
        ax = ax / r;
        ay = ay / r;
    }
    let square = disc_to_square(DiscPoint2::new_unchecked(ax, ay));
    clamp_bucket_coord(square, bucket_res)
}
