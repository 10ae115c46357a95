//! Scalar abstraction and the small vector types shared by every module.
//!
//! Geometric formulas are written against [`Real`] so the same code runs in
//! f32 and f64. The pipeline uses the f64 aliases exported from the crate
//! root; the f32 instantiation serves bulk texel math and the precision
//! agreement tests.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Floating-point scalar the geometry code is generic over.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Converts an f64 constant into this scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant convertible to scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Plain 2-vector, used for uv coordinates and screen-space math.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Real> Vec2<S> {
    pub const fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero())
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    pub fn length(self) -> S {
        self.x.hypot(self.y)
    }
}

/// Plain 3-vector for positions, free directions and linear rgb radiance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Vec3<S> {
    pub const fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn splat(v: S) -> Self {
        Self::new(v, v, v)
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length_squared(self) -> S {
        self.dot(self)
    }

    pub fn length(self) -> S {
        self.length_squared().sqrt()
    }

    /// Unit-length copy, or `None` when the vector is too short to normalize.
    pub fn normalized(self) -> Option<Self> {
        let len = self.length();
        if len <= S::of(1e-12) {
            None
        } else {
            Some(self / len)
        }
    }

    /// Componentwise product; rgb modulation.
    pub fn mul_elem(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn to_f32_array(self) -> [f32; 3] {
        [
            self.x.to_f32().expect("finite component"),
            self.y.to_f32().expect("finite component"),
            self.z.to_f32().expect("finite component"),
        ]
    }
}

impl<S: Real> Add for Vec3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Real> Sub for Vec3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Real> Neg for Vec3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Real> Mul<S> for Vec3<S> {
    type Output = Self;
    fn mul(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<S: Real> Div<S> for Vec3<S> {
    type Output = Self;
    fn div(self, s: S) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<S: Real> Add for Vec2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Real> Sub for Vec2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Real> Mul<S> for Vec2<S> {
    type Output = Self;
    fn mul(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_follows_component_formula() {
        let x = Vec3::new(1.0f64, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(y.cross(x), Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn normalized_rejects_zero() {
        assert!(Vec3::<f64>::zero().normalized().is_none());
        let v = Vec3::new(3.0f64, 0.0, 4.0).normalized().unwrap();
        assert!((v.length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_conversion_roundtrips() {
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(f64::of(0.5), 0.5f64);
    }
}
