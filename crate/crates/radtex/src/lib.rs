//! Bake-and-render pipeline for view-dependent surface radiance.
//!
//! A baker precomputes ray-traced radiance into per-texel hemispherical
//! "bucket" textures over a surface patch; a renderer then reproduces
//! view-dependent imagery with plain 2D texture lookups. Modules:
//!
//! - [`math`]: scalar abstraction (f32/f64) and small vector types.
//! - [`mapping`]: equal-area hemisphere <-> disc <-> square mappings.
//! - [`atlas`]: bucket-grid texture storage, sampling, and the RADX container.
//! - [`tracer`]: Whitted-style ray tracer over spheres, planes and boxes.
//! - [`baker`]: fills an atlas from a scene for a surface patch.
//! - [`synthesizer`]: rasterizes meshes shaded by atlas lookups; ground truth.
//! - [`codec`]: lossless and quantized atlas compression.
//! - [`cli`]: command-line surface and the scene text format.

pub mod atlas;
pub mod baker;
pub mod cli;
pub mod codec;
pub mod imageio;
pub mod mapping;
pub mod math;
pub mod synthesizer;
pub mod tracer;

/// f64 vector used by the pipeline's reference math path.
pub type Vec3 = math::Vec3<f64>;
/// f64 2-vector (uv coordinates, screen-space math).
pub type Vec2 = math::Vec2<f64>;
/// f64 unit direction.
pub type UnitDir3 = mapping::UnitDir3<f64>;
/// f64 point of the unit disc.
pub type DiscPoint2 = mapping::DiscPoint2<f64>;
/// f64 point of the [-1,1]^2 square domain.
pub type SquarePoint2 = mapping::SquarePoint2<f64>;
