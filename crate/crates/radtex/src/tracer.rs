//! Whitted-style ray tracer over spheres, planes and axis-aligned boxes.
//!
//! Lambert surfaces gather direct light from point lights with inverse-square
//! falloff and binary shadow rays; mirrors recurse along the reflected ray up
//! to a fixed depth, falling back to the environment along the reflected
//! direction when the budget is exhausted. Misses return the environment: a
//! procedural checker sky or black. Everything is pure f64 arithmetic with a
//! deterministic first-hit tie-break (primitive list order), so identical
//! rays always produce bitwise identical radiance.

use crate::math::Vec3 as GVec3;
use thiserror::Error;

type Vec3 = GVec3<f64>;

/// Recursion budget for mirror bounces.
pub const DEFAULT_MAX_DEPTH: u32 = 4;
/// Offset along the shading normal to avoid self-intersection.
pub const SELF_INTERSECT_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("sphere radius {0} must be positive")]
    NonPositiveRadius(f64),
    #[error("box min must be strictly below max on every axis")]
    DegenerateBox,
    #[error("plane normal must be unit length (normalize at load)")]
    BadPlaneNormal,
    #[error("material index {index} out of range ({count} materials)")]
    BadMaterialIndex { index: usize, count: usize },
    #[error("light intensity components must be non-negative")]
    NegativeIntensity,
    #[error("ray direction cannot be normalized")]
    BadRayDirection,
    #[error("ray t range [{t_min}, {t_max}) is invalid")]
    BadRayRange { t_min: f64, t_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Material {
    /// Diffuse: albedo/pi times the direct light sum.
    Lambert { albedo: Vec3 },
    /// Perfect mirror: tint modulates the reflected radiance.
    Mirror { tint: Vec3 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Plane { point: Vec3, normal: Vec3 },
    Aabb { min: Vec3, max: Vec3 },
}

impl Shape {
    /// Plane through `point`; `normal` is normalized here so the stored
    /// invariant is unit length.
    pub fn plane(point: Vec3, normal: Vec3) -> Result<Self, SceneError> {
        let normal = normal.normalized().ok_or(SceneError::BadPlaneNormal)?;
        Ok(Shape::Plane { point, normal })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    /// Index into [`Scene::materials`].
    pub material: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLight {
    pub position: Vec3,
    /// Radiant intensity; irradiance falls off with inverse squared distance.
    pub intensity: Vec3,
}

/// Sky seen by rays that escape the scene.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Environment {
    /// No sky: escaped rays carry zero radiance.
    #[default]
    Black,
    /// Procedural 16x8 checker over the direction sphere.
    CheckerSky,
}

pub const SKY_BRIGHT: Vec3 = Vec3::new(0.9, 0.9, 0.9);
pub const SKY_DEEP: Vec3 = Vec3::new(0.1, 0.2, 0.4);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scene {
    pub materials: Vec<Material>,
    pub primitives: Vec<Primitive>,
    pub lights: Vec<PointLight>,
    pub environment: Environment,
}

impl Scene {
    /// Rejects non-finite inputs and degenerate geometry before any tracing.
    pub fn validate(&self) -> Result<(), SceneError> {
        for m in &self.materials {
            let v = match m {
                Material::Lambert { albedo } => albedo,
                Material::Mirror { tint } => tint,
            };
            finite(*v, "material color")?;
        }
        for p in &self.primitives {
            if p.material >= self.materials.len() {
                return Err(SceneError::BadMaterialIndex {
                    index: p.material,
                    count: self.materials.len(),
                });
            }
            match p.shape {
                Shape::Sphere { center, radius } => {
                    finite(center, "sphere center")?;
                    if !radius.is_finite() {
                        return Err(SceneError::NonFinite("sphere radius"));
                    }
                    if radius <= 0.0 {
                        return Err(SceneError::NonPositiveRadius(radius));
                    }
                }
                Shape::Plane { point, normal } => {
                    finite(point, "plane point")?;
                    finite(normal, "plane normal")?;
                    if (normal.length_squared() - 1.0).abs() > 1e-6 {
                        return Err(SceneError::BadPlaneNormal);
                    }
                }
                Shape::Aabb { min, max } => {
                    finite(min, "box min")?;
                    finite(max, "box max")?;
                    if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                        return Err(SceneError::DegenerateBox);
                    }
                }
            }
        }
        for l in &self.lights {
            finite(l.position, "light position")?;
            finite(l.intensity, "light intensity")?;
            if l.intensity.x < 0.0 || l.intensity.y < 0.0 || l.intensity.z < 0.0 {
                return Err(SceneError::NegativeIntensity);
            }
        }
        Ok(())
    }
}

fn finite(v: Vec3, what: &'static str) -> Result<(), SceneError> {
    if v.x.is_finite() && v.y.is_finite() && v.z.is_finite() {
        Ok(())
    } else {
        Err(SceneError::NonFinite(what))
    }
}

/// Ray with a unit direction and a half-open parameter range [t_min, t_max).
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    origin: Vec3,
    dir: Vec3,
    t_min: f64,
    t_max: f64,
}

impl Ray {
    /// Normalizes `dir`; errors on a near-zero direction or an empty range.
    pub fn with_range(origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Result<Self, SceneError> {
        let dir = dir.normalized().ok_or(SceneError::BadRayDirection)?;
        if !(t_min >= 0.0 && t_min < t_max) {
            return Err(SceneError::BadRayRange { t_min, t_max });
        }
        Ok(Self {
            origin,
            dir,
            t_min,
            t_max,
        })
    }

    /// Unbounded ray starting at t = 0.
    pub fn new(origin: Vec3, dir: Vec3) -> Result<Self, SceneError> {
        Self::with_range(origin, dir, 0.0, f64::INFINITY)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn dir(&self) -> Vec3 {
        self.dir
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// First intersection along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    /// Unit shading normal, flipped to face the ray origin side.
    pub normal: Vec3,
    /// Index into [`Scene::materials`].
    pub material: usize,
}

/// Nearest hit across all primitives; ties keep the earliest primitive in
/// list order, making the result deterministic.
pub fn intersect_scene(scene: &Scene, ray: &Ray) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for prim in &scene.primitives {
        let range_max = best.map_or(ray.t_max, |h| h.t);
        if let Some((t, outward)) = intersect_shape(&prim.shape, ray, range_max) {
            // Strict < via range_max shrink: equal-t hits keep the earlier
            // primitive.
            let point = ray.at(t);
            let normal = if outward.dot(ray.dir) > 0.0 {
                -outward
            } else {
                outward
            };
            best = Some(Hit {
                t,
                point,
                normal,
                material: prim.material,
            });
        }
    }
    best
}

/// Returns (t, geometric outward normal) of the nearest in-range hit, with
/// t in [ray.t_min, range_max).
fn intersect_shape(shape: &Shape, ray: &Ray, range_max: f64) -> Option<(f64, Vec3)> {
    match *shape {
        Shape::Sphere { center, radius } => {
            let oc = ray.origin - center;
            let b = oc.dot(ray.dir);
            let c = oc.length_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            let mut t = -b - sq;
            if t < ray.t_min {
                t = -b + sq;
            }
            if t < ray.t_min || t >= range_max {
                return None;
            }
            let normal = (ray.at(t) - center) / radius;
            Some((t, normal))
        }
        Shape::Plane { point, normal } => {
            let denom = normal.dot(ray.dir);
            if denom.abs() < 1e-12 {
                return None;
            }
            let t = (point - ray.origin).dot(normal) / denom;
            if t < ray.t_min || t >= range_max {
                return None;
            }
            Some((t, normal))
        }
        Shape::Aabb { min, max } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut near_axis = 0usize;
            let mut far_axis = 0usize;
            let o = [ray.origin.x, ray.origin.y, ray.origin.z];
            let d = [ray.dir.x, ray.dir.y, ray.dir.z];
            let lo = [min.x, min.y, min.z];
            let hi = [max.x, max.y, max.z];
            for axis in 0..3 {
                if d[axis].abs() < 1e-300 {
                    if o[axis] < lo[axis] || o[axis] > hi[axis] {
                        return None;
                    }
                    continue;
                }
                let inv = 1.0 / d[axis];
                let (t0, t1) = {
                    let a = (lo[axis] - o[axis]) * inv;
                    let b = (hi[axis] - o[axis]) * inv;
                    if a <= b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                };
                if t0 > t_near {
                    t_near = t0;
                    near_axis = axis;
                }
                if t1 < t_far {
                    t_far = t1;
                    far_axis = axis;
                }
            }
            if t_near > t_far {
                return None;
            }
            let (t, axis) = if t_near >= ray.t_min {
                (t_near, near_axis)
            } else {
                (t_far, far_axis)
            };
            if t < ray.t_min || t >= range_max {
                return None;
            }
            // Outward normal of the face the chosen t lies on.
            let p = ray.at(t);
            let coords = [p.x, p.y, p.z];
            let sign = if (coords[axis] - lo[axis]).abs() <= (coords[axis] - hi[axis]).abs() {
                -1.0
            } else {
                1.0
            };
            let mut n = [0.0; 3];
            n[axis] = sign;
            Some((t, Vec3::new(n[0], n[1], n[2])))
        }
    }
}

/// Procedural checker sky: 16 azimuth cells by 8 elevation cells, alternating
/// bright (0.9, 0.9, 0.9) and deep blue (0.1, 0.2, 0.4). `dir` must be unit.
pub fn environment_radiance(environment: &Environment, dir: Vec3) -> Vec3 {
    match environment {
        Environment::Black => Vec3::zero(),
        Environment::CheckerSky => {
            // atan2(0, 0) is defined as 0, which f64::atan2 satisfies.
            let ue = dir.z.atan2(dir.x) / std::f64::consts::TAU + 0.5;
            let ve = dir.y * 0.5 + 0.5;
            let cu = (ue.min(1.0 - 1e-12) * 16.0).floor() as i64;
            let cv = (ve.min(1.0 - 1e-12) * 8.0).floor() as i64;
            if (cu + cv) % 2 == 1 {
                SKY_BRIGHT
            } else {
                SKY_DEEP
            }
        }
    }
}

/// Binary visibility of a light from a point: true when the segment from the
/// (pre-offset) point to the light position hits nothing. An occluder beyond
/// the light does not block.
pub fn shadow_visibility(scene: &Scene, point: Vec3, light: &PointLight) -> bool {
    let to_light = light.position - point;
    let dist = to_light.length();
    if dist <= 1e-12 {
        return true;
    }
    let ray = Ray {
        origin: point,
        dir: to_light / dist,
        t_min: 0.0,
        t_max: dist,
    };
    intersect_scene(scene, &ray).is_none()
}

/// Direct Lambert response at a surface point: albedo/pi times the sum over
/// lights of cos * visibility * intensity / distance^2. The shadow test and
/// the light vector both start from the point offset along the normal.
pub fn direct_lighting(scene: &Scene, point: Vec3, normal: Vec3, albedo: Vec3) -> Vec3 {
    let offset = point + normal * SELF_INTERSECT_EPS;
    let mut sum = Vec3::zero();
    for light in &scene.lights {
        let to_light = light.position - offset;
        let dist_sq = to_light.length_squared();
        if dist_sq <= 1e-24 {
            continue;
        }
        let dist = dist_sq.sqrt();
        let cos = normal.dot(to_light / dist).max(0.0);
        if cos == 0.0 {
            continue;
        }
        if !shadow_visibility(scene, offset, light) {
            continue;
        }
        sum = sum + light.intensity * (cos / dist_sq);
    }
    albedo.mul_elem(sum) / std::f64::consts::PI
}

/// Mirror reflection of `d` about unit normal `n`.
pub fn reflect_dir(d: Vec3, n: Vec3) -> Vec3 {
    d - n * (2.0 * d.dot(n))
}

/// Whitted radiance along a ray. `depth` counts the remaining mirror
/// bounces: a mirror hit with depth 0 returns tint times the environment
/// along the reflected direction instead of recursing.
pub fn trace(scene: &Scene, ray: &Ray, depth: u32) -> Vec3 {
    match intersect_scene(scene, ray) {
        None => environment_radiance(&scene.environment, ray.dir),
        Some(hit) => match scene.materials[hit.material] {
            Material::Lambert { albedo } => direct_lighting(scene, hit.point, hit.normal, albedo),
            Material::Mirror { tint } => {
                let rdir = reflect_dir(ray.dir, hit.normal);
                let origin = hit.point + hit.normal * SELF_INTERSECT_EPS;
                if depth == 0 {
                    return tint.mul_elem(environment_radiance(&scene.environment, rdir));
                }
                let ray = Ray {
                    origin,
                    dir: rdir,
                    t_min: 0.0,
                    t_max: f64::INFINITY,
                };
                tint.mul_elem(trace(scene, &ray, depth - 1))
            }
        },
    }
}
