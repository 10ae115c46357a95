//! Fills radiance atlases by tracing one ray per bucket texel.
//!
//! Each bucket of the atlas owns a hemisphere anchored at one point of a flat
//! rectangular surface patch. The baker inverts the lookup chain per texel:
//! texel index -> centered square coordinate -> disc -> unit direction, then
//! asks the tracer what arrives from (or is visible along) that direction and
//! stores the answer. Sampling the finished atlas at a texel's own direction
//! in nearest/nearest mode returns exactly the traced value, which is the
//! consistency contract the whole pipeline rests on.

use crate::atlas::{AtlasError, AtlasHeader, RadianceAtlas, TexelKind};
use crate::mapping::{
    self, reflection_vector, square_to_disc, unproject_equisolid, MappingError, SquarePoint2,
    UnitDir3,
};
use crate::math::Vec3 as GVec3;
use crate::tracer::{
    self, direct_lighting, intersect_scene, Material, Ray, Scene, SceneError, SELF_INTERSECT_EPS,
};
use rayon::prelude::*;
use thiserror::Error;

type Vec3 = GVec3<f64>;

#[derive(Debug, Error)]
pub enum BakeError {
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("atlas: {0}")]
    Atlas(#[from] AtlasError),
    #[error("mapping: {0}")]
    Mapping(#[from] MappingError),
    #[error("patch {0}")]
    Patch(&'static str),
    #[error("interior depth must be positive and finite")]
    BadInteriorDepth,
    #[error("masks are binary; supersampling would average them away")]
    MaskSupersample,
    #[error("mask texel kind requires the shadow-mask mode")]
    MaskKindForRadiance,
}

/// Flat rectangular carrier for an atlas: an origin corner plus an
/// orthonormal tangent frame. uv = (0, 0) sits at the origin, uv = (1, 1) at
/// origin + width * T + height * Bt, and the normal is N = T x Bt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePatch {
    origin: Vec3,
    tangent: Vec3,
    bitangent: Vec3,
    normal: Vec3,
    extent: (f64, f64),
}

impl SurfacePatch {
    /// Validates the frame (unit, orthogonal within 1e-6) and derives the
    /// normal as T x Bt.
    pub fn new(
        origin: Vec3,
        tangent: Vec3,
        bitangent: Vec3,
        extent: (f64, f64),
    ) -> Result<Self, BakeError> {
        let fin = |v: Vec3| v.x.is_finite() && v.y.is_finite() && v.z.is_finite();
        if !fin(origin) || !fin(tangent) || !fin(bitangent) {
            return Err(BakeError::Patch("fields must be finite"));
        }
        if (tangent.length_squared() - 1.0).abs() > 1e-6
            || (bitangent.length_squared() - 1.0).abs() > 1e-6
        {
            return Err(BakeError::Patch("tangent and bitangent must be unit length"));
        }
        if tangent.dot(bitangent).abs() > 1e-6 {
            return Err(BakeError::Patch("tangent frame must be orthogonal"));
        }
        let (w, h) = extent;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(BakeError::Patch("extent must be positive and finite"));
        }
        Ok(Self {
            origin,
            tangent,
            bitangent,
            normal: tangent.cross(bitangent),
            extent,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn tangent(&self) -> Vec3 {
        self.tangent
    }

    pub fn bitangent(&self) -> Vec3 {
        self.bitangent
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn extent(&self) -> (f64, f64) {
        self.extent
    }

    /// World position of uv on the patch rectangle.
    pub fn surface_point(&self, u: f64, v: f64) -> Vec3 {
        self.origin + self.tangent * (u * self.extent.0) + self.bitangent * (v * self.extent.1)
    }

    /// Tangent-space direction to world space.
    pub fn dir_to_world(&self, local: Vec3) -> Vec3 {
        self.tangent * local.x + self.bitangent * local.y + self.normal * local.z
    }

    /// World direction to tangent space.
    pub fn dir_to_tangent(&self, world: Vec3) -> Vec3 {
        Vec3::new(
            world.dot(self.tangent),
            world.dot(self.bitangent),
            world.dot(self.normal),
        )
    }
}

/// What each texel stores.
#[derive(Clone, Debug, PartialEq)]
pub enum BakeMode {
    /// Radiance arriving along the mirror reflection of the texel direction;
    /// rendering the atlas makes the patch a perfect mirror.
    Mirror,
    /// Outgoing radiance toward the texel direction for the given surface
    /// material: view-independent direct lighting for Lambert, a traced
    /// reflection for mirrors.
    Shaded { material: Material },
    /// Binary visibility along the texel direction (treated as the direction
    /// toward a light); always produces a mask atlas.
    ShadowMask,
    /// Flat-colored box room of the given depth attached behind the patch;
    /// each texel stores the wall seen through the patch along the continued
    /// eye ray. Walls in order: -T, +T, -Bt, +Bt, back, front.
    Interior { depth: f64, walls: [Vec3; 6] },
}

/// Wall palette with every face distinct, so a rendered interior reads at a
/// glance: left red, right green, bottom blue, top yellow, back white, front
/// dark.
pub fn default_interior_walls() -> [Vec3; 6] {
    [
        Vec3::new(0.8, 0.2, 0.2),
        Vec3::new(0.2, 0.8, 0.2),
        Vec3::new(0.2, 0.2, 0.8),
        Vec3::new(0.8, 0.8, 0.2),
        Vec3::new(0.9, 0.9, 0.9),
        Vec3::new(0.05, 0.05, 0.05),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BakeOptions {
    /// Storage type for radiance modes. ShadowMask always bakes a mask.
    pub texel_kind: TexelKind,
    /// Side count of the sub-texel grid; 1 traces the texel center only.
    /// Higher values average s*s rays and give up bake-vs-sample
    /// bit-exactness.
    pub supersample: u32,
    /// Mirror recursion budget handed to the tracer.
    pub max_depth: u32,
}

impl Default for BakeOptions {
    fn default() -> Self {
        Self {
            texel_kind: TexelKind::F32,
            supersample: 1,
            max_depth: tracer::DEFAULT_MAX_DEPTH,
        }
    }
}

/// Centered square coordinate of a local texel center: (l + 0.5) * 2/n - 1.
/// Texel centers always lie inside the clamped bucket domain.
fn texel_center(l: u32, n: u32) -> f64 {
    (l as f64 + 0.5) * 2.0 / n as f64 - 1.0
}

/// Tangent-space direction whose atlas lookup lands exactly on the center of
/// local texel (lx, ly); the inverse of the sampling chain.
pub fn texel_direction(local: (u32, u32), n: u32) -> UnitDir3<f64> {
    let disc = texel_disc(local, n);
    unproject_equisolid(disc)
}

/// Mirror reflection direction for the same texel: what a mirror-mode texel
/// looks along.
pub fn texel_reflection(local: (u32, u32), n: u32) -> UnitDir3<f64> {
    let disc = texel_disc(local, n);
    reflection_vector(disc)
}

fn texel_disc(local: (u32, u32), n: u32) -> mapping::DiscPoint2<f64> {
    assert!(n >= 2 && local.0 < n && local.1 < n, "texel index out of range");
    let c = SquarePoint2::new(texel_center(local.0, n), texel_center(local.1, n))
        .expect("texel centers lie inside the square");
    square_to_disc(c)
}

/// Bakes with default options (float texels, one ray per texel, full mirror
/// depth).
pub fn bake(
    scene: &Scene,
    patch: &SurfacePatch,
    width_buckets: u32,
    height_buckets: u32,
    bucket_res: u32,
    mode: &BakeMode,
) -> Result<RadianceAtlas, BakeError> {
    bake_with(
        scene,
        patch,
        width_buckets,
        height_buckets,
        bucket_res,
        mode,
        &BakeOptions::default(),
    )
}

pub fn bake_with(
    scene: &Scene,
    patch: &SurfacePatch,
    width_buckets: u32,
    height_buckets: u32,
    bucket_res: u32,
    mode: &BakeMode,
    options: &BakeOptions,
) -> Result<RadianceAtlas, BakeError> {
    scene.validate()?;
    if let BakeMode::Interior { depth, .. } = mode {
        if !(depth.is_finite() && *depth > 0.0) {
            return Err(BakeError::BadInteriorDepth);
        }
    }
    let kind = match mode {
        BakeMode::ShadowMask => TexelKind::Mask,
        _ if options.texel_kind == TexelKind::Mask => {
            return Err(BakeError::MaskKindForRadiance)
        }
        _ => options.texel_kind,
    };
    let supersample = options.supersample.max(1);
    if kind == TexelKind::Mask && supersample > 1 {
        return Err(BakeError::MaskSupersample);
    }
    let channels = if kind == TexelKind::Mask { 1 } else { 3 };
    let header = AtlasHeader::new(width_buckets, height_buckets, bucket_res, channels, kind)?;

    let n = bucket_res;
    let s = supersample;
    // Direction tables shared by every bucket: the hemisphere grid is the
    // same in tangent space everywhere on the patch. Index: (ly*n + lx)*s*s
    // + sub.
    let mut dirs = Vec::with_capacity((n * n * s * s) as usize);
    let mut refls = Vec::with_capacity((n * n * s * s) as usize);
    for ly in 0..n {
        for lx in 0..n {
            for jy in 0..s {
                for jx in 0..s {
                    let cx = sub_center(lx, jx, n, s);
                    let cy = sub_center(ly, jy, n, s);
                    let c = SquarePoint2::new(cx, cy)
                        .expect("sub-texel centers lie inside the square");
                    let disc = square_to_disc(c);
                    dirs.push(unproject_equisolid(disc));
                    refls.push(reflection_vector(disc));
                }
            }
        }
    }

    // One world-space anchor per bucket, at the center of its uv cell.
    let mut points = Vec::with_capacity((width_buckets * height_buckets) as usize);
    let mut local_xy = Vec::with_capacity((width_buckets * height_buckets) as usize);
    for by in 0..height_buckets {
        for bx in 0..width_buckets {
            let u = (bx as f64 + 0.5) / width_buckets as f64;
            let v = (by as f64 + 0.5) / height_buckets as f64;
            points.push(patch.surface_point(u, v));
            local_xy.push((u * patch.extent.0, v * patch.extent.1));
        }
    }

    let gw = header.global_width() as usize;
    let gh = header.global_height() as usize;
    let subs = (s * s) as usize;
    let inv_subs = 1.0 / subs as f64;

    // Rows are disjoint slices of the output, so scheduling cannot change
    // results: every texel is a pure function of its indices.
    let atlas = match kind {
        TexelKind::Mask => {
            let mut data = vec![0u8; gw * gh];
            data.par_chunks_mut(gw).enumerate().for_each(|(gy, row)| {
                let by = gy as u32 / n;
                let ly = gy as u32 % n;
                for (gx, out) in row.iter_mut().enumerate() {
                    let bx = gx as u32 / n;
                    let lx = gx as u32 % n;
                    let p = points[(by * width_buckets + bx) as usize];
                    let d = dirs[((ly * n + lx) * s * s) as usize];
                    let origin = p + patch.normal * SELF_INTERSECT_EPS;
                    let ray = Ray::new(origin, patch.dir_to_world(d.to_vec()))
                        .expect("unit direction");
                    *out = intersect_scene(scene, &ray).is_none() as u8;
                }
            });
            RadianceAtlas::from_mask_texels(header, data)?
        }
        TexelKind::F32 | TexelKind::U8 => {
            let mut data = vec![[0.0f64; 3]; gw * gh];
            data.par_chunks_mut(gw).enumerate().for_each(|(gy, row)| {
                let by = gy as u32 / n;
                let ly = gy as u32 % n;
                for (gx, out) in row.iter_mut().enumerate() {
                    let bx = gx as u32 / n;
                    let lx = gx as u32 % n;
                    let b = (by * width_buckets + bx) as usize;
                    let base = ((ly * n + lx) * s * s) as usize;
                    let mut acc = Vec3::zero();
                    for sub in 0..subs {
                        acc = acc
                            + radiance_texel(
                                scene,
                                patch,
                                points[b],
                                local_xy[b],
                                mode,
                                dirs[base + sub],
                                refls[base + sub],
                                options.max_depth,
                            );
                    }
                    let v = acc * inv_subs;
                    *out = [v.x, v.y, v.z];
                }
            });
            let flat: Vec<f32> = data
                .iter()
                .flat_map(|t| t.iter().map(|&v| v as f32))
                .collect();
            match kind {
                TexelKind::F32 => RadianceAtlas::from_f32_texels(header, flat)?,
                TexelKind::U8 => {
                    let q: Vec<u8> = flat
                        .iter()
                        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                        .collect();
                    RadianceAtlas::from_u8_texels(header, q)?
                }
                TexelKind::Mask => unreachable!(),
            }
        }
    };
    Ok(atlas)
}

/// Center of sub-sample (jx, jy) within texel l on an s*s grid; s = 1, j = 0
/// reduces to the texel center.
fn sub_center(l: u32, j: u32, n: u32, s: u32) -> f64 {
    (l as f64 + (j as f64 + 0.5) / s as f64) * 2.0 / n as f64 - 1.0
}

#[allow(clippy::too_many_arguments)]
fn radiance_texel(
    scene: &Scene,
    patch: &SurfacePatch,
    p: Vec3,
    local_xy: (f64, f64),
    mode: &BakeMode,
    dir: UnitDir3<f64>,
    refl: UnitDir3<f64>,
    max_depth: u32,
) -> Vec3 {
    let offset = p + patch.normal * SELF_INTERSECT_EPS;
    let trace_along = |d: Vec3, tint: Vec3| {
        let ray = Ray::new(offset, patch.dir_to_world(d)).expect("unit direction");
        tint.mul_elem(tracer::trace(scene, &ray, max_depth))
    };
    match mode {
        BakeMode::Mirror => trace_along(refl.to_vec(), Vec3::splat(1.0)),
        BakeMode::Shaded { material } => match *material {
            // View-independent: every texel of the bucket stores the same
            // direct-lighting value.
            Material::Lambert { albedo } => direct_lighting(scene, p, patch.normal, albedo),
            // Reflecting the eye ray -i about the normal lands on the same
            // direction mirror mode uses.
            Material::Mirror { tint } => trace_along(refl.to_vec(), tint),
        },
        BakeMode::ShadowMask => unreachable!("masks are baked on the mask path"),
        BakeMode::Interior { depth, walls } => {
            interior_wall(local_xy, patch.extent, *depth, dir, walls)
        }
    }
}

/// Continues the eye ray straight through the patch into a box room behind
/// it and returns the flat color of the first wall hit. Worked in patch
/// coordinates: x in [0, width], y in [0, height], z in [-depth, 0].
fn interior_wall(
    local_xy: (f64, f64),
    extent: (f64, f64),
    depth: f64,
    incidence: UnitDir3<f64>,
    walls: &[Vec3; 6],
) -> Vec3 {
    // The eye ray travels opposite the incidence vector; its z component is
    // strictly negative because texel directions stay above the horizon, so
    // the ray always enters the box and the front face (index 5) stays
    // unreachable.
    let d = -incidence.to_vec();
    let (x0, y0) = local_xy;
    let mut best_t = depth / -d.z;
    let mut wall = 4usize;
    let mut consider = |t: f64, w: usize| {
        if t < best_t {
            best_t = t;
            wall = w;
        }
    };
    if d.x < 0.0 {
        consider(x0 / -d.x, 0);
    } else if d.x > 0.0 {
        consider((extent.0 - x0) / d.x, 1);
    }
    if d.y < 0.0 {
        consider(y0 / -d.y, 2);
    } else if d.y > 0.0 {
        consider((extent.1 - y0) / d.y, 3);
    }
    walls[wall]
}
