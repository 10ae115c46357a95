//! Renders atlas-carrying meshes by per-pixel plenoptic lookup, plus the
//! ray-traced ground truth and PSNR comparison used to judge it.
//!
//! The rasterizer is a per-pixel barycentric coverage test with a float depth
//! buffer. Vertex projection is the exact inverse of ground-truth ray
//! generation: the pinhole camera places pixel centers at integer screen
//! coordinates, so a rendered pixel and a traced pixel see the scene through
//! the same ray. Attributes (uv, tangent frame, world position) interpolate
//! perspective-correct via division by camera depth. Shading is a single
//! atlas lookup: incidence = normalize(eye - p) in the pixel's tangent frame.

use crate::atlas::{AtlasError, BucketMode, RadianceAtlas, TexelFilter, TexelKind};
use crate::baker::SurfacePatch;
use crate::imageio::{self, ImageIoError};
use crate::math::{Vec2 as GVec2, Vec3 as GVec3};
use crate::tracer::{self, Ray, Scene, SceneError};
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;
use thiserror::Error;

type Vec3 = GVec3<f64>;
type Vec2 = GVec2<f64>;

/// Triangles whose camera-space depth dips below this are culled rather than
/// clipped; meshes here are small quads and cubes well in front of the eye.
const NEAR_EPS: f64 = 1e-9;
/// Projected triangles smaller than this many square pixels are invisible
/// and numerically degenerate.
const MIN_AREA2: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("camera {0}")]
    Camera(&'static str),
    #[error("mesh {0}")]
    Mesh(&'static str),
    #[error("mask atlases encode visibility, not radiance; render a float or 8-bit atlas")]
    MaskAtlas,
    #[error("image dimensions {0}x{1} and {2}x{3} do not match")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("atlas: {0}")]
    Atlas(#[from] AtlasError),
    #[error("image file: {0}")]
    Image(#[from] ImageIoError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Pinhole camera. Pixel (x, y) sees along `primary_ray_dir(x, y)`, and
/// `project` maps world points back onto the same grid: a pixel center's
/// projection is exactly (x, y).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub vfov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn validate(&self) -> Result<(), RenderError> {
        let fin = |v: Vec3| v.x.is_finite() && v.y.is_finite() && v.z.is_finite();
        if !fin(self.position) || !fin(self.look_at) || !fin(self.up) {
            return Err(RenderError::Camera("fields must be finite"));
        }
        if !(self.vfov_deg > 0.0 && self.vfov_deg < 180.0) {
            return Err(RenderError::Camera("vertical fov must be in (0, 180) degrees"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::Camera("resolution must be at least 1x1"));
        }
        self.basis().map(|_| ())
    }

    /// Right, up, forward unit vectors.
    fn basis(&self) -> Result<(Vec3, Vec3, Vec3), RenderError> {
        let f = (self.look_at - self.position)
            .normalized()
            .ok_or(RenderError::Camera("position and look-at must differ"))?;
        let r = f
            .cross(self.up)
            .normalized()
            .ok_or(RenderError::Camera("up vector is parallel to the view direction"))?;
        let u = r.cross(f);
        Ok((r, u, f))
    }

    fn tan_half_vfov(&self) -> f64 {
        (self.vfov_deg.to_radians() * 0.5).tan()
    }

    /// Unit direction through the center of pixel (x, y).
    pub fn primary_ray_dir(&self, x: u32, y: u32) -> Result<Vec3, RenderError> {
        let (r, u, f) = self.basis()?;
        let th = self.tan_half_vfov();
        let aspect = self.width as f64 / self.height as f64;
        let px = ((x as f64 + 0.5) / self.width as f64) * 2.0 - 1.0;
        let py = 1.0 - ((y as f64 + 0.5) / self.height as f64) * 2.0;
        let dir = f + r * (px * aspect * th) + u * (py * th);
        Ok(dir.normalized().expect("frustum directions are nonzero"))
    }

    /// Screen position and camera depth of a world point. Pixel centers land
    /// on integer coordinates; points behind the eye return a non-positive
    /// depth for the caller to cull.
    fn project(&self, p: Vec3, r: Vec3, u: Vec3, f: Vec3) -> (f64, f64, f64) {
        let rel = p - self.position;
        let cz = rel.dot(f);
        let th = self.tan_half_vfov();
        let aspect = self.width as f64 / self.height as f64;
        let ndc_x = rel.dot(r) / (cz * th * aspect);
        let ndc_y = rel.dot(u) / (cz * th);
        let sx = (ndc_x + 1.0) * 0.5 * self.width as f64 - 0.5;
        let sy = (1.0 - ndc_y) * 0.5 * self.height as f64 - 0.5;
        (sx, sy, cz)
    }
}

/// Mesh vertex: position, atlas uv, and the tangent frame the atlas was
/// baked in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub position: Vec3,
    pub uv: Vec2,
    pub tangent: Vec3,
    pub bitangent: Vec3,
    pub normal: Vec3,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn validate(&self) -> Result<(), RenderError> {
        for v in &self.vertices {
            let fin = |w: Vec3| w.x.is_finite() && w.y.is_finite() && w.z.is_finite();
            if !fin(v.position) || !fin(v.tangent) || !fin(v.bitangent) || !fin(v.normal) {
                return Err(RenderError::Mesh("vertex fields must be finite"));
            }
            if !(0.0..=1.0).contains(&v.uv.x) || !(0.0..=1.0).contains(&v.uv.y) {
                return Err(RenderError::Mesh("vertex uv must lie in [0, 1]^2"));
            }
            for w in [v.tangent, v.bitangent, v.normal] {
                if (w.length_squared() - 1.0).abs() > 1e-4 {
                    return Err(RenderError::Mesh("vertex frame must be unit length"));
                }
            }
            if v.tangent.dot(v.bitangent).abs() > 1e-4
                || v.tangent.dot(v.normal).abs() > 1e-4
                || v.bitangent.dot(v.normal).abs() > 1e-4
            {
                return Err(RenderError::Mesh("vertex frame must be orthogonal"));
            }
        }
        for tri in &self.triangles {
            if tri.iter().any(|&i| i as usize >= self.vertices.len()) {
                return Err(RenderError::Mesh("triangle index out of range"));
            }
        }
        Ok(())
    }

    /// Two triangles covering a baked patch, uv-aligned with its atlas:
    /// uv (0, 0) at the patch origin corner.
    pub fn quad_from_patch(patch: &SurfacePatch) -> Mesh {
        let corner = |u: f64, v: f64| Vertex {
            position: patch.surface_point(u, v),
            uv: Vec2::new(u, v),
            tangent: patch.tangent(),
            bitangent: patch.bitangent(),
            normal: patch.normal(),
        };
        Mesh {
            vertices: vec![
                corner(0.0, 0.0),
                corner(1.0, 0.0),
                corner(1.0, 1.0),
                corner(0.0, 1.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    /// Axis-aligned cube; every face carries the full atlas with an outward
    /// frame (T x Bt points out of the cube).
    pub fn cube(center: Vec3, half: f64) -> Mesh {
        let faces: [(Vec3, Vec3); 6] = [
            (Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)), // +x
            (Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 0.0)), // -x
            (Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)), // +y
            (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)), // -y
            (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)), // +z
            (Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 0.0, 0.0)), // -z
        ];
        let mut mesh = Mesh::default();
        for (t, bt) in faces {
            let n = t.cross(bt);
            let origin = center + n * half - t * half - bt * half;
            let base = mesh.vertices.len() as u32;
            for (u, v) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)] {
                mesh.vertices.push(Vertex {
                    position: origin + t * (u * 2.0 * half) + bt * (v * 2.0 * half),
                    uv: Vec2::new(u, v),
                    tangent: t,
                    bitangent: bt,
                    normal: n,
                });
            }
            mesh.triangles.push([base, base + 1, base + 2]);
            mesh.triangles.push([base, base + 2, base + 3]);
        }
        mesh
    }
}

/// Linear rgb image, row-major from the top-left pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: u32, height: u32, fill: [f32; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: [f32; 3]) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    /// 8-bit PPM, sRGB-encoded at export.
    pub fn save_ppm(&self, path: &Path) -> Result<(), RenderError> {
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .flat_map(|p| p.iter().map(|&v| imageio::linear_to_srgb8(v)))
            .collect();
        let mut out = BufWriter::new(File::create(path)?);
        imageio::write_ppm(&mut out, self.width as usize, self.height as usize, &bytes)?;
        Ok(())
    }

    /// Float PFM, linear values, for exact comparisons.
    pub fn save_pfm(&self, path: &Path) -> Result<(), RenderError> {
        let flat: Vec<f32> = self.pixels.iter().flatten().copied().collect();
        let mut out = BufWriter::new(File::create(path)?);
        imageio::write_pfm(&mut out, self.width as usize, self.height as usize, 3, &flat)?;
        Ok(())
    }

    /// Loads a PFM (linear, kept as-is) or PPM (sRGB, decoded to linear).
    pub fn load(path: &Path) -> Result<Self, RenderError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.starts_with(b"PF") || bytes.starts_with(b"Pf") {
            let (w, h, ch, data) = imageio::read_pfm(&bytes)?;
            let pixels = if ch == 3 {
                data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
            } else {
                data.iter().map(|&v| [v, v, v]).collect()
            };
            Ok(Self {
                width: w as u32,
                height: h as u32,
                pixels,
            })
        } else {
            let (w, h, data) = imageio::read_ppm(&bytes)?;
            let pixels = data
                .chunks(3)
                .map(|c| {
                    [
                        imageio::srgb8_to_linear(c[0]),
                        imageio::srgb8_to_linear(c[1]),
                        imageio::srgb8_to_linear(c[2]),
                    ]
                })
                .collect();
            Ok(Self {
                width: w as u32,
                height: h as u32,
                pixels,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub background: [f32; 3],
    pub bucket_mode: BucketMode,
    pub texel_filter: TexelFilter,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            bucket_mode: BucketMode::default(),
            texel_filter: TexelFilter::default(),
        }
    }
}

/// A triangle after projection: screen corners, per-vertex 1/z and
/// attributes pre-divided by z for perspective-correct interpolation.
struct PreparedTri {
    corners: [(f64, f64); 3],
    area2: f64,
    inv_z: [f64; 3],
    pos_oz: [Vec3; 3],
    uv_oz: [Vec2; 3],
    t_oz: [Vec3; 3],
    bt_oz: [Vec3; 3],
    n_oz: [Vec3; 3],
    x_range: (u32, u32),
    y_range: (u32, u32),
}

fn cross2(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

fn prepare_triangle(camera: &Camera, basis: (Vec3, Vec3, Vec3), verts: [&Vertex; 3]) -> Option<PreparedTri> {
    let (r, u, f) = basis;
    let mut corners = [(0.0, 0.0); 3];
    let mut depth = [0.0; 3];
    for (k, v) in verts.iter().enumerate() {
        let (sx, sy, cz) = camera.project(v.position, r, u, f);
        // Cull, do not clip: a vertex on or behind the camera plane drops
        // the whole triangle.
        if cz <= NEAR_EPS {
            return None;
        }
        corners[k] = (sx, sy);
        depth[k] = cz;
    }
    let mut order = [0usize, 1, 2];
    let signed_area2 = cross2(
        corners[1].0 - corners[0].0,
        corners[1].1 - corners[0].1,
        corners[2].0 - corners[0].0,
        corners[2].1 - corners[0].1,
    );
    if signed_area2.abs() < MIN_AREA2 {
        return None;
    }
    if signed_area2 < 0.0 {
        order.swap(1, 2);
    }
    let c = |k: usize| corners[order[k]];
    let v = |k: usize| verts[order[k]];
    let z = |k: usize| depth[order[k]];
    let min = |a: f64, b: f64, c: f64| a.min(b).min(c);
    let max = |a: f64, b: f64, c: f64| a.max(b).max(c);
    let x0 = min(c(0).0, c(1).0, c(2).0).ceil().max(0.0) as u32;
    let x1 = max(c(0).0, c(1).0, c(2).0).floor().min(camera.width as f64 - 1.0);
    let y0 = min(c(0).1, c(1).1, c(2).1).ceil().max(0.0) as u32;
    let y1 = max(c(0).1, c(1).1, c(2).1).floor().min(camera.height as f64 - 1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return None;
    }
    let arr3 = |g: &dyn Fn(&Vertex, f64) -> Vec3| {
        [g(v(0), z(0)), g(v(1), z(1)), g(v(2), z(2))]
    };
    Some(PreparedTri {
        corners: [c(0), c(1), c(2)],
        area2: signed_area2.abs(),
        inv_z: [1.0 / z(0), 1.0 / z(1), 1.0 / z(2)],
        pos_oz: arr3(&|w, zz| w.position / zz),
        uv_oz: [
            v(0).uv * (1.0 / z(0)),
            v(1).uv * (1.0 / z(1)),
            v(2).uv * (1.0 / z(2)),
        ],
        t_oz: arr3(&|w, zz| w.tangent / zz),
        bt_oz: arr3(&|w, zz| w.bitangent / zz),
        n_oz: arr3(&|w, zz| w.normal / zz),
        x_range: (x0, x1 as u32),
        y_range: (y0, y1 as u32),
    })
}

/// Barycentric weights at a screen point; covered iff all are >= 0
/// (edge-inclusive after winding normalization).
fn coverage(tri: &PreparedTri, px: f64, py: f64) -> Option<[f64; 3]> {
    let [(ax, ay), (bx, by), (cx, cy)] = tri.corners;
    let w0 = cross2(cx - bx, cy - by, px - bx, py - by);
    let w1 = cross2(ax - cx, ay - cy, px - cx, py - cy);
    let w2 = cross2(bx - ax, by - ay, px - ax, py - ay);
    if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
        Some([w0 / tri.area2, w1 / tri.area2, w2 / tri.area2])
    } else {
        None
    }
}

struct PixelSurface {
    depth: f64,
    position: Vec3,
    uv: Vec2,
    tangent: Vec3,
    bitangent: Vec3,
    normal: Vec3,
}

/// Perspective-correct attributes at barycentric weights `lam`.
fn surface_at(tri: &PreparedTri, lam: [f64; 3]) -> Option<PixelSurface> {
    let inv_z = lam[0] * tri.inv_z[0] + lam[1] * tri.inv_z[1] + lam[2] * tri.inv_z[2];
    if inv_z <= 0.0 {
        return None;
    }
    let depth = 1.0 / inv_z;
    let mix3 = |a: [Vec3; 3]| (a[0] * lam[0] + a[1] * lam[1] + a[2] * lam[2]) * depth;
    let uv = (tri.uv_oz[0] * lam[0] + tri.uv_oz[1] * lam[1] + tri.uv_oz[2] * lam[2]) * depth;
    Some(PixelSurface {
        depth,
        position: mix3(tri.pos_oz),
        uv,
        tangent: mix3(tri.t_oz).normalized()?,
        bitangent: mix3(tri.bt_oz).normalized()?,
        normal: mix3(tri.n_oz).normalized()?,
    })
}

/// Renders the mesh with default options (black background, nearest bucket,
/// bilinear texels).
pub fn rasterize(
    mesh: &Mesh,
    atlas: &RadianceAtlas,
    camera: &Camera,
    background: [f32; 3],
) -> Result<Image, RenderError> {
    rasterize_with(
        mesh,
        atlas,
        camera,
        &RenderOptions {
            background,
            ..RenderOptions::default()
        },
    )
}

pub fn rasterize_with(
    mesh: &Mesh,
    atlas: &RadianceAtlas,
    camera: &Camera,
    options: &RenderOptions,
) -> Result<Image, RenderError> {
    camera.validate()?;
    mesh.validate()?;
    if atlas.header().texel_kind == TexelKind::Mask {
        return Err(RenderError::MaskAtlas);
    }
    let basis = camera.basis()?;
    let tris: Vec<PreparedTri> = mesh
        .triangles
        .iter()
        .filter_map(|t| {
            prepare_triangle(
                camera,
                basis,
                [
                    &mesh.vertices[t[0] as usize],
                    &mesh.vertices[t[1] as usize],
                    &mesh.vertices[t[2] as usize],
                ],
            )
        })
        .collect();

    let width = camera.width as usize;
    let mut image = Image::new(camera.width, camera.height, options.background);
    let eye = camera.position;
    // Rows own disjoint pixel and depth storage; triangles are visited in
    // mesh order within each row, so scheduling cannot change the output.
    let rows: Result<Vec<()>, RenderError> = image
        .pixels
        .par_chunks_mut(width)
        .enumerate()
        .map(|(y, row)| {
            let mut depth_row = vec![f64::INFINITY; width];
            for tri in &tris {
                if (y as u32) < tri.y_range.0 || (y as u32) > tri.y_range.1 {
                    continue;
                }
                for x in tri.x_range.0..=tri.x_range.1 {
                    let lam = match coverage(tri, x as f64, y as f64) {
                        Some(l) => l,
                        None => continue,
                    };
                    let surf = match surface_at(tri, lam) {
                        Some(s) => s,
                        None => continue,
                    };
                    if surf.depth >= depth_row[x as usize] {
                        continue;
                    }
                    let incidence = match (eye - surf.position).normalized() {
                        Some(i) => i,
                        None => continue,
                    };
                    let i_local = Vec3::new(
                        surf.tangent.dot(incidence),
                        surf.bitangent.dot(incidence),
                        surf.normal.dot(incidence),
                    );
                    // Back-facing: the surface's atlas side looks away.
                    // Dropped without a depth write so geometry behind shows.
                    if i_local.z <= 0.0 {
                        continue;
                    }
                    let dir = match crate::mapping::UnitDir3::from_vec(i_local) {
                        Ok(d) => d,
                        Err(_) => continue,
                    };
                    let uv = Vec2::new(surf.uv.x.clamp(0.0, 1.0), surf.uv.y.clamp(0.0, 1.0));
                    let value =
                        atlas.sample_plenoptic(uv, dir, options.bucket_mode, options.texel_filter)?;
                    row[x as usize] = value;
                    depth_row[x as usize] = surf.depth;
                }
            }
            Ok(())
        })
        .collect();
    rows?;
    Ok(image)
}

/// Ray-traced reference: one trace through each pixel center.
pub fn ground_truth(scene: &Scene, camera: &Camera) -> Result<Image, RenderError> {
    camera.validate()?;
    scene.validate()?;
    let width = camera.width as usize;
    let mut image = Image::new(camera.width, camera.height, [0.0; 3]);
    let rows: Result<Vec<()>, RenderError> = image
        .pixels
        .par_chunks_mut(width)
        .enumerate()
        .map(|(y, row)| {
            for (x, px) in row.iter_mut().enumerate() {
                let dir = camera.primary_ray_dir(x as u32, y as u32)?;
                let ray = Ray::new(camera.position, dir).map_err(SceneError::from)?;
                let v = tracer::trace(scene, &ray, tracer::DEFAULT_MAX_DEPTH);
                *px = [v.x as f32, v.y as f32, v.z as f32];
            }
            Ok(())
        })
        .collect();
    rows?;
    Ok(image)
}

/// Peak signal-to-noise ratio in decibels over all channels; identical
/// images report +infinity.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64, RenderError> {
    if a.width != b.width || a.height != b.height {
        return Err(RenderError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    let mut sum = 0.0f64;
    for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
        for ch in 0..3 {
            let d = pa[ch] as f64 - pb[ch] as f64;
            sum += d * d;
        }
    }
    let mse = sum / (a.pixels.len() as f64 * 3.0);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::AtlasHeader;
    use crate::baker::{self, BakeMode};
    use crate::tracer::{Environment, Material, Primitive, Shape};

    fn head_on_camera(w: u32, h: u32, dist: f64) -> Camera {
        Camera {
            position: Vec3::new(0.0, 0.0, dist),
            look_at: Vec3::zero(),
            up: Vec3::new(0.0, 1.0, 0.0),
            vfov_deg: 60.0,
            width: w,
            height: h,
        }
    }

    /// Quad in the z = 0 plane facing +z, centered at the origin.
    fn facing_patch(half: f64) -> SurfacePatch {
        SurfacePatch::new(
            Vec3::new(-half, -half, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            (2.0 * half, 2.0 * half),
        )
        .unwrap()
    }

    /// Atlas where every bucket is a distinct constant color.
    fn bucket_id_atlas(w: u32, h: u32, n: u32) -> RadianceAtlas {
        let header = AtlasHeader::new(w, h, n, 3, TexelKind::F32).unwrap();
        let gw = header.global_width() as usize;
        let mut data = vec![0.0f32; header.value_count()];
        for gy in 0..header.global_height() as usize {
            for gx in 0..gw {
                let bx = gx as u32 / n;
                let by = gy as u32 / n;
                let base = (gy * gw + gx) * 3;
                data[base] = (by * w + bx) as f32;
                data[base + 1] = bx as f32;
                data[base + 2] = by as f32;
            }
        }
        RadianceAtlas::from_f32_texels(header, data).unwrap()
    }

    #[test]
    fn camera_validation() {
        let mut c = head_on_camera(8, 8, 4.0);
        assert!(c.validate().is_ok());
        c.look_at = c.position;
        assert!(c.validate().is_err());
        let mut c = head_on_camera(8, 8, 4.0);
        c.vfov_deg = 180.0;
        assert!(c.validate().is_err());
        let mut c = head_on_camera(8, 8, 4.0);
        c.up = Vec3::new(0.0, 0.0, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn projection_inverts_ray_generation() {
        let camera = Camera {
            position: Vec3::new(1.0, -2.0, 5.0),
            look_at: Vec3::new(-0.5, 0.3, -1.0),
            up: Vec3::new(0.1, 1.0, 0.0),
            vfov_deg: 47.0,
            width: 17,
            height: 11,
        };
        let (r, u, f) = camera.basis().unwrap();
        for (x, y) in [(0u32, 0u32), (8, 5), (16, 10), (3, 7)] {
            let dir = camera.primary_ray_dir(x, y).unwrap();
            let p = camera.position + dir * 3.7;
            let (sx, sy, cz) = camera.project(p, r, u, f);
            assert!((sx - x as f64).abs() < 1e-9, "sx {sx} vs {x}");
            assert!((sy - y as f64).abs() < 1e-9, "sy {sy} vs {y}");
            assert!(cz > 0.0);
        }
    }

    #[test]
    fn interpolation_is_exact_at_vertices() {
        let camera = head_on_camera(64, 64, 4.0);
        let basis = camera.basis().unwrap();
        let patch = facing_patch(1.0);
        let mesh = Mesh::quad_from_patch(&patch);
        let tri = prepare_triangle(
            &camera,
            basis,
            [&mesh.vertices[0], &mesh.vertices[1], &mesh.vertices[2]],
        )
        .unwrap();
        for k in 0..3 {
            let (vx, vy) = tri.corners[k];
            let lam = coverage(&tri, vx, vy).expect("vertex is covered");
            assert!((lam[k] - 1.0).abs() < 1e-12);
            let surf = surface_at(&tri, lam).unwrap();
            let expected = tri.uv_oz[k] * (1.0 / tri.inv_z[k]);
            assert!((surf.uv.x - expected.x).abs() < 1e-9);
            assert!((surf.uv.y - expected.y).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_is_affine_on_constant_depth_edges() {
        let camera = head_on_camera(64, 64, 4.0);
        let basis = camera.basis().unwrap();
        let patch = facing_patch(1.0);
        let mesh = Mesh::quad_from_patch(&patch);
        let tri = prepare_triangle(
            &camera,
            basis,
            [&mesh.vertices[0], &mesh.vertices[1], &mesh.vertices[2]],
        )
        .unwrap();
        // The whole quad sits at constant camera depth, so midpoints in
        // screen space carry midpoint attributes.
        let (ax, ay) = tri.corners[0];
        let (bx, by) = tri.corners[1];
        let lam = coverage(&tri, (ax + bx) * 0.5, (ay + by) * 0.5).unwrap();
        let surf = surface_at(&tri, lam).unwrap();
        let uv_a = tri.uv_oz[0] * (1.0 / tri.inv_z[0]);
        let uv_b = tri.uv_oz[1] * (1.0 / tri.inv_z[1]);
        assert!((surf.uv.x - (uv_a.x + uv_b.x) * 0.5).abs() < 1e-9);
        assert!((surf.uv.y - (uv_a.y + uv_b.y) * 0.5).abs() < 1e-9);
    }

    #[test]
    fn off_frustum_mesh_renders_background() {
        let patch = facing_patch(1.0);
        let mesh = Mesh::quad_from_patch(&patch);
        let atlas = bucket_id_atlas(2, 2, 2);
        let mut camera = head_on_camera(9, 7, 4.0);
        camera.look_at = Vec3::new(0.0, 0.0, 8.0); // faces away from the quad
        let img = rasterize(&mesh, &atlas, &camera, [0.25, 0.5, 0.75]).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                assert_eq!(img.pixel(x, y), [0.25, 0.5, 0.75]);
            }
        }
    }

    #[test]
    fn back_side_view_shows_background() {
        let patch = facing_patch(1.0);
        let mesh = Mesh::quad_from_patch(&patch);
        let atlas = bucket_id_atlas(2, 2, 2);
        let camera = Camera {
            position: Vec3::new(0.0, 0.0, -4.0),
            look_at: Vec3::zero(),
            up: Vec3::new(0.0, 1.0, 0.0),
            vfov_deg: 60.0,
            width: 9,
            height: 9,
        };
        let img = rasterize(&mesh, &atlas, &camera, [0.5, 0.0, 0.0]).unwrap();
        assert_eq!(img.pixel(4, 4), [0.5, 0.0, 0.0]);
    }

    #[test]
    fn head_on_center_pixel_matches_direct_sample() {
        // Odd resolution puts a pixel center exactly on the optical axis.
        let scene = Scene {
            environment: Environment::CheckerSky,
            ..Scene::default()
        };
        let patch = facing_patch(1.0);
        let atlas = baker::bake(&scene, &patch, 3, 3, 5, &BakeMode::Mirror).unwrap();
        let mesh = Mesh::quad_from_patch(&patch);
        let camera = head_on_camera(61, 61, 3.0);
        let opts = RenderOptions {
            background: [0.0; 3],
            bucket_mode: BucketMode::Nearest,
            texel_filter: TexelFilter::Nearest,
        };
        let img = rasterize_with(&mesh, &atlas, &camera, &opts).unwrap();
        let direct = atlas
            .sample_plenoptic(
                Vec2::new(0.5, 0.5),
                crate::mapping::UnitDir3::from_vec(Vec3::new(0.0, 0.0, 1.0)).unwrap(),
                BucketMode::Nearest,
                TexelFilter::Nearest,
            )
            .unwrap();
        assert_eq!(img.pixel(30, 30), direct);

        // The same texel read straight out of storage.
        let n = 5u32;
        let gw = 3 * n;
        let (bx, by, lx, ly) = (1u32, 1u32, 2u32, 2u32);
        let base = (((by * n + ly) * gw + bx * n + lx) * 3) as usize;
        assert_eq!(
            img.pixel(30, 30),
            [
                atlas.raw_value(base),
                atlas.raw_value(base + 1),
                atlas.raw_value(base + 2)
            ]
        );
    }

    #[test]
    fn eight_bit_atlas_renders_within_quantization_error() {
        let scene = Scene {
            environment: Environment::CheckerSky,
            ..Scene::default()
        };
        let patch = facing_patch(1.0);
        let f32_atlas = baker::bake(&scene, &patch, 3, 3, 5, &BakeMode::Mirror).unwrap();
        let opts8 = baker::BakeOptions {
            texel_kind: TexelKind::U8,
            ..baker::BakeOptions::default()
        };
        let u8_atlas =
            baker::bake_with(&scene, &patch, 3, 3, 5, &BakeMode::Mirror, &opts8).unwrap();
        let mesh = Mesh::quad_from_patch(&patch);
        let camera = head_on_camera(61, 61, 3.0);
        let opts = RenderOptions {
            background: [0.0; 3],
            bucket_mode: BucketMode::Nearest,
            texel_filter: TexelFilter::Nearest,
        };
        let exact = rasterize_with(&mesh, &f32_atlas, &camera, &opts).unwrap();
        let quant = rasterize_with(&mesh, &u8_atlas, &camera, &opts).unwrap();
        let p = exact.pixel(30, 30);
        let q = quant.pixel(30, 30);
        for ch in 0..3 {
            assert!((p[ch] - q[ch]).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn nearer_quad_wins_depth_regardless_of_order() {
        // Far quad fills the view at z = 0; a small near quad floats at
        // z = 1. Both carry the same bucket-id atlas, but at an off-center
        // probe pixel they map to different buckets (the near quad's uv
        // varies much faster), so the winning quad is identifiable by color.
        let far = facing_patch(2.0);
        let near = SurfacePatch::new(
            Vec3::new(-0.4, -0.4, 1.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            (0.8, 0.8),
        )
        .unwrap();
        let atlas = bucket_id_atlas(4, 4, 2);
        let camera = head_on_camera(31, 31, 4.0);
        let probe = (17u32, 15u32);

        let far_only = rasterize(&Mesh::quad_from_patch(&far), &atlas, &camera, [9.0; 3]).unwrap();
        let near_only =
            rasterize(&Mesh::quad_from_patch(&near), &atlas, &camera, [9.0; 3]).unwrap();
        assert_ne!(far_only.pixel(probe.0, probe.1), near_only.pixel(probe.0, probe.1));
        assert_ne!(near_only.pixel(probe.0, probe.1), [9.0; 3]); // near quad covers the probe
        assert_eq!(near_only.pixel(1, 1), [9.0; 3]); // but not the frame edge

        let combine = |first: &SurfacePatch, second: &SurfacePatch| {
            let mut mesh = Mesh::quad_from_patch(first);
            let tail = Mesh::quad_from_patch(second);
            let base = mesh.vertices.len() as u32;
            mesh.vertices.extend_from_slice(&tail.vertices);
            mesh.triangles
                .extend(tail.triangles.iter().map(|t| t.map(|i| i + base)));
            rasterize(&mesh, &atlas, &camera, [9.0; 3]).unwrap()
        };
        let img_ab = combine(&far, &near);
        let img_ba = combine(&near, &far);
        assert_eq!(img_ab.pixels(), img_ba.pixels());

        // The near quad owns the contested probe; the far quad owns the
        // frame edge it alone covers.
        assert_eq!(img_ab.pixel(probe.0, probe.1), near_only.pixel(probe.0, probe.1));
        assert_eq!(img_ab.pixel(1, 1), far_only.pixel(1, 1));
    }

    #[test]
    fn mask_atlas_is_rejected() {
        let scene = Scene::default();
        let patch = facing_patch(1.0);
        let atlas = baker::bake(&scene, &patch, 1, 1, 4, &BakeMode::ShadowMask).unwrap();
        let mesh = Mesh::quad_from_patch(&patch);
        let camera = head_on_camera(8, 8, 4.0);
        assert!(matches!(
            rasterize(&mesh, &atlas, &camera, [0.0; 3]),
            Err(RenderError::MaskAtlas)
        ));
    }

    #[test]
    fn rasterize_is_schedule_independent() {
        let scene = Scene {
            environment: Environment::CheckerSky,
            ..Scene::default()
        };
        let patch = facing_patch(1.0);
        let atlas = baker::bake(&scene, &patch, 4, 4, 8, &BakeMode::Mirror).unwrap();
        let mesh = Mesh::quad_from_patch(&patch);
        let camera = head_on_camera(33, 29, 3.0);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| rasterize(&mesh, &atlas, &camera, [0.0; 3]).unwrap())
        };
        assert_eq!(run(1).pixels(), run(4).pixels());
    }

    #[test]
    fn ground_truth_empty_scene_is_the_environment() {
        let scene = Scene {
            environment: Environment::CheckerSky,
            ..Scene::default()
        };
        let camera = head_on_camera(9, 7, 2.0);
        let img = ground_truth(&scene, &camera).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let dir = camera.primary_ray_dir(x, y).unwrap();
                let v = tracer::environment_radiance(&Environment::CheckerSky, dir);
                assert_eq!(img.pixel(x, y), [v.x as f32, v.y as f32, v.z as f32]);
            }
        }
    }

    #[test]
    fn ground_truth_black_scene_is_black() {
        let scene = Scene::default();
        let camera = head_on_camera(5, 5, 2.0);
        let img = ground_truth(&scene, &camera).unwrap();
        assert!(img.pixels().iter().all(|p| *p == [0.0, 0.0, 0.0]));
    }

    #[test]
    fn ground_truth_probes_match_hand_built_rays() {
        let tint = Vec3::new(0.9, 0.8, 0.7);
        let scene = Scene {
            materials: vec![Material::Mirror { tint }],
            primitives: vec![Primitive {
                shape: Shape::Sphere {
                    center: Vec3::zero(),
                    radius: 1.0,
                },
                material: 0,
            }],
            environment: Environment::CheckerSky,
            ..Scene::default()
        };
        // Odd image: the center pixel ray runs along -z and hits the sphere
        // head on; the reflection reverses it, so the value is the tinted
        // sky behind the camera.
        let camera = head_on_camera(11, 11, 5.0);
        let img = ground_truth(&scene, &camera).unwrap();
        let expected = tint.mul_elem(tracer::environment_radiance(
            &Environment::CheckerSky,
            Vec3::new(0.0, 0.0, 1.0),
        ));
        assert_eq!(
            img.pixel(5, 5),
            [expected.x as f32, expected.y as f32, expected.z as f32]
        );

        // Corner pixels miss the sphere entirely: direct environment.
        for (x, y) in [(0u32, 0u32), (10, 0), (0, 10)] {
            let dir = camera.primary_ray_dir(x, y).unwrap();
            let v = tracer::environment_radiance(&Environment::CheckerSky, dir);
            assert_eq!(img.pixel(x, y), [v.x as f32, v.y as f32, v.z as f32]);
        }
    }

    #[test]
    fn psnr_frozen_values() {
        let a = Image::new(8, 8, [0.25, 0.5, 0.75]);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);

        // Black base so the 1/255 offset is itself the per-channel error.
        let black = Image::new(8, 8, [0.0; 3]);
        let offset = Image::new(8, 8, [1.0f32 / 255.0; 3]);
        let db = psnr(&black, &offset, 1.0).unwrap();
        let expected = 20.0 * 255.0f64.log10(); // ~48.13 dB
        assert!((db - expected).abs() < 1e-5, "got {db}, want {expected}");

        // Checkerboard against its inverse: every channel differs by 1.
        let mut c = Image::new(4, 4, [0.0; 3]);
        let mut d = Image::new(4, 4, [0.0; 3]);
        for y in 0..4 {
            for x in 0..4 {
                let on = (x + y) % 2 == 0;
                c.set_pixel(x, y, if on { [1.0; 3] } else { [0.0; 3] });
                d.set_pixel(x, y, if on { [0.0; 3] } else { [1.0; 3] });
            }
        }
        assert_eq!(psnr(&c, &d, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn psnr_is_symmetric_and_monotone_in_noise() {
        let a = Image::new(16, 16, [0.5; 3]);
        let noisy = |amp: f32| {
            let mut img = a.clone();
            for y in 0..16 {
                for x in 0..16 {
                    // Deterministic alternating perturbation.
                    let s = if (x + 3 * y) % 2 == 0 { amp } else { -amp };
                    img.set_pixel(x, y, [0.5 + s, 0.5 - s, 0.5 + s]);
                }
            }
            img
        };
        let n1 = noisy(0.01);
        let n2 = noisy(0.02);
        assert_eq!(psnr(&a, &n1, 1.0).unwrap(), psnr(&n1, &a, 1.0).unwrap());
        assert!(psnr(&a, &n1, 1.0).unwrap() > psnr(&a, &n2, 1.0).unwrap());

        let small = Image::new(4, 4, [0.0; 3]);
        assert!(matches!(
            psnr(&a, &small, 1.0),
            Err(RenderError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn image_files_round_trip() {
        let mut img = Image::new(5, 3, [0.0; 3]);
        for y in 0..3 {
            for x in 0..5 {
                img.set_pixel(x, y, [x as f32 * 0.1, y as f32 * 0.2, 0.33]);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let pfm = dir.path().join("t.pfm");
        img.save_pfm(&pfm).unwrap();
        let back = Image::load(&pfm).unwrap();
        assert_eq!(img.pixels(), back.pixels());

        let ppm = dir.path().join("t.ppm");
        img.save_ppm(&ppm).unwrap();
        let back = Image::load(&ppm).unwrap();
        assert_eq!(back.width(), 5);
        for y in 0..3 {
            for x in 0..5 {
                let a = img.pixel(x, y);
                let b = back.pixel(x, y);
                for ch in 0..3 {
                    // One sRGB quantization step of tolerance.
                    assert!((a[ch] - b[ch]).abs() < 0.01);
                }
            }
        }
    }

    #[test]
    fn cube_mesh_is_valid_and_outward() {
        let mesh = Mesh::cube(Vec3::new(1.0, 2.0, 3.0), 0.5);
        mesh.validate().unwrap();
        assert_eq!(mesh.vertices.len(), 24);
        assert_eq!(mesh.triangles.len(), 12);
        for v in &mesh.vertices {
            // Outward frame: the normal points away from the center.
            let out = v.position - Vec3::new(1.0, 2.0, 3.0);
            assert!(v.normal.dot(out) > 0.0);
            // Left-handed naming convention: N = T x Bt.
            assert!((v.tangent.cross(v.bitangent) - v.normal).length() < 1e-12);
        }
    }
}
