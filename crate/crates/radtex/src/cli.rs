//! Command-line surface: bake atlases from scene files, re-render them from
//! arbitrary cameras, produce ray-traced references, compare images, and
//! inspect single buckets.
//!
//! Exit codes: 0 success, 1 usage error, 2 file or format error,
//! 3 validation or domain error. Scene files draw the line between the last
//! two at parseability: unreadable tokens are format errors, well-formed but
//! invalid values (non-finite numbers, unknown material ids, degenerate
//! geometry) are domain errors.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atlas::{BucketMode, RadianceAtlas, TexelKind};
use crate::baker::{self, BakeMode, BakeOptions, SurfacePatch};
use crate::codec;
use crate::mapping::{
    disc_to_square, project_equisolid, square_to_disc, unproject_equisolid, DiscPoint2,
    SquarePoint2, UnitDir3,
};
use crate::synthesizer::{
    ground_truth, psnr, rasterize_with, Camera, Image, Mesh, RenderError, RenderOptions,
};
use crate::tracer::{Environment, Material, PointLight, Primitive, Scene, Shape};
use crate::Vec3;

const EXIT_USAGE: i32 = 1;
const EXIT_FILE: i32 = 2;
const EXIT_DOMAIN: i32 = 3;

#[derive(Debug)]
enum CliError {
    File(String),
    Domain(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::File(_) => EXIT_FILE,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::File(m) | CliError::Domain(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "radtex",
    version,
    about = "Bake ray-traced radiance into bucket textures and re-render it by lookup"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bake a scene's patch into a RADX bucket atlas.
    Bake(BakeArgs),
    /// Render an atlas-textured surface from a camera.
    Render(RenderArgs),
    /// Ray-trace the scene directly as a reference image.
    Truth(TruthArgs),
    /// Print the PSNR between two images.
    Compare(CompareArgs),
    /// Export one bucket as an image.
    Inspect(InspectArgs),
    /// Run the built-in projection test suites.
    Selftest,
}

#[derive(Args)]
struct BakeArgs {
    /// Scene description file (must declare exactly one patch).
    #[arg(long)]
    scene: PathBuf,
    /// Output RADX atlas path.
    #[arg(long)]
    out: PathBuf,
    /// Bucket grid as WxH, e.g. 16x16.
    #[arg(long, value_parser = parse_dims)]
    grid: (u32, u32),
    /// Texels per bucket side.
    #[arg(long)]
    bucket: u32,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Virtual room depth behind the patch (interior mode only).
    #[arg(long, default_value_t = 1.0)]
    interior_depth: f64,
    /// Texel storage; ignored by shadow bakes, which always store a mask.
    #[arg(long, value_enum, default_value_t = TexelArg::F32)]
    texel: TexelArg,
}

#[derive(Args)]
struct RenderArgs {
    /// RADX atlas, raw or encoded.
    #[arg(long)]
    atlas: PathBuf,
    /// Scene file whose patch places the textured surface; defaults to the
    /// unit quad at the origin.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// px,py,pz:lx,ly,lz:ux,uy,uz:vfov
    #[arg(long, value_parser = parse_camera)]
    camera: CameraArg,
    /// Image size as WxH.
    #[arg(long, value_parser = parse_dims)]
    res: (u32, u32),
    /// Output image; .pfm extension selects float output as well.
    #[arg(long)]
    out: PathBuf,
    /// Blend the four neighboring buckets instead of nearest-bucket lookup.
    #[arg(long)]
    blend_buckets: bool,
    /// Write a float PFM image regardless of extension.
    #[arg(long)]
    pfm: bool,
    /// Carrier geometry for the atlas.
    #[arg(long, value_enum, default_value_t = ShapeArg::Quad)]
    shape: ShapeArg,
}

#[derive(Args)]
struct TruthArgs {
    #[arg(long)]
    scene: PathBuf,
    /// px,py,pz:lx,ly,lz:ux,uy,uz:vfov
    #[arg(long, value_parser = parse_camera)]
    camera: CameraArg,
    /// Image size as WxH.
    #[arg(long, value_parser = parse_dims)]
    res: (u32, u32),
    /// Output image; .pfm extension selects float output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Peak signal value for the PSNR ratio.
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    atlas: PathBuf,
    /// Bucket grid position as BX,BY.
    #[arg(long, value_parser = parse_pair)]
    bucket: (u32, u32),
    /// Output image; .pfm extension selects float output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Mirror,
    Shaded,
    Shadow,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TexelArg {
    F32,
    U8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ShapeArg {
    Quad,
    Cube,
}

#[derive(Clone, Debug, PartialEq)]
struct CameraArg {
    position: Vec3,
    look_at: Vec3,
    up: Vec3,
    vfov_deg: f64,
}

impl CameraArg {
    fn with_res(&self, res: (u32, u32)) -> Camera {
        Camera {
            position: self.position,
            look_at: self.look_at,
            up: self.up,
            vfov_deg: self.vfov_deg,
            width: res.0,
            height: res.1,
        }
    }
}

/// Entry point behind `main`; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Bake(args) => cmd_bake(args),
        Command::Render(args) => cmd_render(args),
        Command::Truth(args) => cmd_truth(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn cmd_bake(args: BakeArgs) -> Result<(), CliError> {
    let parsed = load_scene(&args.scene)?;
    let patch = single_patch(&parsed)?;
    let mode = match args.mode {
        ModeArg::Mirror => BakeMode::Mirror,
        ModeArg::Shaded => BakeMode::Shaded {
            material: Material::Lambert {
                albedo: Vec3::new(1.0, 1.0, 1.0),
            },
        },
        ModeArg::Shadow => BakeMode::ShadowMask,
        ModeArg::Interior => BakeMode::Interior {
            depth: args.interior_depth,
            walls: baker::default_interior_walls(),
        },
    };
    let options = BakeOptions {
        texel_kind: match args.texel {
            TexelArg::F32 => TexelKind::F32,
            TexelArg::U8 => TexelKind::U8,
        },
        ..BakeOptions::default()
    };
    let atlas = baker::bake_with(
        &parsed.scene,
        patch,
        args.grid.0,
        args.grid.1,
        args.bucket,
        &mode,
        &options,
    )
    .map_err(|e| CliError::Domain(e.to_string()))?;
    fs::write(&args.out, atlas.serialize()).map_err(|e| path_err(&args.out, &e))?;
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let atlas = load_atlas(&args.atlas)?;
    let patch = match &args.scene {
        Some(path) => {
            let parsed = load_scene(path)?;
            single_patch(&parsed)?.clone()
        }
        None => unit_patch(),
    };
    let mesh = match args.shape {
        ShapeArg::Quad => Mesh::quad_from_patch(&patch),
        ShapeArg::Cube => {
            let (ex, ey) = patch.extent();
            Mesh::cube(patch.surface_point(0.5, 0.5), 0.5 * ex.min(ey))
        }
    };
    let camera = args.camera.with_res(args.res);
    let options = RenderOptions {
        bucket_mode: if args.blend_buckets {
            BucketMode::Blend
        } else {
            BucketMode::Nearest
        },
        ..RenderOptions::default()
    };
    let image = rasterize_with(&mesh, &atlas, &camera, &options).map_err(render_err)?;
    write_image(&image, &args.out, args.pfm)
}

fn cmd_truth(args: TruthArgs) -> Result<(), CliError> {
    let parsed = load_scene(&args.scene)?;
    let camera = args.camera.with_res(args.res);
    let image = ground_truth(&parsed.scene, &camera).map_err(render_err)?;
    write_image(&image, &args.out, false)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    if !(args.peak.is_finite() && args.peak > 0.0) {
        return Err(CliError::Domain(format!(
            "peak must be finite and positive, got {}",
            args.peak
        )));
    }
    let a = Image::load(&args.a).map_err(|e| image_err(&args.a, e))?;
    let b = Image::load(&args.b).map_err(|e| image_err(&args.b, e))?;
    let value = psnr(&a, &b, args.peak).map_err(render_err)?;
    println!("psnr_db={value}");
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), CliError> {
    let atlas = load_atlas(&args.atlas)?;
    let header = *atlas.header();
    let (bx, by) = args.bucket;
    if bx >= header.width_buckets || by >= header.height_buckets {
        return Err(CliError::Domain(format!(
            "bucket ({bx},{by}) outside the {}x{} grid",
            header.width_buckets, header.height_buckets
        )));
    }
    let n = header.bucket_res;
    let gw = header.global_width() as usize;
    let ch = header.channels as usize;
    // u8 texels sit on a 0..=255 scale; bring every kind to linear floats so
    // the image writers apply one consistent transfer curve.
    let scale = match header.texel_kind {
        TexelKind::U8 => 1.0 / 255.0,
        TexelKind::F32 | TexelKind::Mask => 1.0,
    };
    let mut image = Image::new(n, n, [0.0; 3]);
    for ly in 0..n {
        for lx in 0..n {
            let gx = (bx * n + lx) as usize;
            let gy = (by * n + ly) as usize;
            let base = (gy * gw + gx) * ch;
            let px = if ch == 3 {
                [
                    atlas.raw_value(base) * scale,
                    atlas.raw_value(base + 1) * scale,
                    atlas.raw_value(base + 2) * scale,
                ]
            } else {
                let v = atlas.raw_value(base) * scale;
                [v, v, v]
            };
            image.set_pixel(lx, ly, px);
        }
    }
    write_image(&image, &args.out, false)
}

fn cmd_selftest() -> Result<(), CliError> {
    let suites: [(&str, fn() -> bool); 5] = [
        ("projection round trip (64-bit)", round_trip_suite_f64),
        ("projection round trip (32-bit)", round_trip_suite_f32),
        ("projection radius law", radius_law_suite),
        ("disc-square round trip", disc_square_suite),
        ("equal-area law", area_law_suite),
    ];
    let mut all_ok = true;
    for (name, suite) in suites {
        let ok = suite();
        println!("{name}: {}", if ok { "pass" } else { "fail" });
        all_ok &= ok;
    }
    if all_ok {
        println!("selftest: pass");
        Ok(())
    } else {
        Err(CliError::Domain("selftest failed".to_string()))
    }
}

/// Uniform hemisphere directions: z uniform in [0,1] is uniform in solid
/// angle for the azimuthal band.
fn hemisphere_dir(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let z: f64 = rng.random();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let s = (1.0 - z * z).sqrt();
    (s * phi.cos(), s * phi.sin(), z)
}

fn round_trip_suite_f64() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100_000 {
        let (x, y, z) = hemisphere_dir(&mut rng);
        let i = UnitDir3::new(x, y, z).expect("unit by construction");
        let a = match project_equisolid(i) {
            Ok(a) => a,
            Err(_) => return false,
        };
        let back = unproject_equisolid(a);
        let err = (back.x() - x)
            .abs()
            .max((back.y() - y).abs())
            .max((back.z() - z).abs());
        if err > 1e-6 {
            return false;
        }
    }
    true
}

fn round_trip_suite_f32() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..100_000 {
        let (x, y, z) = hemisphere_dir(&mut rng);
        let (x, y, z) = (x as f32, y as f32, z as f32);
        let i = match UnitDir3::new(x, y, z) {
            Ok(i) => i,
            // f32 rounding may push a grazing sample off the unit sphere.
            Err(_) => continue,
        };
        let a = match project_equisolid(i) {
            Ok(a) => a,
            Err(_) => return false,
        };
        let back = unproject_equisolid(a);
        let err = (back.x() - x)
            .abs()
            .max((back.y() - y).abs())
            .max((back.z() - z).abs());
        if err > 1e-4 {
            return false;
        }
    }
    true
}

fn radius_law_suite() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..100_000 {
        let (x, y, z) = hemisphere_dir(&mut rng);
        let i = UnitDir3::new(x, y, z).expect("unit by construction");
        let a = match project_equisolid(i) {
            Ok(a) => a,
            Err(_) => return false,
        };
        let theta = z.clamp(-1.0, 1.0).acos();
        let expected = std::f64::consts::SQRT_2 * (theta / 2.0).sin();
        if (a.radius() - expected).abs() > 1e-6 {
            return false;
        }
    }
    true
}

fn disc_square_suite() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..100_000 {
        let r = rng.random::<f64>();
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let a = match DiscPoint2::new(r * phi.cos(), r * phi.sin()) {
            Ok(a) => a,
            Err(_) => continue,
        };
        let back = square_to_disc(disc_to_square(a));
        if (back.x() - a.x()).abs() > 1e-9 || (back.y() - a.y()).abs() > 1e-9 {
            return false;
        }
    }
    // Corners map to the rim diagonals, axes are fixed points.
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
        let corner = SquarePoint2::new(sx, sy).expect("corner");
        let d = square_to_disc(corner);
        if (d.x() - sx * half).abs() > 1e-9 || (d.y() - sy * half).abs() > 1e-9 {
            return false;
        }
    }
    for (ax, ay) in [(0.7f64, 0.0), (-0.3, 0.0), (0.0, 0.9), (0.0, -0.5)] {
        let a = DiscPoint2::new(ax, ay).expect("on axis");
        let b = disc_to_square(a);
        if (b.x() - ax).abs() > 1e-9 || (b.y() - ay).abs() > 1e-9 {
            return false;
        }
    }
    true
}

fn area_law_suite() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    const SAMPLES: u64 = 1_000_000;
    let radii = [0.25f64, 0.5, 0.75];
    let mut hits = [0u64; 3];
    for _ in 0..SAMPLES {
        let (x, y, z) = hemisphere_dir(&mut rng);
        let i = UnitDir3::new(x, y, z).expect("unit by construction");
        let a = match project_equisolid(i) {
            Ok(a) => a,
            Err(_) => return false,
        };
        for (k, r) in radii.iter().enumerate() {
            if a.radius() <= *r {
                hits[k] += 1;
            }
        }
    }
    for (k, r) in radii.iter().enumerate() {
        let p = r * r;
        let sigma = (p * (1.0 - p) / SAMPLES as f64).sqrt();
        let observed = hits[k] as f64 / SAMPLES as f64;
        if (observed - p).abs() > 3.0 * sigma {
            return false;
        }
    }
    true
}

/// Scene text plus the patches it declares; the patch is carried separately
/// because it is bake input, not traceable geometry.
#[derive(Debug)]
struct ParsedScene {
    scene: Scene,
    patches: Vec<SurfacePatch>,
}

fn load_scene(path: &Path) -> Result<ParsedScene, CliError> {
    let text = fs::read_to_string(path).map_err(|e| path_err(path, &e))?;
    parse_scene(&text)
}

fn parse_scene(text: &str) -> Result<ParsedScene, CliError> {
    let mut scene = Scene::default();
    let mut patches = Vec::new();
    let mut material_ids: HashMap<String, usize> = HashMap::new();

    for (index, raw) in text.lines().enumerate() {
        let no = index + 1;
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let fmt = |msg: String| CliError::File(format!("scene line {no}: {msg}"));
        let dom = |msg: String| CliError::Domain(format!("scene line {no}: {msg}"));
        let nums = |from: usize, count: usize| -> Result<Vec<f64>, CliError> {
            let mut out = Vec::with_capacity(count);
            for tok in &tokens[from..from + count] {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| fmt(format!("expected a number, got '{tok}'")))?;
                if !v.is_finite() {
                    return Err(dom(format!("number '{tok}' is not finite")));
                }
                out.push(v);
            }
            Ok(out)
        };
        let arity = |expected: usize| -> Result<(), CliError> {
            if tokens.len() == expected {
                Ok(())
            } else {
                Err(fmt(format!(
                    "'{}' takes {} arguments, got {}",
                    tokens[0],
                    expected - 1,
                    tokens.len() - 1
                )))
            }
        };
        let material = |tok: &str| -> Result<usize, CliError> {
            material_ids
                .get(tok)
                .copied()
                .ok_or_else(|| dom(format!("material '{tok}' is not defined")))
        };

        match tokens[0] {
            "mat" => {
                arity(6)?;
                let id = tokens[1];
                if material_ids.contains_key(id) {
                    return Err(dom(format!("material '{id}' is defined twice")));
                }
                let v = nums(3, 3)?;
                let color = Vec3::new(v[0], v[1], v[2]);
                let mat = match tokens[2] {
                    "lambert" => Material::Lambert { albedo: color },
                    "mirror" => Material::Mirror { tint: color },
                    other => return Err(fmt(format!("unknown material kind '{other}'"))),
                };
                material_ids.insert(id.to_string(), scene.materials.len());
                scene.materials.push(mat);
            }
            "sphere" => {
                arity(6)?;
                let v = nums(1, 4)?;
                let mat = material(tokens[5])?;
                scene.primitives.push(Primitive {
                    shape: Shape::Sphere {
                        center: Vec3::new(v[0], v[1], v[2]),
                        radius: v[3],
                    },
                    material: mat,
                });
            }
            "plane" => {
                arity(8)?;
                let v = nums(1, 6)?;
                let mat = material(tokens[7])?;
                let shape = Shape::plane(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
                    .map_err(|e| dom(e.to_string()))?;
                scene.primitives.push(Primitive {
                    shape,
                    material: mat,
                });
            }
            "box" => {
                arity(8)?;
                let v = nums(1, 6)?;
                let mat = material(tokens[7])?;
                scene.primitives.push(Primitive {
                    shape: Shape::Aabb {
                        min: Vec3::new(v[0], v[1], v[2]),
                        max: Vec3::new(v[3], v[4], v[5]),
                    },
                    material: mat,
                });
            }
            "light" => {
                arity(7)?;
                let v = nums(1, 6)?;
                scene.lights.push(PointLight {
                    position: Vec3::new(v[0], v[1], v[2]),
                    intensity: Vec3::new(v[3], v[4], v[5]),
                });
            }
            "env" => {
                arity(2)?;
                match tokens[1] {
                    "default" => scene.environment = Environment::CheckerSky,
                    other => return Err(fmt(format!("unknown environment '{other}'"))),
                }
            }
            "patch" => {
                arity(12)?;
                let v = nums(1, 11)?;
                let tangent = Vec3::new(v[3], v[4], v[5])
                    .normalized()
                    .ok_or_else(|| dom("patch tangent must be nonzero".to_string()))?;
                let bitangent = Vec3::new(v[6], v[7], v[8])
                    .normalized()
                    .ok_or_else(|| dom("patch bitangent must be nonzero".to_string()))?;
                let patch = SurfacePatch::new(
                    Vec3::new(v[0], v[1], v[2]),
                    tangent,
                    bitangent,
                    (v[9], v[10]),
                )
                .map_err(|e| dom(e.to_string()))?;
                patches.push(patch);
            }
            other => return Err(fmt(format!("unknown directive '{other}'"))),
        }
    }

    scene
        .validate()
        .map_err(|e| CliError::Domain(format!("scene: {e}")))?;
    Ok(ParsedScene { scene, patches })
}

fn single_patch(parsed: &ParsedScene) -> Result<&SurfacePatch, CliError> {
    match parsed.patches.as_slice() {
        [p] => Ok(p),
        [] => Err(CliError::Domain(
            "scene declares no patch; exactly one is required".to_string(),
        )),
        _ => Err(CliError::Domain(format!(
            "scene declares {} patches; exactly one is required",
            parsed.patches.len()
        ))),
    }
}

fn unit_patch() -> SurfacePatch {
    SurfacePatch::new(
        Vec3::zero(),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        (1.0, 1.0),
    )
    .expect("the unit frame is valid")
}

fn load_atlas(path: &Path) -> Result<RadianceAtlas, CliError> {
    let bytes = fs::read(path).map_err(|e| path_err(path, &e))?;
    codec::load_atlas_bytes(&bytes)
        .map_err(|e| CliError::File(format!("{}: {e}", path.display())))
}

fn write_image(image: &Image, path: &Path, force_pfm: bool) -> Result<(), CliError> {
    let pfm = force_pfm
        || path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    let result = if pfm {
        image.save_pfm(path)
    } else {
        image.save_ppm(path)
    };
    result.map_err(|e| CliError::File(format!("{}: {e}", path.display())))
}

fn path_err(path: &Path, e: &std::io::Error) -> CliError {
    CliError::File(format!("{}: {e}", path.display()))
}

fn image_err(path: &Path, e: RenderError) -> CliError {
    CliError::File(format!("{}: {e}", path.display()))
}

/// Camera and mesh problems are domain errors; anything touching bytes on
/// disk is a file error.
fn render_err(e: RenderError) -> CliError {
    match e {
        RenderError::Atlas(_) | RenderError::Image(_) | RenderError::Io(_) => {
            CliError::File(e.to_string())
        }
        _ => CliError::Domain(e.to_string()),
    }
}

fn parse_dims(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let w: u32 = w.parse().map_err(|_| format!("bad width '{w}'"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height '{h}'"))?;
    Ok((w, h))
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected X,Y, got '{s}'"))?;
    let x: u32 = x.parse().map_err(|_| format!("bad index '{x}'"))?;
    let y: u32 = y.parse().map_err(|_| format!("bad index '{y}'"))?;
    Ok((x, y))
}

fn parse_camera(s: &str) -> Result<CameraArg, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(format!(
            "expected px,py,pz:lx,ly,lz:ux,uy,uz:vfov, got '{s}'"
        ));
    }
    let triple = |part: &str, name: &str| -> Result<Vec3, String> {
        let nums: Vec<&str> = part.split(',').collect();
        if nums.len() != 3 {
            return Err(format!("{name} needs three comma-separated numbers"));
        }
        let mut v = [0.0f64; 3];
        for (slot, tok) in v.iter_mut().zip(&nums) {
            *slot = tok
                .parse()
                .map_err(|_| format!("{name}: bad number '{tok}'"))?;
        }
        Ok(Vec3::new(v[0], v[1], v[2]))
    };
    Ok(CameraArg {
        position: triple(parts[0], "position")?,
        look_at: triple(parts[1], "look-at")?,
        up: triple(parts[2], "up")?,
        vfov_deg: parts[3]
            .parse()
            .map_err(|_| format!("bad field of view '{}'", parts[3]))?,
    })
}
