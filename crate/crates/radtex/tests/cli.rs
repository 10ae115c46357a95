//! End-to-end runs of the installed binary: every subcommand, the documented
//! exit codes, and byte-level checks of the files it writes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use radtex::baker;
use radtex::imageio::{self, linear_to_srgb8};
use radtex::synthesizer::Image;
use radtex::tracer::{environment_radiance, Environment};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radtex"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "radtex {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_code(args: &[&str]) -> i32 {
    bin()
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("no signal")
}

fn write_scene(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

/// Floor patch in the xz plane facing +y, with a mirror plane coincident
/// with it and a mirror sphere off to the side, under the checker sky.
const MIRROR_FLOOR: &str = "
    mat chrome mirror 0.9 0.9 0.9
    plane 0 0 0 0 1 0 chrome
    sphere 0.8 0.8 0 0.3 chrome
    env default
    patch -1 0 -1 0 0 1 1 0 0 2 2
";

#[test]
fn bake_then_inspect_matches_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(
        dir.path(),
        "empty.scene",
        "env default\npatch 0 0 0 1 0 0 0 1 0 1 1\n",
    );
    let atlas = dir.path().join("sky.radx");
    let image = dir.path().join("bucket.ppm");
    run_ok(&[
        "bake",
        "--scene",
        &scene,
        "--out",
        atlas.to_str().unwrap(),
        "--grid",
        "2x2",
        "--bucket",
        "8",
        "--mode",
        "mirror",
    ]);
    run_ok(&[
        "inspect",
        "--atlas",
        atlas.to_str().unwrap(),
        "--bucket",
        "0,0",
        "--out",
        image.to_str().unwrap(),
    ]);

    // With no geometry, every texel is the sky along its reflection
    // direction; the patch frame is the identity, so tangent space is world
    // space and the whole image is recomputable from the mapping alone.
    let bytes = fs::read(&image).unwrap();
    let (w, h, pixels) = imageio::read_ppm(&bytes).unwrap();
    assert_eq!((w, h), (8, 8));
    let mut expected = Vec::with_capacity(8 * 8 * 3);
    for ly in 0..8u32 {
        for lx in 0..8u32 {
            let refl = baker::texel_reflection((lx, ly), 8);
            let sky = environment_radiance(&Environment::CheckerSky, refl.to_vec());
            for c in [sky.x, sky.y, sky.z] {
                expected.push(linear_to_srgb8(c as f32));
            }
        }
    }
    assert_eq!(pixels, expected);
}

#[test]
fn compare_reports_infinite_psnr_for_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), "sky.scene", "env default\n");
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    run_ok(&[
        "truth",
        "--scene",
        &scene,
        "--camera",
        "0,0,0:0,0,1:0,1,0:60",
        "--res",
        "8x8",
        "--out",
        a.to_str().unwrap(),
    ]);
    fs::copy(&a, &b).unwrap();
    let out = run_ok(&["compare", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "psnr_db=inf");
}

#[test]
fn baked_render_approximates_the_traced_truth() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), "floor.scene", MIRROR_FLOOR);
    let atlas = dir.path().join("floor.radx");
    let render = dir.path().join("render.ppm");
    let truth = dir.path().join("truth.ppm");
    // Camera straight above the patch center: the quad fills the frame, so
    // the traced reference and the atlas render see the same surface.
    let camera = "0,1.2,0:0,0,0:0,0,1:50";
    run_ok(&[
        "bake",
        "--scene",
        &scene,
        "--out",
        atlas.to_str().unwrap(),
        "--grid",
        "16x16",
        "--bucket",
        "32",
        "--mode",
        "mirror",
    ]);
    run_ok(&[
        "render",
        "--atlas",
        atlas.to_str().unwrap(),
        "--scene",
        &scene,
        "--camera",
        camera,
        "--res",
        "65x65",
        "--out",
        render.to_str().unwrap(),
    ]);
    run_ok(&[
        "truth",
        "--scene",
        &scene,
        "--camera",
        camera,
        "--res",
        "65x65",
        "--out",
        truth.to_str().unwrap(),
    ]);
    let out = run_ok(&[
        "compare",
        "--a",
        render.to_str().unwrap(),
        "--b",
        truth.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value: f64 = stdout
        .trim()
        .strip_prefix("psnr_db=")
        .expect("psnr_db line")
        .parse()
        .expect("numeric PSNR");
    assert!(
        value > 10.0,
        "expected a recognizable reconstruction, got {value} dB"
    );
}

#[test]
fn render_writes_float_pfm_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(
        dir.path(),
        "empty.scene",
        "env default\npatch 0 0 0 1 0 0 0 1 0 1 1\n",
    );
    let atlas = dir.path().join("sky.radx");
    run_ok(&[
        "bake",
        "--scene",
        &scene,
        "--out",
        atlas.to_str().unwrap(),
        "--grid",
        "2x2",
        "--bucket",
        "8",
        "--mode",
        "mirror",
    ]);
    let flagged = dir.path().join("out.ppm");
    run_ok(&[
        "render",
        "--atlas",
        atlas.to_str().unwrap(),
        "--camera",
        "0.5,0.5,1.5:0.5,0.5,0:0,1,0:40",
        "--res",
        "16x16",
        "--out",
        flagged.to_str().unwrap(),
        "--pfm",
    ]);
    let bytes = fs::read(&flagged).unwrap();
    assert!(bytes.starts_with(b"PF\n"), "--pfm must force float output");
    let by_ext = dir.path().join("out.pfm");
    run_ok(&[
        "render",
        "--atlas",
        atlas.to_str().unwrap(),
        "--camera",
        "0.5,0.5,1.5:0.5,0.5,0:0,1,0:40",
        "--res",
        "16x16",
        "--out",
        by_ext.to_str().unwrap(),
    ]);
    assert_eq!(bytes, fs::read(&by_ext).unwrap());
    let img = Image::load(&by_ext).unwrap();
    assert_eq!((img.width(), img.height()), (16, 16));
}

#[test]
fn selftest_passes_and_prints_per_suite_lines() {
    let out = run_ok(&["selftest"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("selftest: pass"));
    assert!(!stdout.contains("fail"));
}

#[test]
fn exit_codes_follow_the_documented_classes() {
    let dir = tempfile::tempdir().unwrap();
    let no_patch = write_scene(dir.path(), "nopatch.scene", "env default\n");
    let bad_token = write_scene(dir.path(), "bad.scene", "sphere 0 0 zero 1 m\n");
    let garbage = dir.path().join("garbage.radx");
    fs::write(&garbage, b"not an atlas").unwrap();
    let out_path = dir.path().join("out");
    let out = out_path.to_str().unwrap();

    // Usage problems: unknown subcommands, missing required flags.
    assert_eq!(run_code(&["frobnicate"]), 1);
    assert_eq!(run_code(&["bake", "--scene", "x"]), 1);

    // File and format problems.
    assert_eq!(
        run_code(&[
            "bake", "--scene", "/no/such/scene", "--out", out, "--grid", "2x2", "--bucket", "8",
            "--mode", "mirror"
        ]),
        2
    );
    assert_eq!(
        run_code(&[
            "bake", "--scene", &bad_token, "--out", out, "--grid", "2x2", "--bucket", "8",
            "--mode", "mirror"
        ]),
        2
    );
    assert_eq!(
        run_code(&[
            "inspect",
            "--atlas",
            garbage.to_str().unwrap(),
            "--bucket",
            "0,0",
            "--out",
            out
        ]),
        2
    );

    // Domain problems: well-formed inputs with invalid values.
    assert_eq!(
        run_code(&[
            "bake", "--scene", &no_patch, "--out", out, "--grid", "2x2", "--bucket", "8",
            "--mode", "mirror"
        ]),
        3
    );
    assert_eq!(
        run_code(&[
            "bake", "--scene", &no_patch, "--out", out, "--grid", "0x2", "--bucket", "8",
            "--mode", "mirror"
        ]),
        3
    );

    // Dimension mismatch between otherwise valid images.
    let sky = write_scene(dir.path(), "sky.scene", "env default\n");
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    for (path, res) in [(&a, "8x8"), (&b, "9x9")] {
        assert_eq!(
            run_code(&[
                "truth",
                "--scene",
                &sky,
                "--camera",
                "0,0,0:0,0,1:0,1,0:60",
                "--res",
                res,
                "--out",
                path.to_str().unwrap()
            ]),
            0
        );
    }
    assert_eq!(
        run_code(&["compare", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]),
        3
    );
    assert_eq!(
        run_code(&[
            "compare",
            "--a",
            a.to_str().unwrap(),
            "--b",
            a.to_str().unwrap(),
            "--peak",
            "0"
        ]),
        3
    );
}

#[test]
fn shadow_bake_writes_a_mask_atlas_and_inspect_exports_it() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(
        dir.path(),
        "occluded.scene",
        "mat m lambert 0.5 0.5 0.5\nsphere 0 1 0 0.6 m\npatch -1 0 -1 0 0 1 1 0 0 2 2\n",
    );
    let atlas_path = dir.path().join("shadow.radx");
    run_ok(&[
        "bake",
        "--scene",
        &scene,
        "--out",
        atlas_path.to_str().unwrap(),
        "--grid",
        "4x4",
        "--bucket",
        "8",
        "--mode",
        "shadow",
    ]);
    let bytes = fs::read(&atlas_path).unwrap();
    let atlas = radtex::atlas::RadianceAtlas::deserialize(&bytes).unwrap();
    assert_eq!(atlas.header().texel_kind, radtex::atlas::TexelKind::Mask);

    let image = dir.path().join("mask.ppm");
    run_ok(&[
        "inspect",
        "--atlas",
        atlas_path.to_str().unwrap(),
        "--bucket",
        "1,1",
        "--out",
        image.to_str().unwrap(),
    ]);
    let (w, h, pixels) = imageio::read_ppm(&fs::read(&image).unwrap()).unwrap();
    assert_eq!((w, h), (8, 8));
    // A mask image is pure black and white, and this bucket sees both: the
    // sphere blocks near-normal directions while grazing ones escape.
    assert!(pixels.iter().all(|&b| b == 0 || b == 255));
    assert!(pixels.contains(&0) && pixels.contains(&255));
}
