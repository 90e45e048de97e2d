use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowvis_cli::commands::{self, EvaluateOptions};
use lowvis_cli::design_file::{round_trips, DeriveContext, DesignFile, Provenance};
use lowvis_cli::Config;
use lowvis_core::design::DesignVector;
use lowvis_core::geometry::{Assembly, Component, Pose, Primitive, Role, Vec3};
use lowvis_core::raster::Image;
use lowvis_core::render::RenderParams;
use lowvis_core::visibility::VisibilityParams;

fn lowvis(args: &[&str], env_config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lowvis"));
    cmd.args(args).env_remove("LOWVIS_CONFIG");
    if let Some(p) = env_config {
        cmd.env("LOWVIS_CONFIG", p);
    }
    cmd.output().expect("run lowvis")
}

fn small_config() -> Config {
    Config {
        render: RenderParams {
            resolution: 64,
            n_yaw: 12,
            ..RenderParams::default()
        },
        visibility: VisibilityParams {
            n_pitch: 3,
            n_backgrounds: 2,
            n_yaw: 12,
            ..VisibilityParams::default()
        },
        ..Config::default()
    }
}

fn write_config(dir: &Path, cfg: &Config) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn sample_into(dir: &Path, count: usize) -> (PathBuf, PathBuf) {
    let config = write_config(dir, &small_config());
    let out = dir.join("designs");
    let o = lowvis(
        &["sample", "--config", config.to_str().unwrap(), "--count", &count.to_string(), "--seed", "1", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (config, out)
}

#[test]
fn zero_count_writes_header_only_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = sample_into(dir.path(), 0);
    let manifest = std::fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1);
    assert!(manifest.starts_with("index,seed,draw_index,c_m,spin_rps,visibility,total_mass,n_counterweights,file"));
}

#[test]
fn sampling_is_repeatable_and_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (config, a) = sample_into(dir.path(), 2);
    let b = dir.path().join("again");
    let o = lowvis(
        &["sample", "--count", "2", "--seed", "1", "--out", b.to_str().unwrap()],
        Some(&config),
    );
    assert!(o.status.success());
    for name in ["design_0000.json", "design_0001.json", "manifest.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    for p in commands::design_paths(&a).unwrap() {
        assert!(round_trips(&p).unwrap());
        let f = DesignFile::load(&p).unwrap();
        assert!(f.report.overall);
        assert_eq!(f.visibility.as_ref().unwrap().metric, "pyramid");
    }
    let manifest = std::fs::read_to_string(a.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 3);
}

#[test]
fn evaluate_reproduces_stored_score() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = sample_into(dir.path(), 1);
    let path = out.join("design_0000.json");
    let stored = DesignFile::load(&path).unwrap().visibility.unwrap();
    let rec = commands::evaluate(&path, &EvaluateOptions::default()).unwrap();
    assert_eq!(rec.score, stored.score);

    let first = lowvis(&["evaluate", "--design", path.to_str().unwrap()], None);
    let second = lowvis(&["evaluate", "--design", path.to_str().unwrap()], None);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let other = commands::evaluate(
        &path,
        &EvaluateOptions {
            procedural: Some(5),
            ..EvaluateOptions::default()
        },
    )
    .unwrap();
    assert_ne!(other.score.total, stored.score.total);
}

#[test]
fn evaluate_empty_assembly_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let design = dir.path().join("empty.json");
    std::fs::write(&design, r#"{"components": []}"#).unwrap();
    let o = lowvis(&["evaluate", "--design", design.to_str().unwrap(), "--config", config.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["score"]["total"].as_f64(), Some(0.0));
}

#[test]
fn unknown_metric_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("empty.json");
    std::fs::write(&design, r#"{"components": []}"#).unwrap();
    let o = lowvis(&["evaluate", "--design", design.to_str().unwrap(), "--metric", "ssim"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = lowvis(&["evaluate", "--design", design.to_str().unwrap(), "--metric", "learned"], None);
    assert_eq!(o.status.code(), Some(1));
}

fn sphere_file(dir: &Path, x: f64, z: f64, diameter: f64) -> PathBuf {
    let a = Assembly::new(vec![Component::new(
        Role::Counterweight,
        Primitive::Sphere { diameter },
        Pose::from_position(Vec3::new(x, 0.0, z)),
        1.0,
        0.0,
    )]);
    let p = dir.join(format!("sphere_{x}_{z}_{diameter}.json"));
    std::fs::write(&p, serde_json::to_string(&a).unwrap()).unwrap();
    p
}

fn load_png(path: &Path) -> Image {
    let img = image::open(path).unwrap().to_luma8();
    let (w, h) = img.dimensions();
    Image::from_fn(w as usize, h as usize, |x, y| img.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0)
}

#[test]
fn top_view_of_centred_sphere_is_a_centred_disk() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &Config::default());
    let design = sphere_file(dir.path(), 0.0, 0.0, 40.0);
    let out = dir.path().join("top.png");
    let o = lowvis(
        &["render", "--design", design.to_str().unwrap(), "--config", config.to_str().unwrap(), "--pitch", "0", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let img = load_png(&out);
    let p = RenderParams::default();
    let px = p.window / p.resolution as f64;
    let (mut dark, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for y in 0..img.height {
        for x in 0..img.width {
            if img.get(x, y) < 0.5 {
                dark += 1.0;
                cx += x as f64 + 0.5;
                cy += y as f64 + 0.5;
            }
        }
    }
    let area = dark * px * px;
    let want = std::f64::consts::PI * 20.0 * 20.0;
    assert!((area - want).abs() / want < 0.01, "area {area} vs {want}");
    let half = img.width as f64 / 2.0;
    assert!((cx / dark - half).abs() < 0.5 && (cy / dark - half).abs() < 0.5);
}

#[test]
fn side_view_height_is_bounded_by_the_vertical_extent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &Config::default());
    let design = sphere_file(dir.path(), 20.0, 10.0, 30.0);
    let out = dir.path().join("side.png");
    let o = lowvis(
        &["render", "--design", design.to_str().unwrap(), "--config", config.to_str().unwrap(), "--pitch", "90", "--blur", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let img = load_png(&out);
    let px = RenderParams::default().window / img.height as f64;
    // looking along +x, image columns run along -z
    let cols = (0..img.width).filter(|&x| (0..img.height).any(|y| img.get(x, y) < 1.0)).count();
    assert!(cols as f64 * px <= 30.0 + 2.0 * px, "{cols} columns");
    assert!(cols > 0);
}

#[test]
fn report_on_empty_and_single_design() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("none");
    std::fs::create_dir(&empty).unwrap();
    let out = dir.path().join("report_empty");
    let o = lowvis(&["report", "--designs", empty.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(out.join("histogram.csv")).unwrap().lines().count(), 1);

    let (_, designs) = sample_into(dir.path(), 1);
    std::fs::remove_file(designs.join("manifest.csv")).unwrap();
    let out = dir.path().join("report_one");
    let s = commands::report(&[designs], &out, 40).unwrap();
    assert_eq!(s.bins.iter().filter(|b| b.count_sampled > 0).count(), 1);
    assert_eq!(s.sampled.count, 1);
    assert_eq!(s.refined.count, 0);
}

#[test]
fn select_orders_by_visibility() {
    let dir = tempfile::tempdir().unwrap();
    let (_, designs) = sample_into(dir.path(), 3);
    let top = commands::select(&designs, 2, &dir.path().join("top")).unwrap();
    assert_eq!(top.len(), 2);
    let v: Vec<f64> = top.iter().map(|p| DesignFile::load(p).unwrap().visibility_total().unwrap()).collect();
    let all: Vec<f64> = commands::design_paths(&designs)
        .unwrap()
        .iter()
        .map(|p| DesignFile::load(p).unwrap().visibility_total().unwrap())
        .collect();
    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(v[0], min);
    assert!(v[0] <= v[1]);
}

#[test]
fn optimize_rejects_infeasible_input() {
    let dir = tempfile::tempdir().unwrap();
    let (config, designs) = sample_into(dir.path(), 1);
    let f = DesignFile::load(&designs.join("design_0000.json")).unwrap();
    let mut v = f.vector.0.clone();
    let cw = v.len() - 4;
    v[cw] = 30.0;
    let cfg = Config::load(&config).unwrap();
    let bad = DesignFile::derive(
        DesignVector::new(v).unwrap(),
        DeriveContext::from_config(&cfg),
        None,
        Provenance::sampled(&cfg.sample, 0),
    )
    .unwrap();
    assert!(!bad.report.overall);
    let path = dir.path().join("bad.json");
    bad.save(&path).unwrap();
    let o = lowvis(
        &["optimize", "--design", path.to_str().unwrap(), "--config", config.to_str().unwrap(), "--out", dir.path().join("o.json").to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("total_mass"), "{err}");
    assert!(!dir.path().join("o.json").exists());
}

#[test]
fn optimize_records_result_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (config, designs) = sample_into(dir.path(), 1);
    let src = designs.join("design_0000.json");
    let once = dir.path().join("once.json");
    let f1 = commands::optimize(&src, Some(&config), &once).unwrap();
    let rec = f1.provenance.refinements.last().unwrap();
    let before = DesignFile::load(&src).unwrap().visibility_total().unwrap();
    assert_eq!(rec.initial_visibility, before);
    assert_eq!(rec.final_visibility, f1.visibility_total().unwrap());
    assert!(rec.final_visibility <= rec.initial_visibility);
    assert!(f1.report.overall);
    assert!(round_trips(&once).unwrap());

    let twice = dir.path().join("twice.json");
    let f2 = commands::optimize(&once, Some(&config), &twice).unwrap();
    assert_eq!(f2.provenance.refinements.len(), 2);
    let (a, b) = (f1.visibility_total().unwrap(), f2.visibility_total().unwrap());
    let ftol = Config::load(&config).unwrap().refine.ftol;
    assert!(b <= a && a - b <= ftol.max(0.02 * a), "{a} -> {b}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lowvis(&["--help"], None).status.code(), Some(0));
    assert_eq!(lowvis(&["--version"], None).status.code(), Some(0));
    assert_eq!(lowvis(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(lowvis(&["sample", "--count", "x", "--out", "d"], None).status.code(), Some(1));

    let missing = dir.path().join("missing.json");
    assert_eq!(
        lowvis(&["evaluate", "--design", missing.to_str().unwrap()], None).status.code(),
        Some(3)
    );

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"sampel": {}}"#).unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        lowvis(&["sample", "--count", "0", "--out", out.to_str().unwrap()], Some(&bad)).status.code(),
        Some(1)
    );

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let config = write_config(dir.path(), &small_config());
    let o = lowvis(
        &["sample", "--config", config.to_str().unwrap(), "--count", "0", "--out", blocker.join("sub").to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
}
