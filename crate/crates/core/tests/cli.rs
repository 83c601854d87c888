use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proxekit::denoise::decode;
use proxekit::io;
use proxekit::pipeline::{denoise_stage, files, read_masks, PipelineConfig};
use proxekit::proxy::{Primitive, Proxy};
use proxekit::{SuperquadricParams, TriangleMesh, Vec3};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxekit")).args(args).output().expect("spawn proxekit")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Scene {
    dir: tempfile::TempDir,
}

impl Scene {
    /// Two spheres as a mesh, a matching two-primitive proxy, and an empty
    /// script.
    fn new() -> Scene {
        let dir = tempfile::tempdir().unwrap();
        let (ca, cb) = (Vec3::new(-0.2, -0.2, 0.0), Vec3::new(-0.2, 0.2, 0.0));
        let mesh = TriangleMesh::icosphere(0.15, ca, 3).merged(&TriangleMesh::icosphere(0.15, cb, 3));
        io::save_obj(&dir.path().join("shape.obj"), &mesh).unwrap();
        let proxy = Proxy::new(
            "pair",
            vec![
                Primitive::new(1, SuperquadricParams::sphere(0.15, ca.into()).unwrap()),
                Primitive::new(2, SuperquadricParams::sphere(0.15, cb.into()).unwrap()),
            ],
        )
        .unwrap();
        fs::write(dir.path().join("proxy.json"), proxy.to_json()).unwrap();
        fs::write(dir.path().join("empty.pxe"), "").unwrap();
        fs::write(dir.path().join("move.pxe"), "# shift the upper ball\ntranslate #2 by 0.25 0 0\n").unwrap();
        let mut points = proxy.primitives()[0].params.sample_surface(300);
        points.extend(proxy.primitives()[1].params.sample_surface(300));
        io::write_points(&dir.path().join("points.xyz"), &points).unwrap();
        Scene { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn primitives_array(path: &Path) -> String {
    let v: serde_json::Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    serde_json::to_string(&v["primitives"]).unwrap()
}

#[test]
fn fit_two_spheres() {
    let s = Scene::new();
    let out = s.path("fit.json");
    let o = run(&["fit", p(&s.path("points.xyz")), "--k", "2", "--seed", "3", "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let proxy = Proxy::from_bytes(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(proxy.len(), 2);
    let mut ys: Vec<f64> = proxy.primitives().iter().map(|q| q.params.translation()[1]).collect();
    ys.sort_by(f64::total_cmp);
    assert!((ys[0] + 0.2).abs() < 0.02 && (ys[1] - 0.2).abs() < 0.02, "{ys:?}");
}

#[test]
fn fit_missing_file_names_path() {
    let o = run(&["fit", "/no/such/points.xyz", "--k", "2", "-o", "/tmp/unused.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/points.xyz"), "{}", stderr(&o));
}

#[test]
fn fit_zero_k_is_usage_error() {
    let s = Scene::new();
    let o = run(&["fit", p(&s.path("points.xyz")), "--k", "0", "-o", p(&s.path("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--k"), "{}", stderr(&o));
    assert!(!s.path("x.json").exists());
}

#[test]
fn edit_empty_script_keeps_primitives() {
    let s = Scene::new();
    let out = s.path("edited.json");
    let o = run(&["edit", p(&s.path("proxy.json")), p(&s.path("empty.pxe")), "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(primitives_array(&out), primitives_array(&s.path("proxy.json")));
    assert_eq!(fs::read(&out).unwrap(), fs::read(s.path("proxy.json")).unwrap());
}

#[test]
fn edit_scale_changes_one_primitive() {
    let s = Scene::new();
    fs::write(s.path("scale.pxe"), "scale #1 by 1.0 1.0 1.5\n").unwrap();
    let out = s.path("edited.json");
    let o = run(&["edit", p(&s.path("proxy.json")), p(&s.path("scale.pxe")), "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("1 unchanged, 1 edited, 0 added, 0 deleted"), "{}", stderr(&o));
    let edited = Proxy::from_bytes(&fs::read(&out).unwrap()).unwrap();
    let a = edited.get(1).unwrap().params.scale();
    assert!((a[2] - 0.225).abs() < 1e-12 && a[0] == 0.15);
}

#[test]
fn edit_bad_verb_reports_position() {
    let s = Scene::new();
    fs::write(s.path("bad.pxe"), "delete #1\n  shrink #2\n").unwrap();
    let o = run(&["edit", p(&s.path("proxy.json")), p(&s.path("bad.pxe")), "-o", p(&s.path("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown verb 'shrink' at line 2, col 3"), "{}", stderr(&o));
}

#[test]
fn edit_unknown_id_is_input_error() {
    let s = Scene::new();
    fs::write(s.path("bad.pxe"), "delete #9\n").unwrap();
    let o = run(&["edit", p(&s.path("proxy.json")), p(&s.path("bad.pxe")), "-o", p(&s.path("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown id 9"), "{}", stderr(&o));
}

#[test]
fn malformed_proxy_is_input_error() {
    let s = Scene::new();
    fs::write(s.path("bad.json"), r#"{"category": "x", "primitives": [], "extra": 1}"#).unwrap();
    let o = run(&["edit", p(&s.path("bad.json")), p(&s.path("empty.pxe")), "-o", p(&s.path("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json"), "{}", stderr(&o));
}

fn pipeline(s: &Scene, script: &str, out: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "pipeline".to_string(),
        p(&s.path("shape.obj")).into(),
        p(&s.path("proxy.json")).into(),
        p(&s.path(script)).into(),
        "-o".into(),
        p(&s.path(out)).into(),
        "--resolution".into(),
        "24".into(),
    ];
    args.extend(extra.iter().map(|a| a.to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&args)
}

#[test]
fn pipeline_writes_every_stage_deterministically() {
    let s = Scene::new();
    let o = pipeline(&s, "move.pxe", "a", &["--save-latents"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.starts_with("chamfer ") && report.contains("\nl_gd ") && report.contains("\niou "), "{report}");
    for name in [
        files::EDITED,
        files::GRID_ORIG,
        files::GRID_PROXY,
        files::MASK_UC,
        files::MASK_ED,
        files::MASK_NEW,
        files::MASK_FOOTPRINT,
        files::WARPED,
        files::DENOISED,
        files::MESH,
        files::METRICS,
        files::LATENT_PROXY,
        files::LATENT_ORIG,
        files::LATENT_WARP,
    ] {
        assert!(s.path("a").join(name).is_file(), "missing {name}");
    }
    assert_eq!(fs::read_to_string(s.path("a").join(files::METRICS)).unwrap(), report);

    let o = pipeline(&s, "move.pxe", "b", &["--save-latents"]);
    assert!(o.status.success());
    for name in [files::DENOISED, files::MESH, files::METRICS, files::LATENT_ORIG] {
        assert_eq!(fs::read(s.path("a").join(name)).unwrap(), fs::read(s.path("b").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn stage_files_reload_to_the_same_result() {
    let s = Scene::new();
    let o = pipeline(&s, "move.pxe", "run", &["--save-latents"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = s.path("run");
    let cfg = PipelineConfig { resolution: 24, ..PipelineConfig::default() };
    let masks = read_masks(&dir).unwrap();
    assert!(masks.is_disjoint());
    let grid = |name: &str| io::read_pxvg(&dir.join(name)).unwrap();
    let (z, [tp, to, tw]) =
        denoise_stage(&grid(files::GRID_ORIG), &grid(files::WARPED), &grid(files::GRID_PROXY), &masks, &cfg).unwrap();
    assert_eq!(decode(&z).unwrap(), grid(files::DENOISED));
    for (name, traj) in [(files::LATENT_PROXY, &tp), (files::LATENT_ORIG, &to), (files::LATENT_WARP, &tw)] {
        let stored = io::read_pxlf(&dir.join(name)).unwrap();
        assert_eq!(stored.len(), traj.len());
        assert!(stored.iter().zip(traj).all(|(a, b)| a.bit_eq(b)), "{name}");
    }
}

#[test]
fn pipeline_identity_reproduces_input() {
    let s = Scene::new();
    let o = pipeline(&s, "empty.pxe", "id", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = s.path("id");
    assert_eq!(io::read_pxvg(&dir.join(files::DENOISED)).unwrap(), io::read_pxvg(&dir.join(files::GRID_ORIG)).unwrap());
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("chamfer 0\nl_gd 0\niou 1\n"), "{report}");
}

#[test]
fn pipeline_rejects_bad_schedule() {
    let s = Scene::new();
    let o = pipeline(&s, "empty.pxe", "x", &["--steps", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("10"), "{}", stderr(&o));
    let (mesh, proxy, script) = (s.path("shape.obj"), s.path("proxy.json"), s.path("empty.pxe"));
    let o = run(&["pipeline", p(&mesh), p(&proxy), p(&script), "-o", "/tmp/x", "--resolution", "300"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("256"), "{}", stderr(&o));
}

#[test]
fn pipeline_missing_mesh_names_path() {
    let s = Scene::new();
    let o = run(&["pipeline", "/missing/shape.obj", p(&s.path("proxy.json")), p(&s.path("empty.pxe")), "-o", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/missing/shape.obj"), "{}", stderr(&o));
}

#[test]
fn metrics_subcommands() {
    let s = Scene::new();
    io::write_points(&s.path("a.xyz"), &[Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)]).unwrap();
    io::write_points(&s.path("b.xyz"), &[Vec3::new(0.0, 0.5, 0.0), Vec3::new(1.0, 0.5, 0.0)]).unwrap();
    let o = run(&["metrics", "chamfer", p(&s.path("a.xyz")), p(&s.path("b.xyz"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "chamfer 0.5\n");

    let g = s.path("g.pxvg");
    let o = run(&["voxelize", p(&s.path("proxy.json")), "-o", p(&g), "--resolution", "16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["metrics", "iou", p(&g), p(&g)]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "iou 1\n");

    let m = s.path("g.obj");
    let o = run(&["mesh", p(&g), "-o", p(&m)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mesh = io::load_obj(&m).unwrap();
    assert!(mesh.is_closed() && !mesh.faces.is_empty());
}

#[test]
fn lgd_with_nothing_outside_is_numeric_error() {
    let s = Scene::new();
    // Both points sit inside primitive 1, which the script moves.
    io::write_points(&s.path("a.xyz"), &[Vec3::new(-0.2, -0.2, 0.0), Vec3::new(-0.2, -0.15, 0.0)]).unwrap();
    fs::write(s.path("scale.pxe"), "scale #1 by 2 2 2\n").unwrap();
    let o = run(&["edit", p(&s.path("proxy.json")), p(&s.path("scale.pxe")), "-o", p(&s.path("e.json"))]);
    assert!(o.status.success());
    let a_path = s.path("a.xyz");
    let a = p(&a_path);
    let o = run(&["metrics", "lgd", a, a, "--orig", p(&s.path("proxy.json")), "--edited", p(&s.path("e.json"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("empty complement"), "{}", stderr(&o));
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_proxekit"))
        .args(["metrics", "iou", "/nope.pxvg", "/nope.pxvg"])
        .env("PROXEKIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("PROXEKIT_THREADS"));
}
