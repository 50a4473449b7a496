use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsstitch_cli::CorrespondenceFile;
use rsstitch_core::{Correspondence, Pixel};
use rsstitch_render::Raster;
use rsstitch_synth::{gen_correspondences, Generator, SceneConfig, SyntheticScene, Texture};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsstitch"))
        .args(args)
        .env("RSSTITCH_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn textured(w: usize, h: usize) -> Raster {
    let t = Texture::procedural(5);
    Raster::from_fn(w, h, |x, y| t.value(x as f64 * 0.003, y as f64 * 0.003).round() as u8).unwrap()
}

fn identity_file(w: usize, h: usize, n: usize) -> String {
    let corrs = (0..n)
        .map(|i| {
            let p = Pixel::new((7 + 37 * i) as f64 % w as f64, (3 + 23 * i) as f64 % h as f64);
            Correspondence::from_points(p, p)
        })
        .collect();
    CorrespondenceFile {
        width: w,
        height: h,
        gamma: None,
        pair: None,
        corrs,
    }
    .to_text()
}

#[test]
fn solve_identity_with_discrete_solver() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "id.txt", "width 100\nheight 80\n10 10 10 10\n90 12 90 12\n85 70 85 70\n12 66 12 66\n");
    let v = stdout_json(&run(&["solve", s(&f), "--solver", "gs-disc"]));
    let h: Vec<f64> = v["model"]["h"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let scale = h[8];
    for (i, x) in h.iter().enumerate() {
        let want = if i % 4 == 0 { scale } else { 0.0 };
        assert!((x - want).abs() < 1e-9 * scale.abs(), "{h:?}");
    }
    assert!(v["model"].get("k").is_none());
    assert_eq!(v["inliers"], 4);
}

#[test]
fn solve_recovers_synthetic_acceleration() {
    let dir = tempfile::tempdir().unwrap();
    let scene = SyntheticScene::generate(&SceneConfig { k: 0.7, ..SceneConfig::default() }, 12).unwrap();
    let clean = scene.clean_correspondences(Generator::Differential).unwrap();
    let file = CorrespondenceFile {
        width: 1280,
        height: 720,
        gamma: Some(1.0),
        pair: Some("synthetic".into()),
        corrs: clean,
    };
    let f = write(dir.path(), "rs.txt", &file.to_text());
    let v = stdout_json(&run(&["solve", s(&f), "--trials", "200"]));
    let k = v["model"]["k"].as_f64().unwrap();
    assert!((k - 0.7).abs() <= 1e-6, "k = {k}");
    assert_eq!(v["pair"], "synthetic");
    assert_eq!(v["inliers"], 100);
    // same seed, same bytes
    assert_eq!(run(&["solve", s(&f), "--trials", "200"]).stdout, run(&["solve", s(&f), "--trials", "200"]).stdout);
}

#[test]
fn malformed_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.txt", "width 100\nheight 80\n1 2 3 4\n1 2 3 oops\n");
    let out = run(&["solve", s(&f)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn identity_stitch_has_no_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let img = textured(120, 90);
    let p1 = dir.path().join("a.png");
    img.save_png(&p1).unwrap();
    let f = write(dir.path(), "id.txt", &identity_file(120, 90, 30));
    let out = dir.path().join("canvas.png");
    for mode in ["gs", "rs"] {
        let v = stdout_json(&run(&["stitch", s(&p1), s(&p1), s(&f), "--mode", mode, "-o", s(&out)]));
        assert_eq!(v["canvas"], serde_json::json!([120, 90]));
        let canvas = Raster::load_png(&out).unwrap();
        assert_eq!(canvas.to_gray().data(), img.data(), "mode {mode}");
        let diff = Raster::load_png(dir.path().join("canvas.diff.png")).unwrap();
        for y in 0..90 {
            for x in 0..120 {
                assert_eq!(diff.pixel(x, y), &[0, 255, 0], "mode {mode} at ({x}, {y})");
            }
        }
        assert!(dir.path().join("canvas.json").exists());
    }
}

#[test]
fn missing_image_fails_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "id.txt", &identity_file(50, 40, 10));
    let out = dir.path().join("o.png");
    let r = run(&["stitch", "/nonexistent/a.png", "/nonexistent/b.png", s(&f), "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("reading image"));
    assert!(!out.exists());
}

#[test]
fn zero_motion_rectification_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let img = textured(96, 64);
    let p = dir.path().join("a.png");
    img.save_png(&p).unwrap();
    let f = write(dir.path(), "id.txt", &identity_file(96, 64, 25));
    let out = dir.path().join("r.png");
    stdout_json(&run(&["rectify", s(&p), s(&f), "-o", s(&out)]));
    assert_eq!(Raster::load_png(&out).unwrap().data(), img.data());
    let mask = Raster::load_png(dir.path().join("r.mask.png")).unwrap();
    assert!(mask.data().iter().all(|&m| m == 255));
}

#[test]
fn global_shutter_rectification_warns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.png");
    textured(64, 48).save_png(&p).unwrap();
    let f = write(dir.path(), "id.txt", &identity_file(64, 48, 20));
    let out = dir.path().join("r.png");
    let r = run(&["rectify", s(&p), s(&f), "--gamma", "0", "-o", s(&out)]);
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("gamma is 0"));
}

#[test]
fn bench_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.toml", "param = \"gamma\"\nvalues = [1.0]\nsolvers = []\n");
    let r = run(&["bench", s(&empty)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("solver list is empty"));

    let spec = write(
        dir.path(),
        "s.toml",
        "param = \"gamma\"\nvalues = [0.0, 1.0]\nconfigs = 3\nsigma_g = [0.0, 1.0]\nsolvers = [\"gs-disc\", \"rs-constacc\"]\n[ransac]\ntrials = 50\n\
         [[checks]]\nkind = \"at_most\"\nsolver = \"gs-disc\"\nsigma_g = 0.0\nvalue = 0.0\nmax_err = 1e-6\n",
    );
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run(&["bench", s(&spec), "-o", s(&a)]).status.success());
    assert!(run(&["bench", s(&spec), "-o", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let failing = write(
        dir.path(),
        "f.toml",
        "param = \"gamma\"\nvalues = [1.0]\nconfigs = 2\nsolvers = [\"gs-disc\"]\n\
         [[checks]]\nkind = \"at_most\"\nsolver = \"gs-disc\"\nsigma_g = 0.0\nvalue = 1.0\nmax_err = 1e-9\n",
    );
    let r = run(&["bench", s(&failing)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("FAIL"));
}

#[test]
fn bundled_specs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs");
    for name in ["fig3a.toml", "fig3_omega.toml", "fig3_speed.toml", "fig4.toml"] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        rsstitch_synth::SweepSpec::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn eval_writes_a_cdf() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for seed in 0..3u64 {
        let scene = SyntheticScene::generate(&SceneConfig { n_points: 60, ..SceneConfig::default() }, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = gen_correspondences(&scene, 0.5, Generator::Differential, &mut rng).unwrap();
        let file = CorrespondenceFile {
            width: 1280,
            height: 720,
            gamma: Some(1.0),
            pair: None,
            corrs: set.observed,
        };
        files.push(write(dir.path(), &format!("p{seed}.txt"), &file.to_text()));
    }
    let mut args = vec!["eval", "--trials", "100", "--holdout", "20"];
    args.extend(files.iter().map(|p| s(p)));
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "median_px,cdf");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].ends_with(",1"));
    let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert!(first > 0.0 && first < 2.0, "{first}");
}
