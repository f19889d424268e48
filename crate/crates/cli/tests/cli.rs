use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn dmfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmfc"))
        .args(args)
        .env_remove("DMFC_DATA_DIR")
        .output()
        .unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(out: &Output, code: i32) -> Value {
    assert_eq!(out.status.code(), Some(code), "stdout {}", String::from_utf8_lossy(&out.stdout));
    serde_json::from_slice(&out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Coarse training data, a model built from it and coarse held-out volumes,
/// shared by the tests.
struct Fixture {
    _dir: tempfile::TempDir,
    data: PathBuf,
    held_out: PathBuf,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let held_out = dir.path().join("held");
        let model = dir.path().join("edr.dmfc");
        let g = ok_json(&dmfc(&["gen-data", "--out", s(&data), "--level", "0", "--no-volumes"]));
        assert_eq!(g["joints"], 60);
        ok_json(&dmfc(&[
            "gen-data", "--out", s(&held_out), "--preset", "held-out", "--level", "0", "--spacing", "1.5",
        ]));
        let b = ok_json(&dmfc(&["build", "--data", s(&data), "--out", s(&model)]));
        assert_eq!(b["model"]["coding"], "edr");
        Fixture {
            _dir: dir,
            data,
            held_out,
            model,
        }
    })
}

fn read_instance(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("instance.json")).unwrap()).unwrap()
}

#[test]
fn build_is_deterministic() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("again.dmfc");
    ok_json(&dmfc(&["build", "--data", s(&f.data), "--out", s(&again)]));
    assert_eq!(std::fs::read(&f.model).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn sample_at_zero_is_the_mean() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = ok_json(&dmfc(&["sample", "--model", s(&f.model), "--theta", "0", "--out", s(&a)]));
    assert_eq!(out["objects"], 3);
    ok_json(&dmfc(&["sample", "--model", s(&f.model), "--theta", "0,0,0", "--out", s(&b)]));
    for name in ["object1.ply", "object2_surface.ply", "object3.ply"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    let inst = read_instance(&a);
    assert!(inst["theta"].as_array().unwrap().iter().all(|t| t.as_f64() == Some(0.0)));
}

#[test]
fn seeded_samples_repeat() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok_json(&dmfc(&["sample", "--model", s(&f.model), "--seed", "3", "--out", s(&a)]));
    ok_json(&dmfc(&["sample", "--model", s(&f.model), "--seed", "3", "--out", s(&b)]));
    assert_eq!(read_instance(&a), read_instance(&b));
}

#[test]
fn marginalize_and_posterior() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.dmfc");
    let out = ok_json(&dmfc(&[
        "marginalize", "--model", s(&f.model), "--objects", "2", "--classes", "pose", "--out", s(&m),
    ]));
    let dim = out["model"]["dim"].as_u64().unwrap();
    assert!(dim > 0 && dim.is_multiple_of(3), "pose-only dim {dim}");

    let obs = dir.path().join("obs.json");
    std::fs::write(&obs, r#"[{"point": 0, "shape": [0.1, 0.0, 0.0], "intensity": 0.5}]"#).unwrap();
    let p = dir.path().join("p.dmfc");
    let out = ok_json(&dmfc(&["posterior", "--model", s(&f.model), "--observations", s(&obs), "--out", s(&p)]));
    assert_eq!(out["observations"], 1);

    let e = err_json(&dmfc(&["marginalize", "--model", s(&f.model), "--objects", "4", "--out", s(&m)]), 2);
    assert_eq!(e["error"], "usage");
}

#[test]
fn permute_grows_the_training_set() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = ok_json(&dmfc(&[
        "permute",
        "--data",
        s(&f.data),
        "--threshold",
        "0.1",
        "--rank",
        "auto",
        "--out",
        s(&dir.path().join("p.dmfc")),
    ]));
    assert_eq!(out["training_functions"], 60);
    assert!(out["permuted_functions"].as_u64().unwrap() >= 60);
}

#[test]
fn fit_and_correlations() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let fit_dir = dir.path().join("fit");
    let vol = f.held_out.join("joint_000/volume.json");
    let out = ok_json(&dmfc(&[
        "fit", "--model", s(&f.model), "--volume", s(&vol), "--iterations", "200", "--chains", "2", "--out",
        s(&fit_dir),
    ]));
    assert!(out["best_log_posterior"].as_f64().unwrap().is_finite());
    let record: Value = serde_json::from_str(&std::fs::read_to_string(fit_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(record["chains"].as_array().unwrap().len(), 2);
    assert!(fit_dir.join("object2_surface.ply").exists());

    let cdir = dir.path().join("corr");
    let out = ok_json(&dmfc(&[
        "eval-correlations", "--model", s(&f.model), "--samples", "20", "--data", s(&f.data), "--out", s(&cdir),
    ]));
    assert!(out["abs_r"]["r1_r2"].as_f64().is_some());
    assert!(cdir.join("correlations.csv").exists());

    let sg = dir.path().join("specgen");
    let out = ok_json(&dmfc(&[
        "eval-specgen", "--model", s(&f.model), "--held-in", s(&f.held_out), "--held-out", s(&f.held_out),
        "--samples", "5", "--iterations", "50", "--chains", "1", "--out", s(&sg),
    ]));
    assert_eq!(out["command"], "eval-specgen");
    assert!(sg.join("generality.csv").exists());

    let png = dir.path().join("drr.pgm");
    ok_json(&dmfc(&["project-drr", "--volume", s(&vol), "--axis", "x", "--out", s(&png)]));
    assert!(std::fs::read(&png).unwrap().starts_with(b"P5"));
}

#[test]
fn config_file_fills_missing_flags() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("sr.dmfc");
    std::fs::write(
        &cfg,
        serde_json::json!({ "build": { "coding": "sr", "rank": "5", "data": s(&f.data) } }).to_string(),
    )
    .unwrap();
    let b = ok_json(&dmfc(&["--config", s(&cfg), "build", "--rank", "3", "--out", s(&out)]));
    assert_eq!(b["model"]["coding"], "sr");
    assert_eq!(b["model"]["rank"], 3);

    std::fs::write(&cfg, r#"{"bogus": {}}"#).unwrap();
    err_json(&dmfc(&["--config", s(&cfg), "build", "--out", s(&out)]), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dmfc(&["--help"]).status.success());
    assert!(dmfc(&["fit", "--help"]).status.success());
    assert_eq!(err_json(&dmfc(&["frobnicate"]), 2)["error"], "usage");
    let clash = ["sample", "--model", "m", "--theta", "0", "--seed", "1", "--out", "o"];
    assert_eq!(err_json(&dmfc(&clash), 2)["error"], "usage");

    let missing = dir.path().join("nope.dmfc");
    let e = err_json(&dmfc(&["sample", "--model", s(&missing), "--theta", "0", "--out", s(dir.path())]), 3);
    assert_eq!(e["error"], "data");

    let junk = dir.path().join("junk.dmfc");
    std::fs::write(&junk, b"not a model").unwrap();
    err_json(&dmfc(&["sample", "--model", s(&junk), "--theta", "0", "--out", s(dir.path())]), 3);
}
