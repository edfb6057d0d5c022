use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use planar_kinetic::cli::{EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_OK};
use planar_kinetic::NormSpec;
use serde_json::Value;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planar-kinetic"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const LP4: &str = r#"{"kind":"lp","p":4}"#;

#[test]
fn norm_inspect_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["norm", "inspect", "--norm", LP4], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = json(&out);
    assert_eq!(r["smoothness"], "C1");
    let p = r["perimeter"].as_f64().unwrap();
    let q = r["perimeter_quadrature"].as_f64().unwrap();
    assert!((p - q).abs() <= 1e-4, "{p} {q}");
    assert_eq!(r["config"]["command"], "norm-inspect");

    let square = r#"{"kind":"polygon","vertices":[[1,0],[0,1],[-1,0],[0,-1]]}"#;
    let out = bin(&["norm", "inspect", "--norm", square], dir.path());
    assert_eq!(json(&out)["smoothness"], "corner");

    let out = bin(&["norm", "inspect", "--norm", r#"{"kind":"lp","p":0.5}"#], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_INPUT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p must be ≥ 1"));
}

#[test]
fn norm_from_file_with_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("norm.json");
    fs::write(&path, "{\n  \"kind\": \"lp\",\n  \"p\": 4,\n  \"q\": 1\n}\n").unwrap();
    let out = bin(&["norm", "inspect", "--norm", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_INPUT_ERROR));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("column"), "{err}");
}

#[test]
fn fit_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["fit-power-type", "--norm", LP4], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let p = json(&out)["fit"]["p_hat"].as_f64().unwrap();
    assert!((p - 4.0).abs() <= 0.15, "{p}");

    let out = bin(&["fit-power-type", "--norm", r#"{"kind":"euclidean"}"#], dir.path());
    let p = json(&out)["fit"]["p_hat"].as_f64().unwrap();
    assert!((p - 2.0).abs() <= 0.15, "{p}");

    let rounded = NormSpec::rounded_square().to_json();
    let out = bin(&["fit-power-type", "--norm", &rounded], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = json(&out);
    assert!(r["fit"].is_null());
    assert!(r["fit_error"].as_str().unwrap().contains("degenerate modulus"));
}

#[test]
fn modulus_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        &["modulus", "--norm", r#"{"kind":"lp","p":3}"#, "--out", "m", "--emit-plot-data"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let m = dir.path().join("m");
    for f in ["modulus.json", "omega.csv", "rho.csv", "omega_fit.csv"] {
        assert!(m.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(m.join("omega.csv")).unwrap();
    assert!(csv.starts_with("delta,value\n"));
    let r: Value = serde_json::from_str(&fs::read_to_string(m.join("modulus.json")).unwrap()).unwrap();
    assert_eq!(r["sandwich"]["passed"], true);
    assert_eq!(r["nordlander"]["passed"], true);
}

#[test]
fn averaging_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["averaging", "verify", "--norm", LP4, "--samples", "8000"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = json(&out);
    assert_eq!(r["config"]["n_samples"], 8000);
    assert_eq!(r["averaging"]["reconstruction"]["points"].as_array().unwrap().len(), 64);
}

#[test]
fn vortex_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        &["vortex", "gen", "--norm", LP4, "--n", "256", "--center", "0.3,-0.2", "--out", "v"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let field = dir.path().join("v/field.csv");
    assert!(field.exists() && dir.path().join("v/field.json").exists());

    let out = bin(&["kinetic", "check", "--field", "v/field.csv"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = json(&out);
    assert!(r["kinetic"]["max_residual"].as_f64().unwrap() <= r["kinetic"]["threshold"].as_f64().unwrap());
    assert_eq!(r["kinetic"]["residuals"].as_array().unwrap().len(), 64);

    let out = bin(&["field", "analyze", "--field", "v/field.csv"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let s = &r["classification"]["singularity"];
    assert_eq!(s["classification"], "vortex");
    let c = s["center_estimate"].as_array().unwrap();
    let (cx, cy) = (c[0].as_f64().unwrap(), c[1].as_f64().unwrap());
    assert!(((cx - 0.3).powi(2) + (cy + 0.2).powi(2)).sqrt() <= 2.0 * 2.0 / 256.0);
    assert_eq!(r["classification"]["verdict"], "consistent");
}

#[test]
fn corrupted_field_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let gen = bin(&["vortex", "gen", "--norm", LP4, "--n", "32", "--out", "v"], dir.path());
    assert_eq!(gen.status.code(), Some(EXIT_OK));
    let path = dir.path().join("v/field.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cols: Vec<&str> = lines[6].split(',').collect();
    lines[6] = format!("{},{},0.5,0.1", cols[0], cols[1]);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = bin(&["kinetic", "check", "--field", "v/field.csv"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_INPUT_ERROR));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn failing_check_exits_1() {
    // a jump across x = 0 violates both constraints
    use planar_kinetic::grid::FieldGrid;
    use planar_kinetic::{PlanarNorm, Vec2};
    let dir = tempfile::tempdir().unwrap();
    let e = PlanarNorm::euclidean();
    let g = FieldGrid::from_fn(&e, Vec2::new(-1.0, -1.0), 2.0 / 64.0, 64, 64, |x| {
        Some(if x.x < 0.0 { Vec2::new(0.0, 1.0) } else { Vec2::new(1.0, 0.0) })
    })
    .unwrap();
    g.write(&dir.path().join("jump.csv")).unwrap();
    let out = bin(&["kinetic", "check", "--field", "jump.csv"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_CHECK_FAILED));
    assert_eq!(json(&out)["passed"], false);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    bin(&["vortex", "gen", "--norm", LP4, "--n", "128", "--out", "v"], dir.path());
    let args = ["field", "analyze", "--field", "v/field.csv", "--seed", "7"];
    let a = bin(&args, dir.path());
    let b = bin(&args, dir.path());
    assert_eq!(a.status.code(), Some(EXIT_OK));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["config"]["seed"], 7);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"norm": {"kind": "lp", "p": 3}, "n_samples": 2048}"#).unwrap();
    let out = bin(&["norm", "inspect", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = json(&out);
    assert_eq!(r["n_samples"], 2048);
    // the embedded config reproduces the run
    fs::write(&cfg, serde_json::to_string(&r["config"]).unwrap()).unwrap();
    let again = bin(&["norm", "inspect", "--config", "run.json"], dir.path());
    assert_eq!(out.stdout, again.stdout);

    fs::write(&cfg, r#"{"norm": {"kind": "euclidean"}, "samples": 10}"#).unwrap();
    let out = bin(&["norm", "inspect", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_INPUT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("samples"));

    fs::write(&cfg, r#"{"command": "modulus"}"#).unwrap();
    let out = bin(&["norm", "inspect", "--config", "run.json", "--norm", LP4], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_INPUT_ERROR));
}

#[test]
fn vortex_gen_requires_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["vortex", "gen", "--norm", LP4], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_INPUT_ERROR));
    let out = bin(&["vortex", "gen", "--norm", LP4, "--sign", "2", "--out", "v"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_INPUT_ERROR));
}
