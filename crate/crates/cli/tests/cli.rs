use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

const GINIBRE: &str = r#"{"kind":"ginibre","sigma":1,"n":50}"#;
const GUE: &str = r#"{"kind":"gue","sigma":1,"n":50}"#;
const LIMACON: &str = r#"{"kind":"shifted","sigma":1,"shift":[1,0],"n":50}"#;
const SHIFTED_GUE: &str = r#"{"kind":"shifted","sigma":1,"tau":1,"shift":[1,0],"n":50}"#;

fn freeconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeconv"))
        .args(args)
        .env_remove("FREECONV_WORKERS")
        .output()
        .expect("cli runs")
}

/// Data rows of a CSV output, comment and header removed.
fn rows(out: &Output) -> Vec<Vec<String>> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# provenance: {\"schema_version\":1"));
    lines.next().expect("header");
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn column(out: &Output, name: &str) -> usize {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    text.lines().nth(1).unwrap().split(',').position(|h| h == name).unwrap()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

fn polar_grid(r: (f64, f64), nr: usize, nphi: usize) -> String {
    format!(r#"{{"kind":"polar","r_min":{},"r_max":{},"nr":{nr},"phi_min":{},"phi_max":{},"nphi":{nphi}}}"#, r.0, r.1, -PI, PI)
}

#[test]
fn transform_of_shifted_gue() {
    let out = freeconv(&["transform", "--ensemble-a", SHIFTED_GUE, "--axis", r#"{"min":1,"max":1,"count":1}"#]);
    assert!(out.status.success());
    let row = &rows(&out)[0];
    assert!((f(&row[column(&out, "s_re")]) - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-10);
    // boundary value taken at distance 1e-6 from the axis
    assert!((f(&row[column(&out, "density")]) - 1.0 / PI).abs() < 1e-6);
}

#[test]
fn gue_transform_reproduces_the_semicircle() {
    let out = freeconv(&["transform", "--ensemble-a", GUE, "--axis", r#"{"min":-1.9,"max":1.9,"count":20}"#]);
    assert!(out.status.success());
    let (x, d) = (column(&out, "x"), column(&out, "density"));
    for row in rows(&out) {
        let x = f(&row[x]);
        assert!((f(&row[d]) - (4.0 - x * x).sqrt() / (2.0 * PI)).abs() < 1e-5, "{x}");
    }
}

#[test]
fn ginibre_transform_has_no_s() {
    let out = freeconv(&["transform", "--ensemble-a", GINIBRE, "--axis", r#"{"min":0.5,"max":2,"count":4}"#]);
    assert!(out.status.success());
    let r = rows(&out);
    assert!(r.iter().all(|row| row[column(&out, "s_re")] == "undefined"));
    // inside the disc R(G) has the off-diagonal entry i·b
    assert!((f(&r[0][column(&out, "r12_re")]).hypot(f(&r[0][column(&out, "r12_im")])) - 0.75f64.sqrt()).abs() < 1e-10);
}

#[test]
fn solve_product_gives_the_ginibre_correlator() {
    let grid = polar_grid((0.0, 1.5), 6, 4);
    let out = freeconv(&["solve-product", "--ensemble-a", GINIBRE, "--grid", &grid]);
    assert!(out.status.success());
    let (x, y, corr) = (column(&out, "x"), column(&out, "y"), column(&out, "correlator"));
    for row in rows(&out) {
        let r = f(&row[x]).hypot(f(&row[y]));
        let expected = (1.0 - r).max(0.0);
        assert!((f(&row[corr]) - expected).abs() < 1e-9, "r = {r}");
    }
    let gue = freeconv(&["solve-product", "--ensemble-a", GUE, "--grid", &grid]);
    let numeric = |o: &Output| {
        rows(o)
            .into_iter()
            .map(|r| r[..7].iter().map(|s| if s.is_empty() { 0.0 } else { f(s) }).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    for (a, b) in numeric(&out).iter().zip(numeric(&gue)) {
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}

#[test]
fn boundary_of_the_products() {
    let out = freeconv(&["boundary", "--ensemble-a", GINIBRE, "--angular-samples", "16"]);
    assert!(out.status.success());
    for row in rows(&out) {
        assert!((f(&row[1]) - 1.0).abs() < 1e-4);
        assert_eq!(f(&row[2]), 1.0);
    }
    let lim = freeconv(&["boundary", "--ensemble-a", LIMACON, "--angular-samples", "24"]);
    assert!(lim.status.success());
    for row in rows(&lim) {
        let phi = f(&row[0]);
        if phi.abs() <= 2.0 * PI / 3.0 - 0.05 {
            assert!((f(&row[1]) - (1.0 + 2.0 * phi.cos())).abs() < 1e-3);
        } else if phi.abs() > 2.0 * PI / 3.0 {
            assert_eq!(row[3], "unbounded or empty");
        }
    }
    let few = freeconv(&["boundary", "--ensemble-a", GINIBRE, "--angular-samples", "7"]);
    assert_eq!(few.status.code(), Some(1));
}

#[test]
fn density_point_values() {
    let cell = |x: f64, y: f64| {
        let d = 3e-3 * x.hypot(y);
        format!(r#"{{"kind":"cartesian","x_min":{},"x_max":{},"nx":3,"y_min":{},"y_max":{},"ny":3}}"#, x - d, x + d, y - d, y + d)
    };
    let center = |o: &Output| f(&rows(o)[4][2]);
    let gin = freeconv(&["density", "--ensemble-a", GINIBRE, "--grid", &cell(0.5, 0.0)]);
    assert!((center(&gin) - 1.0 / PI).abs() < 1e-4);
    let lim = freeconv(&["density", "--ensemble-a", LIMACON, "--grid", &cell(1e-5, 0.0)]);
    assert!((center(&lim) - 6.0 / PI).abs() < 1e-3);
    let outside = freeconv(&["density", "--ensemble-a", LIMACON, "--grid", &cell(-1.0, 0.5)]);
    assert_eq!(center(&outside), 0.0);
    let json = freeconv(&["density", "--ensemble-a", GINIBRE, "--grid", &cell(0.5, 0.0), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["result"]["rho"].as_array().unwrap().len(), 9);
}

#[test]
fn validation_errors_are_aggregated() {
    let out = freeconv(&[
        "solve-product",
        "--ensemble-a",
        r#"{"kind":"ginibre","sigma":-1,"n":0}"#,
        "--grid",
        r#"{"kind":"cartesian","x_min":0,"x_max":1,"nx":0,"y_min":0,"y_max":1,"ny":3}"#,
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.matches("\n  - ").count() >= 3, "{err}");
    let no_grid = freeconv(&["density", "--ensemble-a", GINIBRE]);
    assert_eq!(no_grid.status.code(), Some(1));
    let origin = freeconv(&[
        "density",
        "--ensemble-a",
        GINIBRE,
        "--grid",
        r#"{"kind":"cartesian","x_min":-1,"x_max":1,"nx":3,"y_min":-1,"y_max":1,"ny":3}"#,
    ]);
    assert_eq!(origin.status.code(), Some(1));
}

#[test]
fn partial_failures_exit_with_two() {
    // S has a branch point at y = -1/4
    let out = freeconv(&["transform", "--ensemble-a", SHIFTED_GUE, "--axis", r#"{"min":-2,"max":2,"count":9}"#]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stdout.is_empty());
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "job.json",
        &format!(r#"{{"command":"sample","ensembleA":{GINIBRE},"trials":2,"seed":5}}"#),
    );
    let out_path = dir.path().join("cloud.csv");
    let out = freeconv(&["sample", "--config", &config, "--trials", "3", "-o", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 2 + 3 * 50);
    assert!(text.contains("\"seed\":5"));
    let wrong = freeconv(&["density", "--config", &config]);
    assert_eq!(wrong.status.code(), Some(1));
    let unknown = write(dir.path(), "bad.json", r#"{"seeed":1}"#);
    assert_eq!(freeconv(&["sample", "--config", &unknown]).status.code(), Some(1));
}

#[test]
fn quick_compare_meets_the_budget() {
    let ginibre = r#"{"kind":"ginibre","sigma":1,"n":100}"#;
    let out = freeconv(&["compare", "--ensemble-a", ginibre, "--seed", "11"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["job"]["trials"], 100);
    assert!(v["result"]["comparison"]["l1_distance"].as_f64().unwrap() <= 0.08);
    assert_eq!(v["result"]["eigenvalues"], 10_000);
}

#[test]
fn worker_count_does_not_change_output() {
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_freeconv"))
            .args(["sample", "--ensemble-a", GINIBRE, "--trials", "5", "--format", "json"])
            .env("FREECONV_WORKERS", workers)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}
