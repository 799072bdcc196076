//! End-to-end runs of the `qtower` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qtower(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtower"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: stdout {:?}, stderr {:?}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn all_numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(a) => a.iter().for_each(|x| all_numbers(x, out)),
        _ => {}
    }
}

fn first_report(doc: &Value) -> &Value {
    &doc["runs"][0]["reports"][0]
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const USER_TORUS: &str = r#"
metric = "user"
grid = 6
report = ["gauss-bonnet", "divergence"]

[user]
coords = ["x", "y", "z", "w"]
domain = [[0, 6.283185307179586], [0, 6.283185307179586], [0, 6.283185307179586], [0, 6.283185307179586]]
periodic = true
g = [
  ["exp(0.2*sin(x)*cos(y))", "0", "0", "0"],
  ["exp(0.2*sin(x)*cos(y))", "0", "0"],
  ["exp(0.2*sin(x)*cos(y))", "0"],
  ["exp(0.2*sin(x)*cos(y))"],
]
chi = 0
"#;

#[test]
fn eval_round_s4_prints_q_six() {
    // Q = n(n²−4)/8 on the unit n-sphere
    let o = qtower(&[
        "eval",
        "--metric",
        "sphere",
        "--param",
        "n=4",
        "--param",
        "r=1",
        "--point",
        "0.3,-0.2,0.5,0.1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let d = json(&o);
    assert!((num(&d["bundle"]["q"]) - 6.0).abs() <= 1e-12);
    let s = &d["report"]["scalars"];
    for k in ["trace_j_minus_q", "q_routes", "bach_routes"] {
        assert!(num(&s[k]) <= 1e-9, "{k}: {}", s[k]);
    }
    assert_eq!(d["point"], serde_json::json!([0.3, -0.2, 0.5, 0.1]));
}

#[test]
fn eval_flat_space_is_all_zero() {
    let o = qtower(&["eval", "--metric", "flat", "--param", "n=5"]);
    assert_eq!(code(&o), 0);
    let b = &json(&o)["bundle"];
    for k in [
        "christoffel",
        "riemann",
        "ricci",
        "weyl",
        "cotton",
        "bach",
        "j_tensor",
        "t_tensor",
        "j_schouten",
    ] {
        let mut v = Vec::new();
        all_numbers(&b[k], &mut v);
        assert!(!v.is_empty() && v.iter().all(|x| *x == 0.0), "{k}");
    }
    assert_eq!(num(&b["q"]), 0.0);
    assert_eq!(num(&b["scalar"]), 0.0);
}

#[test]
fn eval_product_spheres_trace_j_is_q() {
    let o = qtower(&[
        "eval",
        "--metric",
        "product-spheres",
        "--param",
        "a=1",
        "--param",
        "b=2",
    ]);
    assert_eq!(code(&o), 0);
    let d = json(&o);
    assert!(num(&d["report"]["scalars"]["trace_j_minus_q"]) <= 1e-9);
    // not Einstein, so J is not a multiple of g
    assert!(num(&d["bundle"]["j_traceless_norm_sq"]) > 1e-6);
}

#[test]
fn strict_turns_a_failed_cross_check_into_exit_one() {
    let args = [
        "eval",
        "--metric",
        "product-spheres",
        "--param",
        "a=1",
        "--param",
        "b=2",
        "--tol",
        "bach_routes=1e-300",
    ];
    let lax = qtower(&args);
    assert_eq!(code(&lax), 0);
    assert_eq!(json(&lax)["report"]["pass"], false);
    let strict = qtower(&[&args[..], &["--strict"]].concat());
    assert_eq!(code(&strict), 1);
}

#[test]
fn verify_s6_passes_every_identity() {
    let o = qtower(&["verify", "--metric", "sphere", "--param", "n=6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let d = json(&o);
    let reports = d["reports"].as_array().unwrap();
    assert!(reports.len() >= 8);
    assert!(reports.iter().all(|r| r["pass"] == true));
    assert_eq!(d["pass"], true);
}

#[test]
fn verify_four_torus_skips_j_schouten_with_a_notice() {
    let o = qtower(&["verify", "--metric", "torus", "--param", "n=4", "--param", "eps=0.1"]);
    assert_eq!(code(&o), 0);
    let d = json(&o);
    let find = |name: &str| {
        d["reports"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["name"] == name)
            .unwrap()
            .clone()
    };
    assert_eq!(find("j-equals-adjoint")["pass"], true);
    let notes = find("j-schouten-trace")["notes"].to_string();
    assert!(notes.contains("n = 4"), "{notes}");
}

#[test]
fn verify_with_fd_backend_uses_relaxed_tolerances() {
    let an = json(&qtower(&["verify", "--metric", "sphere", "--param", "n=6"]));
    let o = qtower(&["verify", "--metric", "sphere", "--param", "n=6", "--backend", "fd"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let fd = json(&o);
    let tol = |d: &Value| num(&d["reports"][0]["tolerances"]["trace_j_minus_q"]);
    assert!(tol(&fd) > tol(&an));
    assert_eq!(fd["reports"][0]["inputs"]["backend"], "fd");
}

#[test]
fn verify_exits_one_when_an_identity_fails() {
    let o = qtower(&[
        "verify",
        "--metric",
        "torus",
        "--param",
        "n=3",
        "--param",
        "eps=0.3",
        "--tol",
        "trace_j_minus_q=1e-300",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["pass"], false);
}

#[test]
fn report_gauss_bonnet_on_s4() {
    let o = qtower(&[
        "report",
        "gauss-bonnet",
        "--metric",
        "sphere",
        "--param",
        "n=4",
        "--chi",
        "2",
    ]);
    assert_eq!(code(&o), 0);
    let r = first_report(&json(&o)).clone();
    assert_eq!(r["status"], "pass");
    assert!(num(&r["scalars"]["residual"]) <= 1e-5);
    assert!((num(&r["scalars"]["target"]) - 16.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
}

#[test]
fn report_gauss_bonnet_without_chi_is_a_usage_error() {
    let o = qtower(&["report", "gauss-bonnet", "--metric", "sphere", "--param", "n=4"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Euler characteristic"));
}

#[test]
fn report_almost_schur_on_s6_bump() {
    let o = qtower(&[
        "report",
        "--report",
        "almost-schur",
        "--metric",
        "sphere",
        "--param",
        "n=6",
        "--param",
        "eps=0.05",
    ]);
    assert_eq!(code(&o), 0);
    let r = first_report(&json(&o)).clone();
    let ratio = num(&r["scalars"]["ratio"]);
    assert!(ratio > 0.0 && ratio < 1.0, "{ratio}");
}

#[test]
fn report_q_yamabe_in_dimension_four_is_a_clean_error() {
    let o = qtower(&["report", "q-yamabe", "--metric", "sphere", "--param", "n=4"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("n−4") && e.contains("n = 4"), "{e}");
    assert!(o.stdout.is_empty());
}

#[test]
fn config_and_flags_give_identical_documents_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "metric = \"sphere\"\nreport = [\"almost-schur\"]\n[param]\nn = 5\neps = [0.0, 0.02]\n",
    );
    let strip = |o: &Output| -> String {
        String::from_utf8(o.stdout.clone())
            .unwrap()
            .lines()
            .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let (a, b) = (qtower(&["report", "-c", &cfg]), qtower(&["report", "-c", &cfg]));
    assert_eq!(code(&a), 0);
    assert_eq!(strip(&a), strip(&b));
    assert!(String::from_utf8_lossy(&a.stdout).contains("\"generated_at\""));
    // flags override the file
    let o = json(&qtower(&["report", "-c", &cfg, "--param", "eps=0.01"]));
    assert_eq!(o["runs"].as_array().unwrap().len(), 1);
    assert_eq!(num(&o["runs"][0]["eps"]), 0.01);
}

#[test]
fn csv_emits_one_row_per_eps() {
    let o = qtower(&[
        "report",
        "almost-schur",
        "--metric",
        "sphere",
        "--param",
        "n=3",
        "--param",
        "eps=0,0.01,0.05",
        "--csv",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let again = String::from_utf8(
        qtower(&[
            "report",
            "almost-schur",
            "--metric",
            "sphere",
            "--param",
            "n=3",
            "--param",
            "eps=0,0.01,0.05",
            "--csv",
        ])
        .stdout,
    )
    .unwrap();
    assert_eq!(text, again);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(&header[..4], ["eps", "report", "status", "pass"]);
    let col = header.iter().position(|h| *h == "ratio").unwrap();
    for (line, eps) in lines[1..].iter().zip(["0.0", "0.01", "0.05"]) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], eps);
        assert!(f[col].parse::<f64>().unwrap() <= 1.0);
    }
}

#[test]
fn out_writes_the_document_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = qtower(&[
        "report",
        "schur",
        "--metric",
        "sphere",
        "--param",
        "n=3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let d: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(first_report(&d)["name"], "schur");
}

#[test]
fn unknown_keys_and_parameters_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        "metric = \"sphere\"\ncolour = \"blue\"\n[param]\nn = 4\n",
    );
    let o = qtower(&["eval", "-c", &bad]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("colour"));
    let o = qtower(&["eval", "--metric", "sphere", "--param", "n=4", "--param", "radius=2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("radius"));
    assert_eq!(
        code(&qtower(&[
            "eval",
            "--metric",
            "sphere",
            "--param",
            "n=4",
            "--frobnicate"
        ])),
        2
    );
    assert_eq!(
        code(&qtower(&["eval", "--metric", "klein-bottle", "--param", "n=4"])),
        2
    );
    assert_eq!(
        code(&qtower(&["report", "volume", "--metric", "sphere", "--param", "n=4"])),
        2
    );
}

#[test]
fn points_outside_the_chart_are_rejected() {
    let o = qtower(&[
        "eval",
        "--metric",
        "hyperbolic",
        "--param",
        "n=3",
        "--param",
        "cap=0.5",
        "--point",
        "0.9,0,0",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("outside"));
    assert_eq!(
        code(&qtower(&[
            "eval", "--metric", "sphere", "--param", "n=4", "--point", "0,0"
        ])),
        2
    );
}

#[test]
fn user_metric_from_config_runs_on_the_fd_backend() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "user.toml", USER_TORUS);
    let o = qtower(&["report", "-c", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let d = json(&o);
    let reports = d["runs"][0]["reports"].as_array().unwrap();
    assert_eq!(reports[0]["name"], "gauss-bonnet");
    assert!(num(&reports[0]["scalars"]["residual"]) <= 1e-5);
    assert_eq!(reports[1]["inputs"]["backend"], "fd");
    assert_eq!(code(&qtower(&["eval", "-c", &cfg, "--backend", "analytic"])), 2);
}

#[test]
fn user_metric_matches_the_builtin_round_sphere() {
    // the stereographic round metric typed in by hand
    let dir = tempfile::tempdir().unwrap();
    let s = "4/(1+x^2+y^2+z^2)^2";
    let cfg = write(
        dir.path(),
        "s3.toml",
        &format!(
            "metric = \"user\"\n[user]\ncoords = [\"x\", \"y\", \"z\"]\ndomain = [[-1, 1], [-1, 1], [-1, 1]]\n\
             g = [[\"{s}\", \"0\", \"0\"], [\"{s}\", \"0\"], [\"{s}\"]]\n"
        ),
    );
    let user = json(&qtower(&["eval", "-c", &cfg, "--point", "0.2,-0.1,0.3"]));
    let builtin = json(&qtower(&[
        "eval",
        "--metric",
        "sphere",
        "--param",
        "n=3",
        "--point",
        "0.2,-0.1,0.3",
    ]));
    let (qu, qb) = (num(&user["bundle"]["q"]), num(&builtin["bundle"]["q"]));
    assert!((qu - qb).abs() <= 1e-5 * qb.abs(), "{qu} vs {qb}");
    assert!((num(&user["bundle"]["scalar"]) - 6.0).abs() <= 1e-5);
}
