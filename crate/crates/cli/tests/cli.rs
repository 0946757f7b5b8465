use serde_json::Value;
use std::process::{Command, Output};

fn cfprod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfprod")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = cfprod(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn stdout(args: &[&str]) -> String {
    let out = cfprod(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn expand_rational() {
    let v = ok_json(&["expand", "--rational", "113/355"]);
    let qs: Vec<String> = v["quotients"].as_array().unwrap().iter().map(|q| q.to_string()).collect();
    assert_eq!(qs, ["3", "7", "16"]);
}

#[test]
fn exit_codes() {
    // precondition-type failures
    assert_eq!(cfprod(&["expand", "--rational", "3/2"]).status.code(), Some(2));
    assert_eq!(cfprod(&["dim", "--phi", "log("]).status.code(), Some(2));
    assert_eq!(cfprod(&["stats", "--quotients", "1,2", "--n", "5"]).status.code(), Some(2));
    assert_eq!(cfprod(&["--let", "c", "dim", "--phi", "n"]).status.code(), Some(2));
    assert_eq!(cfprod(&["pressure"]).status.code(), Some(2));
    // exhaustion
    let out = cfprod(&["montecarlo", "sll", "--samples", "2", "--n", "100", "--precision-bits", "0", "--seed", "3"]);
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    assert_eq!(cfprod(&["--let", "x=1", "dim", "--phi", "exp(n)"]).status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_three() {
    let out = cfprod(&["pressure", "--theta", "1", "--depth", "8", "--alphabet", "100", "--budget", "1000"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pressure_json_fields() {
    let v = ok_json(&["pressure", "--theta", "1", "--depth", "8", "--alphabet", "100"]);
    for k in ["theta", "lo", "hi", "estimate", "depth_n", "alphabet_m", "grid", "method", "tail_correction", "bracket_width"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert!(v["lo"].as_f64().unwrap() <= 0.0 && v["hi"].as_f64().unwrap() >= 0.0);
    let v = ok_json(&["pressure", "--theta", "1", "--alphabet", "1", "--method", "op", "--no-tail"]);
    assert!((v["estimate"].as_f64().unwrap() + 0.9624).abs() < 1e-3);
}

#[test]
fn dim_with_binding() {
    let v = ok_json(&["--let", "b=2", "dim", "--phi", "exp(x^b*log(x))"]);
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert_eq!(v["theorem"], "T1.2-case3");
}

#[test]
fn numbers_have_twelve_significant_digits() {
    let text = stdout(&["--out", "csv", "formula", "liao-rams", "--s", "exp(2*k)", "--t", "exp(k)", "--N", "1000"]);
    let value = text.lines().nth(1).unwrap().split(',').next().unwrap();
    // trailing zeros are trimmed, so at most 12 digits and exact to 12
    let digits = value.chars().filter(char::is_ascii_digit).collect::<String>();
    assert!(digits.trim_start_matches('0').len() <= 12, "{value}");
    // the ratio m/(2(2m + 3)) is increasing, so the window minimum sits at m = 500
    let full = 500.0 / (2.0 * 1003.0);
    assert_eq!(format!("{:.11e}", value.parse::<f64>().unwrap()), format!("{full:.11e}"));
}

#[test]
fn generate_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("cfprod-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("b.json");
    let p = path.to_str().unwrap();
    stdout(&["generate", "--kind", "b-full", "--phi", "exp(n^0.8)", "--terms", "201", "--out", p]);
    let v = ok_json(&["stats", "--input", p, "--n", "200", "--phi", "exp(n^0.8)"]);
    let r = v["ratio"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&r), "{r}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dirichlet_golden_ratio() {
    let ones = vec!["1"; 30].join(",");
    let v = ok_json(&["dirichlet", "--quotients", &ones, "--psi", "1/(2*t)", "--n", "20"]);
    assert_eq!(v["hits"].as_array().unwrap().len() + v["borderline"].as_array().unwrap().len(), 20);
    let v = ok_json(&["dirichlet", "--quotients", &ones, "--psi", "1/(2*t)", "--n", "20", "--outer"]);
    assert_eq!(v["hits"].as_array().unwrap().len(), 20);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = std::env::temp_dir().join(format!("cfprod-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("c.json");
    std::fs::write(&cfg, r#"{"seed": 9, "out": "csv", "let": {"c": 2}}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let from_cfg = stdout(&["--config", c, "expand", "--random", "--terms", "20"]);
    assert!(from_cfg.starts_with("i,a_i\n"));
    assert_eq!(from_cfg, stdout(&["--seed", "9", "--out", "csv", "expand", "--random", "--terms", "20"]));
    assert_ne!(from_cfg, stdout(&["--config", c, "--seed", "10", "expand", "--random", "--terms", "20"]));
    let v = stdout(&["--config", c, "dim", "--phi", "exp(c*floor(sqrt(n)))"]);
    assert!(v.starts_with("value,theorem"));
    std::fs::write(&cfg, r#"{"sed": 9}"#).unwrap();
    assert_eq!(cfprod(&["--config", c, "expand", "--rational", "1/3"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn output_is_identical_across_worker_counts() {
    let runs: [&[&str]; 3] = [
        &["montecarlo", "sll", "--samples", "12", "--n", "3000", "--seed", "4"],
        &["--out", "csv", "montecarlo", "digit-freq", "--samples", "6", "--n", "2000", "--seed", "4"],
        &["pressure", "--theta", "0.7", "--depth", "6", "--alphabet", "200"],
    ];
    for args in runs {
        let mut one = args.to_vec();
        one.extend(["--workers", "1"]);
        let mut eight = args.to_vec();
        eight.extend(["--workers", "8"]);
        assert_eq!(stdout(&one), stdout(&eight), "{args:?}");
    }
}
