use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nlts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlts"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = nlts(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

/// Two tones plus a deterministic jitter, with a header row.
fn write_series(path: &Path, n: usize) {
    let mut text = String::from("t,value\n");
    let mut state: u64 = 12345;
    for t in 0..n {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let jitter = ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.2;
        let x = (std::f64::consts::TAU * 9.0 * t as f64 / 131.0).cos()
            + 0.5 * (std::f64::consts::TAU * 23.0 * t as f64 / 131.0).sin()
            + jitter;
        text.push_str(&format!("{t},{x}\n"));
    }
    fs::write(path, text).unwrap();
}

fn logistic_csv(path: &Path, n: usize) {
    let mut x = 0.3;
    let mut text = String::new();
    for _ in 0..n {
        x = 4.0 * x * (1.0 - x);
        text.push_str(&format!("{x}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn spectrum_then_duffing_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_series(&d.join("s.csv"), 131);
    ok(&[
        "spectrum", "--input", &p(d, "s.csv"), "--column", "value", "--out", &p(d, "spec.json"),
        "--plot-csv", &p(d, "pg.csv"),
    ]);
    let spec = json(&d.join("spec.json"));
    assert_eq!(spec["n"], 131);
    assert_eq!(spec["durbin"]["reject_white_noise"], true);
    let bins: Vec<u64> = spec["dominant"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["bin"].as_u64().unwrap())
        .collect();
    assert_eq!(bins, vec![9, 23]);
    let plot = fs::read_to_string(d.join("pg.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next().unwrap(), "freq,power,cumulative_s,band_low,band_high");
    assert_eq!(lines.count(), 65);

    ok(&["duffing", "fit", "--spectrum", &p(d, "spec.json"), "--out", &p(d, "params.json")]);
    let params = json(&d.join("params.json"));
    for key in ["delta", "beta", "alpha", "gamma", "omega", "residual_norm"] {
        assert!(params[key].is_number(), "{key} missing");
    }
}

#[test]
fn duffing_simulate_and_lyapunov() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("p.json"),
        r#"{"delta": 0.5, "beta": 1.0, "alpha": 0.0, "gamma": 0.0, "omega": 1.0}"#,
    )
    .unwrap();
    ok(&[
        "duffing", "simulate", "--params", &p(d, "p.json"), "--t-end", "10", "--dt", "0.005",
        "--stride", "100", "--out", &p(d, "traj.csv"),
    ]);
    let traj = fs::read_to_string(d.join("traj.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t,x,y");
    assert_eq!(traj.lines().count(), 22);

    ok(&[
        "duffing", "lyapunov", "--params", &p(d, "p.json"), "--t-total", "1000", "--out",
        &p(d, "ls.json"),
    ]);
    let ls = json(&d.join("ls.json"));
    assert_eq!(ls["class"], "non_chaotic");
    let sum: f64 = ls["spectrum"]["lambdas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((sum + 0.5).abs() < 0.01);

    let bad = nlts(&["duffing", "simulate", "--params", &p(d, "p.json"), "--dt", "0.5"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn lyap_and_corrdim() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    logistic_csv(&d.join("l.csv"), 2000);
    ok(&[
        "lyap", "--input", &p(d, "l.csv"), "--m", "2", "--delay", "1", "--max-i", "20", "--out",
        &p(d, "lyap.json"), "--plot-csv", &p(d, "div.csv"),
    ]);
    let l = json(&d.join("lyap.json"));
    let lambda = l["estimate"]["lambda"].as_f64().unwrap();
    assert!((lambda - std::f64::consts::LN_2).abs() < 0.15, "λ = {lambda}");
    assert!(fs::read_to_string(d.join("div.csv")).unwrap().starts_with("offset,b,n_pairs\n"));

    ok(&[
        "corrdim", "--input", &p(d, "l.csv"), "--m", "1..2", "--surrogates", "10", "--out",
        &p(d, "cd.json"), "--plot-csv", &p(d, "cr.csv"),
    ]);
    let cd = json(&d.join("cd.json"));
    let entries = cd.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[1]["m"], 2);
    assert!(entries[1]["z"].is_number());
    let curves = fs::read_to_string(d.join("cr.csv")).unwrap();
    assert!(curves.lines().skip(1).any(|l| l.starts_with("2,")));
}

#[test]
fn price_stock() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let xs: Vec<f64> = (0..40).map(|i| -10.0 + 0.5 * i as f64).collect();
    let stocks: String = xs.iter().map(|x| format!("{x}\n")).collect();
    let prices: String = xs.iter().map(|x| format!("{}\n", 5.0 * x - 0.01 * x.powi(3))).collect();
    fs::write(d.join("s.csv"), stocks).unwrap();
    fs::write(d.join("p.csv"), prices).unwrap();
    ok(&[
        "price-stock", "--prices", &p(d, "p.csv"), "--stocks", &p(d, "s.csv"), "--out",
        &p(d, "c.json"), "--plot-csv", &p(d, "pvo.csv"),
    ]);
    let c = json(&d.join("c.json"));
    assert!((c["cubic"]["alpha1"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert_eq!(c["cubic"]["sign_ok"], true);
    assert!(c["mean_reversion"]["slope"].is_number());
    assert_eq!(fs::read_to_string(d.join("pvo.csv")).unwrap().lines().count(), 41);
}

#[test]
fn pipeline_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_series(&d.join("s.csv"), 155);
    let run = |out: &str| {
        nlts(&[
            "pipeline", "--input", &p(d, "s.csv"), "--column", "value", "--surrogates", "5",
            "--model-t-total", "500", "--out-dir", &p(d, out),
        ])
    };
    let a = run("a");
    let b = run("b");
    assert!(matches!(a.status.code(), Some(0) | Some(2)));
    assert_eq!(a.status.code(), b.status.code());
    let report = json(&d.join("a/report.json"));
    for key in ["schema_version", "config", "windows", "scale_factor", "summary"] {
        assert!(report.get(key).is_some(), "{key} missing");
    }
    assert_eq!(report["windows"].as_array().unwrap().len(), 25);
    for f in ["report.json", "lambda_comparison.csv", "agreement.csv"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
    let cmp = fs::read_to_string(d.join("a/lambda_comparison.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 26);
}

#[test]
fn fatal_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = nlts(&["spectrum", "--input", &p(d, "nope.csv")]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));

    fs::write(d.join("bad.csv"), "1\n2\nabc\n").unwrap();
    let bad = nlts(&["spectrum", "--input", &p(d, "bad.csv")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains('3'));

    write_series(&d.join("s.csv"), 100);
    let short = nlts(&["pipeline", "--input", &p(d, "s.csv"), "--column", "value", "--out-dir", &p(d, "o")]);
    assert_eq!(short.status.code(), Some(1));
}

#[test]
fn mostly_failing_windows_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // A constant series fails every window.
    fs::write(d.join("c.csv"), "1\n".repeat(140)).unwrap();
    let out = nlts(&[
        "pipeline", "--input", &p(d, "c.csv"), "--surrogates", "0", "--out-dir", &p(d, "o"),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("o/report.json").exists());
}
