use std::fs;
use std::path::Path;

use udeoed::cli::main_with_args;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("udeoed").chain(args.iter().copied()))
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in walk(dir) {
        out.push((e.strip_prefix(dir).unwrap().display().to_string(), fs::read(&e).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() { v.extend(walk(&p)) } else { v.push(p) }
    }
    v
}

#[test]
fn empty_run_writes_only_the_header() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["--out", out.to_str().unwrap()]), 0);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("scenario,model,criterion,phi,phi_eval,delta_02,delta_04,p1,p1_std,p3,p3_std,error"));
}

#[test]
fn bad_invocations_are_configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["--out", o, "--bogus"]), 2);
    assert_eq!(run(&["--out", o, "--scenario", "w?-u0-c"]), 2);
    assert_eq!(run(&["--out", o, "--criterion", "Z"]), 2);
    assert_eq!(run(&["--out", o, "--model", "pendulum"]), 2);
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "scenarios = [\"w0-u0-c\"]\n[settings]\nsigmaa = 0.1\n").unwrap();
    assert_eq!(run(&["--out", o, "--config", cfg.to_str().unwrap()]), 2);
    assert_eq!(run(&["--out", o, "--config", tmp.path().join("missing.toml").to_str().unwrap()]), 2);
    assert!(!out.join("summary.csv").exists());
}

#[test]
fn repeated_runs_emit_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "scenarios = [\"w*-u0-c\", \"w0-u0-l\", \"w*-u0-c\"]\n[settings]\nseed = 3\nsigma = 0.1\n").unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--jobs", "2"]), 0);
    }
    let (la, lb) = (listing(&a), listing(&b));
    assert_eq!(la, lb);
    for f in ["design.csv", "infogain.csv", "spectrum.csv", "dataset.csv", "report.json", "multipliers.json", "ensemble.csv"] {
        assert!(a.join("w*-u0-c").join(f).exists(), "{f}");
    }

    let mut rdr = csv::Reader::from_path(a.join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], rows[2]);
    // the zero-control scenario with the l strategy has no parameters to study: it fails alone
    assert!(!rows[1][11].is_empty());
    assert!(rows[0][11].is_empty());

    // numbers round-trip through text exactly
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("w*-u0-c/report.json")).unwrap()).unwrap();
    let phi: f64 = rows[0][3].parse().unwrap();
    assert_eq!(phi, report["phi_star"].as_f64().unwrap());
    let p1: f64 = rows[0][7].parse().unwrap();
    assert_eq!(p1, report["estimates"][0]["estimate"].as_f64().unwrap());

    let mut d = csv::Reader::from_path(a.join("w*-u0-c/design.csv")).unwrap();
    let header = d.headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["t_start", "t_end", "w_x1", "w_x2", "u_u"]);
    let design: Vec<Vec<f64>> = d.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(design.len(), 48);
    let used: f64 = design.iter().map(|r| r[2] * (r[1] - r[0])).sum();
    assert!(used <= 4.0 + 1e-9, "budget {used}");
    for r in &design {
        let text = format!("{:?}", r[2]);
        assert_eq!(text.parse::<f64>().unwrap(), r[2]);
    }
}
