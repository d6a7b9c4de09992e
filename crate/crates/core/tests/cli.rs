use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cosmic(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosmic"))
        .args(args)
        .current_dir(cwd)
        .env("COSMIC_LOG", "error")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is a JSON error object");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn synth_dir(samples: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.json"),
        format!(r#"{{"samples": {samples}, "k": 4, "d1": 8, "d2": 6, "views_per_sample": 3}}"#),
    )
    .unwrap();
    ok(&cosmic(&["gen-synth", "--spec", "spec.json", "--out", "data"], dir.path()));
    dir
}

#[test]
fn run_writes_report_with_five_accuracies() {
    let dir = synth_dir(40);
    let stdout = ok(&cosmic(&["run", "--manifest", "data/manifest.json"], dir.path()));
    let report: Value = serde_json::from_str(&stdout).unwrap();
    let acc = report["accuracy"].as_object().unwrap();
    assert_eq!(acc.len(), 5);
    for key in ["zero_shot", "tda", "css", "afv", "fused"] {
        let a = acc[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&a));
    }
    assert_eq!(report["samples"], 40);
    assert!(report.get("records").is_none());

    std::fs::write(dir.path().join("cfg.json"), r#"{"r": 1.0, "l2": 2}"#).unwrap();
    ok(&cosmic(
        &[
            "run", "--manifest", "data/manifest.json", "--config", "cfg.json", "--report",
            "out/r.json", "--verbose",
        ],
        dir.path(),
    ));
    let report: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/r.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 40);
    assert_eq!(report["config"]["l2"], 2);
}

#[test]
fn sweep_prints_grid_csv() {
    let dir = synth_dir(30);
    let stdout = ok(&cosmic(
        &["sweep-betas", "--manifest", "data/manifest.json", "--step", "1.0", "--max", "2"],
        dir.path(),
    ));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "beta1,beta2,beta3,accuracy,best");
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[1..].iter().filter(|l| l.ends_with(",1")).count(), 1);
}

#[test]
fn dump_graph_before_any_sample() {
    let dir = synth_dir(0);
    ok(&cosmic(
        &["run", "--manifest", "data/manifest.json", "--dump-state", "s.json"],
        dir.path(),
    ));
    let stdout = ok(&cosmic(&["dump-graph", "--state", "s.json", "--space", "css"], dir.path()));
    let g: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(g["n"], 8);
    assert!(g["edges"].is_array());
    assert_eq!(g["order"], "second");
    assert!(g["threshold"].is_number());
    assert!(!g["cliques"].as_array().unwrap().is_empty());

    ok(&cosmic(
        &["dump-graph", "--state", "s.json", "--space", "afv", "--out", "g.json"],
        dir.path(),
    ));
    let g: Value = serde_json::from_slice(&std::fs::read(dir.path().join("g.json")).unwrap()).unwrap();
    // no auxiliary class has a cached feature yet
    assert_eq!(g["n"], 0);
}

#[test]
fn eval_tabulates_reports() {
    let dir = synth_dir(20);
    for (name, cfg) in [("a", r#"{}"#), ("b", r#"{"r": 1.0}"#)] {
        std::fs::write(dir.path().join(format!("{name}.cfg")), cfg).unwrap();
        ok(&cosmic(
            &[
                "run", "--manifest", "data/manifest.json", "--config", &format!("{name}.cfg"),
                "--report", &format!("{name}.json"),
            ],
            dir.path(),
        ));
    }
    let stdout = ok(&cosmic(&["eval", "--report", "a.json", "--report", "b.json"], dir.path()));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    for col in ["zero_shot", "tda", "css", "afv", "fused"] {
        assert!(lines[0].contains(col));
    }
    assert!(lines[1].starts_with("a.json"));
    assert!(lines[2].starts_with("b.json"));
}

#[test]
fn failures_are_json_errors() {
    let dir = synth_dir(5);
    assert_eq!(
        error_kind(&cosmic(&["run", "--manifest", "missing.json"], dir.path())),
        "IoError"
    );
    std::fs::write(dir.path().join("bad.cfg"), r#"{"tau": -1}"#).unwrap();
    assert_eq!(
        error_kind(&cosmic(
            &["run", "--manifest", "data/manifest.json", "--config", "bad.cfg"],
            dir.path()
        )),
        "NonPositiveTemperature"
    );
    std::fs::write(dir.path().join("typo.cfg"), r#"{"tua": 0.1}"#).unwrap();
    assert_eq!(
        error_kind(&cosmic(
            &["run", "--manifest", "data/manifest.json", "--config", "typo.cfg"],
            dir.path()
        )),
        "JsonError"
    );
    std::fs::write(dir.path().join("data/text.csmf"), b"XXXXnot a feature file").unwrap();
    assert_eq!(
        error_kind(&cosmic(&["run", "--manifest", "data/manifest.json"], dir.path())),
        "BadMagic"
    );
    assert_eq!(error_kind(&cosmic(&["frobnicate"], dir.path())), "UsageError");
    assert_eq!(
        error_kind(&cosmic(&["dump-graph", "--state", "s.json", "--space", "xyz"], dir.path())),
        "UsageError"
    );
}

#[test]
fn infeasible_synth_spec_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.json"),
        r#"{"k": 5, "d1": 2, "max_mean_cosine": -0.9}"#,
    )
    .unwrap();
    assert_eq!(
        error_kind(&cosmic(&["gen-synth", "--spec", "spec.json", "--out", "d"], dir.path())),
        "InfeasibleSpec"
    );
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&cosmic(&["--help"], dir.path()));
    for cmd in ["run", "gen-synth", "sweep-betas", "dump-graph", "eval"] {
        assert!(out.contains(cmd), "{cmd}");
    }
}
