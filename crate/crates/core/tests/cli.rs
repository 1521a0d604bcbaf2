//! End-to-end runs of the `granulyzer` binary.

use std::path::Path;
use std::process::{Command, Output};

use granulyzer::harness::csv_io::{read_samples, SAMPLE_HEADER};
use granulyzer::harness::ModelsDoc;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_granulyzer"));
    cmd.env_remove("GRANULYZER_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_fit_predict_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("nested/samples.csv");
    let models = dir.path().join("models.json");
    let o = run(&[
        "sweep",
        "--workload",
        "fft",
        "--ranks",
        "4:256:x2",
        "--out",
        path_str(&samples),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("detrimental"));

    let text = std::fs::read_to_string(&samples).unwrap();
    assert!(text.starts_with(SAMPLE_HEADER));
    let rows = read_samples(&text, "samples").unwrap();
    assert_eq!(rows.len(), 7);
    let omega: Vec<f64> = rows
        .iter()
        .map(|r| r.sample.t_overhead / (r.sample.t_kernel + r.sample.t_overhead))
        .collect();
    assert!(omega.windows(2).all(|w| w[1] > w[0]), "{omega:?}");

    let o = run(&["fit", path_str(&samples), "--out", path_str(&models)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = ModelsDoc::from_json(&std::fs::read_to_string(&models).unwrap()).unwrap();
    assert!(doc.a > 0.0);
    assert!(doc.diagnostics.unwrap().points_used.len() >= 2);

    let o = run(&["predict", path_str(&models)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pred: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p_star = pred["prediction"]["p_star"].as_f64().unwrap();
    assert!(p_star > 128.0 && p_star < 256.0, "{p_star}");
    assert_eq!(pred["curve"].as_array().unwrap().len(), 7);
}

#[test]
fn fit_rejects_empty_and_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{SAMPLE_HEADER}\n")).unwrap();
    let o = run(&["fit", path_str(&empty)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("insufficient samples"),
        "{}",
        stderr(&o)
    );

    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        format!("{SAMPLE_HEADER}\nfft,global,4,1,0\nfft,global,8,oops,0\n"),
    )
    .unwrap();
    let o = run(&["fit", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = run(&["fit", path_str(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn predict_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"a": 1000, "form": "Constant", "beta": 10}"#,
            Some(100.0),
            true,
        ),
        (r#"{"a": 1000, "form": "Constant", "beta": 0}"#, None, false),
        (
            r#"{"a": 1000, "form": "Quadratic", "alpha": 0.001, "beta": 0}"#,
            Some(100.0),
            true,
        ),
        (
            r#"{"a": 1000, "form": "linear", "alpha": 0.1}"#,
            Some(100.0),
            true,
        ),
    ];
    for (i, (json, p_star, in_range)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("m{i}.json"));
        std::fs::write(&path, json).unwrap();
        let o = run(&["predict", path_str(&path), "--range-hi", "256"]);
        assert!(o.status.success(), "{json}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        match p_star {
            Some(p) => assert!((v["prediction"]["p_star"].as_f64().unwrap() - p).abs() < 1e-6),
            None => assert!(v["prediction"]["p_star"].is_null()),
        }
        assert_eq!(
            v["prediction"]["exists_in_range"].as_bool(),
            Some(*in_range)
        );
    }
    let invalid = dir.path().join("invalid.json");
    std::fs::write(&invalid, "{not json").unwrap();
    assert_eq!(run(&["predict", path_str(&invalid)]).status.code(), Some(1));
}

#[test]
fn decide_flips_between_32_and_64() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("m.json");
    std::fs::write(
        &models,
        r#"{"a": 1000, "form": "Quadratic", "alpha": 0.001, "beta": 0}"#,
    )
    .unwrap();
    let o = run(&["decide", path_str(&models), "--penalty", "1.2", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["flip_point"].as_u64(), Some(64));
    let choice = |p: u64| {
        v["verdicts"]
            .as_array()
            .unwrap()
            .iter()
            .find(|x| x["p"] == p)
            .unwrap()["choice"]
            .clone()
    };
    assert_eq!(choice(32), "dynamic");
    assert_eq!(choice(64), "static");

    let o = run(&["decide", path_str(&models)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("no dynamic-to-static flip"));
    assert!(!stdout(&o).contains("dynamic\n"));
    assert_eq!(
        run(&["decide", path_str(&models), "--penalty", "0.5"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_modes_and_regimes() {
    let o = run(&["sweep", "--workload", "gemm"]);
    assert!(o.status.success());
    let table = stderr(&o);
    assert_eq!(table.matches("beneficial").count(), 7, "{table}");

    let o = run(&[
        "sweep",
        "--workload",
        "stencil",
        "--mode",
        "static",
        "--ranks",
        "4,8,16",
    ]);
    assert!(o.status.success());
    let rows = read_samples(&stdout(&o), "stdout").unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.sample.t_overhead == 0.0));
}

#[test]
fn curve_without_samples_is_reference_only() {
    let o = run(&["curve"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("series,workload,topology,P,G,omega_pct,regime\n"));
    assert_eq!(
        text.lines().filter(|l| l.starts_with("reference")).count(),
        101
    );
    assert_eq!(
        text.lines().filter(|l| l.starts_with("boundary")).count(),
        2
    );
    assert_eq!(
        text.lines().filter(|l| l.starts_with("measured")).count(),
        0
    );
}

#[test]
fn curve_from_sweep_with_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("plot.svg");
    let o = run(&["curve", "--workload", "gemm", "--svg", path_str(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for line in stdout(&o).lines().filter(|l| l.starts_with("measured")) {
        let fields: Vec<&str> = line.split(',').collect();
        let g: f64 = fields[4].parse().unwrap();
        let omega: f64 = fields[5].parse().unwrap();
        assert!(g >= 10.0);
        assert!((omega - 100.0 / (g + 1.0)).abs() < 1e-9);
    }
    assert_eq!(
        std::fs::read_to_string(&svg)
            .unwrap()
            .matches("<circle")
            .count(),
        7
    );
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"workload": "stencil", "seed": 1, "ranks": [4, 8], "phases": 3}"#,
    )
    .unwrap();
    let out = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["sweep", "--config", path_str(&cfg)]);
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        if let Some(s) = env {
            cmd.env("GRANULYZER_SEED", s);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let file = out(None, None);
    let env = out(Some("2"), None);
    let flag = out(Some("2"), Some("3"));
    assert_ne!(file, env);
    assert_ne!(env, flag);
    assert_eq!(env, out(None, Some("2")));
    assert_eq!(flag, out(None, Some("3")));
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(run(&["sweep"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--workload", "nope"]).status.code(), Some(1));
    assert_eq!(
        run(&["sweep", "--workload", "fft", "--ranks", "8:4"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"workload": "fft", "colour": "blue"}"#).unwrap();
    let o = run(&["report", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
    assert_eq!(
        run(&[
            "report",
            "--config",
            path_str(&dir.path().join("none.json"))
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn report_embeds_reproducible_models() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = run(&[
        "report",
        "--workload",
        "fft",
        "--seed",
        "11",
        "--out",
        path_str(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let samples = dir.path().join("embedded.csv");
    std::fs::write(&samples, v["samples_csv"].as_str().unwrap()).unwrap();
    let o = run(&["fit", path_str(&samples)]);
    assert!(o.status.success());
    let refit: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(refit, v["models"]);
    assert!(v["bracket"]["consistent"].is_boolean());
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 7);
}
