use std::path::Path;
use std::process::{Command, Output};

fn flowcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowcast")).args(args).output().expect("spawn flowcast")
}

fn ok(args: &[&str]) {
    let out = flowcast(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn pooled_mae(dir: &Path) -> f64 {
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("metrics.json")).unwrap()).unwrap();
    m["pooled"]["mae"].as_f64().unwrap()
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let spec = root.join("spec.json");
    std::fs::write(&spec, r#"{"nodes": 60, "hours": 1200, "split_hour": 900, "seed": 4}"#).unwrap();
    let cfg = root.join("train.cfg");
    std::fs::write(&cfg, "epochs = 2\nhidden_size = 8\n").unwrap();
    let (raw, prep, run) = (root.join("raw"), root.join("prep"), root.join("run"));

    ok(&["generate", "--out", s(&raw), "--spec", s(&spec)]);
    for f in ["nodes.csv", "edges.csv", "pois.csv", "counts.csv", "pings.csv", "weather.csv", "holidays.csv", "manifest.json"] {
        assert!(raw.join(f).is_file(), "missing {f}");
    }
    ok(&["preprocess", "--data", s(&raw), "--out", s(&prep)]);
    ok(&["train", "--data", s(&prep), "--out", s(&run), "--arch", "ctgrn", "--config", s(&cfg)]);
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    let ev = root.join("ev");
    ok(&["evaluate", "--data", s(&prep), "--out", s(&ev), "--checkpoint", s(&run.join("model.json"))]);
    assert!(pooled_mae(&ev).is_finite());
    for (arch, dir) in [("naive", "ev_naive"), ("arima", "ev_arima")] {
        let d = root.join(dir);
        ok(&["evaluate", "--data", s(&prep), "--out", s(&d), "--arch", arch, "--arima-max", "1,1,1"]);
        assert!(pooled_mae(&d) >= 0.0);
    }
    assert!(root.join("ev_arima/arima.csv").is_file());

    let fc = root.join("forecast.csv");
    ok(&["forecast", "--checkpoint", s(&run.join("model.json")), "--data", s(&prep), "--out", s(&fc)]);
    let text = std::fs::read_to_string(&fc).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("timestamp,poi_id,pred"));
    let rows: Vec<_> = lines.collect();
    let pois = std::fs::read_to_string(raw.join("pois.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows.len(), 24 * pois);
    assert!(rows.iter().all(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap() >= 0.0));
    assert!(root.join("forecast.manifest.json").is_file());
}

#[test]
fn failures_print_one_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = flowcast(&["train", "--data", s(&missing), "--out", s(&tmp.path().join("o")), "--arch", "rnn"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    let line = err.trim_end();
    assert_eq!(line.lines().count(), 1, "{err}");
    assert!(line.starts_with("error: kind=io msg=\""), "{line}");
}
