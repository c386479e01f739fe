use std::fs;
use std::path::{Path, PathBuf};

use lissajous_swarm::cli::{main_with_args, EXIT_INVALID, EXIT_OK, EXIT_REFUSED};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["lissajous-swarm"];
    argv.extend_from_slice(args);
    let code = main_with_args(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// experiment1 shortened to a few seconds.
fn short_config(dir: &Path, extra: &str) -> PathBuf {
    let text = fs::read_to_string(configs_dir().join("experiment1.toml"))
        .unwrap()
        .replace("duration = 240.0", "duration = 3.0");
    let path = dir.join("short.toml");
    fs::write(&path, format!("{extra}\n{text}")).unwrap();
    path
}

#[test]
fn bundled_configs_validate() {
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let (code, out, err) = invoke(&["validate", path.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{}: {err}", path.display());
        assert!(out.contains("ok"));
    }
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs_dir().join("experiment1.toml"))
        .unwrap()
        .replace("omega = 0.03", "omega = -0.03")
        .replace("dt = 0.01", "dt = -0.01")
        .replace("eta = 1.05", "eta = 0.5");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let (code, _, err) = invoke(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.lines().count() >= 3, "{err}");
}

#[test]
fn unknown_keys_and_missing_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = short_config(dir.path(), "colour = \"red\"");
    assert_eq!(
        invoke(&["validate", path.to_str().unwrap()]).0,
        EXIT_INVALID
    );
    assert_eq!(invoke(&["validate", "/nonexistent/x.toml"]).0, EXIT_INVALID);
    assert_eq!(invoke(&["frobnicate"]).0, EXIT_INVALID);
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let (code, out, err) = invoke(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["robots"], 7);
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("# trace-schema:"));
    // schema line, header, t = 0, then every tenth of 300 ticks
    assert_eq!(trace.lines().count(), 2 + 1 + 30);
    let events: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("events.json")).unwrap()).unwrap();
    assert!(events.is_array());
    let on_disk: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
}

#[test]
fn refused_scenario_exits_with_refusal_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(short_config(dir.path(), ""))
        .unwrap()
        .replace("eta = 1.05", "eta = 1.05\nr_s = 2.0");
    let path = dir.path().join("refused.toml");
    fs::write(&path, &text).unwrap();
    let out_dir = dir.path().join("out");
    let (code, _, err) = invoke(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_REFUSED, "{err}");
    assert!(err.contains("allow_guarantee_violation"));
    assert!(!out_dir.join("trace.csv").exists());

    fs::write(
        &path,
        format!("{text}\n[overrides]\nallow_guarantee_violation = true\n"),
    )
    .unwrap();
    let (code, _, err) = invoke(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
}

#[test]
fn unwritable_output_fails_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let (code, _, err) = invoke(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_ne!(code, EXIT_OK);
    assert!(err.contains("error"), "{err}");
}

#[test]
fn plan_reports_bounds_as_json() {
    let cfg = configs_dir().join("experiment1.toml");
    let (code, out, err) = invoke(&["plan", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["r_s"].as_f64().unwrap() > 0.0);
    assert_eq!(v["p"], 2);
}

#[test]
fn sweep_writes_runs_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let out_dir = dir.path().join("sweep");
    fs::create_dir(&out_dir).unwrap();
    let (code, _, err) = invoke(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--axis",
        "network.base_delay",
        "--values",
        "0.0,0.05",
        "--seeds",
        "1..2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let runs = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 4);
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2);
    assert!(agg.lines().next().unwrap().contains("_std"));

    let (code, _, _) = invoke(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--axis",
        "no.such.field",
        "--values",
        "1",
    ]);
    assert_eq!(code, EXIT_INVALID);
}
