use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn plrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plrank")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Four items, twelve rankings, the last four cut after the winner.
fn write_dataset(dir: &Path) -> String {
    let orders = [
        [0, 1, 2, 3], [1, 0, 3, 2], [0, 2, 1, 3], [2, 0, 3, 1], [1, 3, 0, 2], [3, 2, 1, 0],
        [0, 3, 2, 1], [2, 1, 0, 3], [0, 1, 3, 2], [1, 2, 3, 0], [3, 0, 1, 2], [2, 3, 0, 1],
    ];
    let mut csv = String::from("obs_id,rank,item\n");
    for (i, o) in orders.iter().enumerate() {
        for (r, k) in o.iter().enumerate() {
            csv.push_str(&format!("r{i},{},{k}\n", r + 1));
        }
    }
    let path = dir.join("data.csv");
    fs::write(&path, csv).unwrap();
    fs::write(dir.join("data.json"), r#"{"n": 4, "cutoffs": {"r8": 1, "r9": 1, "r10": 1, "r11": 1}}"#).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn fit_then_infer() {
    let dir = TempDir::new().unwrap();
    let data = write_dataset(dir.path());
    let fit_path = dir.path().join("fit.json");
    let out = plrank(&["fit", "--data", &data, "--estimator", "full", "--out", fit_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(&fit_path).unwrap()).unwrap();
    assert_eq!(fit["converged"], true);
    assert_eq!(fit["n_k"], serde_json::json!([12, 12, 12, 12]));

    let out = plrank(&["infer", "--data", &data, "--fit", fit_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn graph_diag_on_data_and_generated() {
    let dir = TempDir::new().unwrap();
    let data = write_dataset(dir.path());
    let out = plrank(&["graph-diag", "--data", &data, "--exact-cheeger", "--gamma-re"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(diag.is_object());

    let gen = dir.path().join("gen.json");
    fs::write(&gen, r#"{"nurhm": {"n": 30, "sizes": [{"m": 3, "rule": "constant", "p": 0.01}]}}"#).unwrap();
    let out = plrank(&["graph-diag", "--generate", gen.to_str().unwrap(), "--seed", "3", "--no-spectral"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn experiment_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{"experiment":"coverage","n_values":[20],"replications":3,
            "design":{"type":"nurhm_fixed","sizes":[3,4],"per_size":{"coef":10,"n_power":1}},
            "estimators":["qmle","full"],"seed":1}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_plrank"))
        .args(["experiment", "--config", config.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()])
        .env("PLRANK_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
}

#[test]
fn ingest_and_report() {
    let dir = TempDir::new().unwrap();
    let races = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/races.csv");
    let data = dir.path().join("races_data.csv");
    let out = plrank(&["ingest", "--races", races.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["horses"], 240);
    let labels = data.with_extension("items.csv");
    assert!(labels.exists() && dir.path().join("races_data.json").exists());

    let out = plrank(&["report", "--data", data.to_str().unwrap(), "--labels", labels.to_str().unwrap(), "--top-k", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("id,races,average_place,estimate,confidence_interval,rank"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"experiment":"coverage","n_values":[]}"#).unwrap();
    let out = plrank(&["experiment", "--config", config.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    let data = write_dataset(dir.path());
    let out = plrank(&["infer", "--data", &data, "--level", "1.5"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(dir.path().join("good.json"), r#"{"experiment":"coverage","n_values":[10],"replications":1,
        "design":{"type":"nurhm_fixed","sizes":[3],"per_size":{"coef":5,"n_power":1}},"estimators":["qmle"],"seed":1}"#)
        .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_plrank"))
        .args(["experiment", "--config", dir.path().join("good.json").to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()])
        .env("PLRANK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn data_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let gap = dir.path().join("gap.csv");
    fs::write(&gap, "obs_id,rank,item\na,1,0\na,3,1\n").unwrap();
    assert_eq!(code(&plrank(&["fit", "--data", gap.to_str().unwrap()])), 3);

    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&plrank(&["fit", "--data", missing.to_str().unwrap()])), 3);

    // item 0 always wins: no finite estimate
    let dominated = dir.path().join("dom.csv");
    fs::write(&dominated, "obs_id,rank,item\na,1,0\na,2,1\nb,1,0\nb,2,2\nc,1,1\nc,2,2\nd,1,2\nd,2,1\n").unwrap();
    let out = plrank(&["fit", "--data", dominated.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
