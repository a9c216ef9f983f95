//! End-to-end checks of the `qaoa` binary: artifacts on disk and exit codes.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn qaoa() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qaoa"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("qaoa_cli_tests")
        .join(format!("{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn solve_writes_result_and_trajectory() {
    let out = scratch("solve");
    let status = qaoa()
        .args([
            "solve",
            "--problem",
            "A",
            "--p",
            "1",
            "--optimizer",
            "nm",
            "--shots",
            "exact",
            "--seed",
            "3",
            "--max-calls",
            "120",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["problem"], "A");
    assert_eq!(result["rng"], "chacha8");
    assert!(result["best_F"].as_f64().unwrap() <= 0.0);
    let jsonl = fs::read_to_string(out.join("run.jsonl")).unwrap();
    assert!(jsonl.lines().count() <= 120);
    assert!(jsonl.lines().next().unwrap().contains("\"call_index\":0"));
    assert!(out.join("model.json").exists());
}

#[test]
fn landscape_emits_grid_linecut_and_meta() {
    let out = scratch("landscape");
    let status = qaoa()
        .args([
            "landscape",
            "--problem",
            "C",
            "--resolution",
            "13",
            "--shots",
            "exact",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("landscape.csv")).unwrap();
    assert!(csv.starts_with("gamma,beta,F,P_00,P_01,P_10,P_11\n"));
    assert_eq!(csv.lines().count(), 1 + 13 * 13);
    assert!(out.join("linecut.csv").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["resolution"], 13);
    assert_eq!(meta["linecut_axis"], "gamma");
}

#[test]
fn benchmark_writes_report_and_runs() {
    let out = scratch("benchmark");
    let status = qaoa()
        .args([
            "benchmark",
            "--problem",
            "A",
            "--p",
            "1",
            "--runs",
            "3",
            "--shots",
            "400",
            "--optimizers",
            "nm,cmaes",
            "--max-calls",
            "40",
            "--seed",
            "5",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"], 3);
    assert_eq!(report["optimizers"].as_array().unwrap().len(), 2);
    for name in ["nm_000.jsonl", "nm_002.jsonl", "cmaes_001.jsonl"] {
        assert!(out.join("runs").join(name).exists(), "{name} missing");
    }
}

#[test]
fn predict_prints_csv_to_stdout() {
    let output = qaoa()
        .args([
            "predict",
            "--problem",
            "A",
            "--pmax",
            "2",
            "--noise",
            "default",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.starts_with("p,h,x,rx,rz,cz,predicted_fidelity\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn instance_files_are_accepted() {
    let out = scratch("instance");
    fs::create_dir_all(&out).unwrap();
    let instance = out.join("instance.json");
    fs::write(
        &instance,
        r#"{"name":"pair","elements":["a","b"],"subsets":[["a"],["b"]]}"#,
    )
    .unwrap();
    let status = qaoa()
        .args(["solve", "--instance"])
        .arg(&instance)
        .args(["--shots", "exact", "--max-calls", "60", "--out"])
        .arg(out.join("run"))
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn validation_failures_exit_with_code_two() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--problem", "Z", "--out", "/tmp/qaoa_cli_invalid"],
        vec![
            "solve",
            "--problem",
            "A",
            "--shots",
            "nope",
            "--out",
            "/tmp/qaoa_cli_invalid",
        ],
        vec![
            "benchmark",
            "--problem",
            "A",
            "--threshold",
            "0.5",
            "--out",
            "/tmp/qaoa_cli_invalid",
        ],
        vec![
            "landscape",
            "--problem",
            "A",
            "--noise",
            "/nonexistent/noise.json",
            "--out",
            "/tmp/qaoa_cli_invalid",
        ],
        // Missing both --problem and --instance.
        vec!["predict"],
    ];
    for args in cases {
        let status = qaoa().args(&args).status().unwrap();
        assert_eq!(status.code(), Some(2), "args {args:?}");
    }
}
