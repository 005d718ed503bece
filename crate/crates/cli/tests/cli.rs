//! End-to-end runs of the `pmuedge` binary.

use std::path::Path;
use std::process::Command;

fn pmuedge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmuedge"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(at) = stack.pop() {
        for entry in std::fs::read_dir(&at).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn generate_writes_manifest_and_records() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ds");
    let status = pmuedge()
        .args(["generate", "--per-fault", "1", "--seed", "7"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("manifest.json").exists());
    let index = read(&out.join("index.json"));
    // 5 fault records + 1 normal
    assert_eq!(index.matches(".csv").count(), 0);
    let listed: serde_json::Value = serde_json::from_str(&index).unwrap();
    assert_eq!(listed["records"].as_array().unwrap().len(), 6);
    // manifest carries the config hash
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["subcommand"], "generate");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let status = pmuedge()
            .args(["generate", "--per-fault", "1", "--seed", "11", "--noise", "0.05"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let snap_a: Vec<(String, Vec<u8>)> = dir_snapshot(&a)
        .into_iter()
        .filter(|(name, _)| name != "manifest.json") // differs in out_dir only
        .collect();
    let snap_b: Vec<(String, Vec<u8>)> = dir_snapshot(&b)
        .into_iter()
        .filter(|(name, _)| name != "manifest.json")
        .collect();
    assert_eq!(snap_a, snap_b);
}

#[test]
fn detect_ssa_single_input_emits_distance_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    assert!(pmuedge()
        .args(["generate", "--per-fault", "2", "--seed", "3"])
        .arg("--out")
        .arg(&ds)
        .status()
        .unwrap()
        .success());
    let out = tmp.path().join("run");
    let status = pmuedge()
        .args(["detect", "ssa"])
        .arg("--input")
        .arg(ds.join("records/ll_000.csv"))
        .arg("--calibrate")
        .arg(&ds)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&out.join("detection.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,distance,flag");
    let first = lines.next().unwrap();
    assert_eq!(first.split(',').count(), 3);
    // something was flagged on a fault record
    assert!(csv.lines().any(|l| l.ends_with(",1")), "no flags in output");
}

#[test]
fn detect_ssa_dataset_report_and_roc() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    assert!(pmuedge()
        .args(["generate", "--per-fault", "3", "--seed", "9"])
        .arg("--out")
        .arg(&ds)
        .status()
        .unwrap()
        .success());
    let out = tmp.path().join("run");
    assert!(pmuedge()
        .args(["detect", "ssa", "--roc"])
        .arg("--dataset")
        .arg(&ds)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert!(report["per_class"]["ll"]["tpr"].is_number());
    let roc = read(&out.join("roc.csv"));
    assert!(roc.lines().count() > 50);
}

#[test]
fn detect_knn_trains_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    assert!(pmuedge()
        .args(["generate", "--per-fault", "3", "--seed", "13"])
        .arg("--out")
        .arg(&ds)
        .status()
        .unwrap()
        .success());
    let out = tmp.path().join("run");
    let status = pmuedge()
        .args(["detect", "knn", "--train-per-class", "2", "--k", "5"])
        .arg("--train")
        .arg(&ds)
        .arg("--input")
        .arg(&ds)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("model.json").exists());
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert!(report["3ph"]["tpr"].is_number());
}

#[test]
fn simulate_runs_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let status = pmuedge()
            .args([
                "simulate",
                "--scenario",
                "1",
                "--qos",
                "both",
                "--duration",
                "1.0",
                "--seed",
                "5",
            ])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "simulate exit code");
    }
    for name in [
        "event_log_no_qos.csv",
        "event_log_qos.csv",
        "delay_table.csv",
        "completeness.csv",
        "summary.json",
        "results.json",
    ] {
        assert_eq!(
            read(&a.join(name)),
            read(&b.join(name)),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn simulate_zero_duration_is_well_formed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("empty");
    let status = pmuedge()
        .args(["simulate", "--scenario", "2", "--duration", "0", "--seed", "1"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let log = read(&out.join("event_log_qos.csv"));
    assert_eq!(log.lines().count(), 1, "header only");
    assert!(out.join("summary.json").exists());
}

#[test]
fn report_rerenders_results() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    assert!(pmuedge()
        .args(["simulate", "--scenario", "1", "--duration", "1.0", "--seed", "2"])
        .arg("--out")
        .arg(&sim)
        .status()
        .unwrap()
        .success());
    let out = tmp.path().join("rpt");
    let status = pmuedge()
        .arg("report")
        .arg("--results")
        .arg(sim.join("results.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read(&out.join("delay_table.csv")), read(&sim.join("delay_table.csv")));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    // unknown scenario id
    let status = pmuedge()
        .args(["simulate", "--scenario", "9", "--out"])
        .arg(tmp.path().join("x"))
        .status()
        .unwrap();
    assert!(!status.success());
    // empty dataset directory
    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let status = pmuedge()
        .args(["detect", "ssa"])
        .arg("--dataset")
        .arg(&empty)
        .arg("--out")
        .arg(tmp.path().join("y"))
        .status()
        .unwrap();
    assert!(!status.success());
}
