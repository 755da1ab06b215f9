use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = "\
seed = 11
simlab = true
simlab.n_parcels = 1200
simlab.n_survey = 600
bootstrap_replicates = 1000
fit.families = weibull, exponential
fit.restarts = 2
";

fn tenure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tenure"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn report(cfg: &Path, out: &Path, threads: &str) -> Output {
    tenure(&[
        "report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        threads,
    ])
}

#[test]
fn report_bundle_ignores_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (dir, threads) in dirs.iter().zip(["1", "4", "4"]) {
        let out = report(&cfg, dir, threads);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = tree(&dirs[0]);
    for name in [
        "fig1_km_ALL.csv",
        "fig3_hazard.csv",
        "fig4_wtp.csv",
        "fig6_tenure_bins.csv",
        "fig7_generation.csv",
    ] {
        assert!(first.contains_key(name), "missing {name}");
    }
    assert!(first.contains_key("table1.json") && first.contains_key("appendix_pairwise.json"));
    for d in &dirs[1..] {
        let other = tree(d);
        assert_eq!(first.keys().collect::<Vec<_>>(), other.keys().collect::<Vec<_>>());
        for (name, bytes) in &first {
            assert!(bytes == &other[name], "{name} differs");
        }
    }
}

#[test]
fn simlab_report_fills_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("out");
    assert!(report(&cfg, &dir, "2").status.success());
    let m = manifest(&dir);
    let stages = m["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 7);
    assert!(stages.iter().all(|s| s["status"] == "ok"), "{stages:?}");
    assert_eq!(m["config"]["transactions"], "simlab:inputs/transactions.csv");
    let sha = m["inputs"]["transactions"].as_str().unwrap();
    assert_eq!(sha, m["outputs"]["inputs/transactions.csv"].as_str().unwrap());

    let table: Value = serde_json::from_slice(&fs::read(dir.join("table1.json")).unwrap()).unwrap();
    let groups: Vec<&str> = table
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["group"].as_str().unwrap())
        .collect();
    assert_eq!(groups, ["A", "B", "C", "D", "E", "F", "G", "H", "ALL"]);
    assert!(!dir.join("FAILED").exists());
}

#[test]
fn stage_failure_leaves_marker_and_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("sales.csv"), "parcel_id,neighborhood\nP1,A\n").unwrap();
    let cfg = write_config(tmp.path(), "seed = 1\ntransactions = sales.csv\n");
    let dir = tmp.path().join("out");
    let out = report(&cfg, &dir, "1");
    assert_eq!(out.status.code(), Some(1));
    let marker = fs::read_to_string(dir.join("FAILED")).unwrap();
    assert!(marker.starts_with("ingest:"), "{marker}");
    let m = manifest(&dir);
    assert_eq!(m["stages"][0]["status"], "failed");
    assert_eq!(m["stages"][1]["status"], "skipped");
}

#[test]
fn standalone_stage_without_input_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = tenure(&["survey", "--seed", "3", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.join("FAILED").exists());
}

#[test]
fn missing_seed_and_bad_keys_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = tenure(&["report", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let cfg = write_config(tmp.path(), "seed = 1\nbootstrap_replicas = 10\n");
    let out = tenure(&["report", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bootstrap_replicas"));
}

#[test]
fn simlab_inputs_feed_standalone_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let out = tenure(&["simlab", "--seed", "5", "--out", sim.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["transactions.csv", "survey.csv", "codebook.json", "simlab_truth.json"] {
        assert!(sim.join(f).is_file(), "missing {f}");
    }

    let cfg = write_config(
        tmp.path(),
        "seed = 5\ntransactions = sim/transactions.csv\nbootstrap_replicates = 1000\n",
    );
    let a = tmp.path().join("a");
    let out = tenure(&["cii", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(a.join("table1.csv").is_file() && a.join("spells.csv").is_file());
    assert!(!a.join("fig3_hazard.csv").exists());

    // one changed input byte changes the recorded checksum
    let b = tmp.path().join("b");
    let mut bytes = fs::read(sim.join("transactions.csv")).unwrap();
    bytes.extend_from_slice(b"\n");
    fs::write(sim.join("transactions.csv"), bytes).unwrap();
    let out = tenure(&[
        "ingest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_ne!(
        manifest(&a)["inputs"]["transactions"],
        manifest(&b)["inputs"]["transactions"]
    );
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
}

#[test]
fn cutoff_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    assert!(tenure(&["simlab", "--seed", "2", "--out", sim.to_str().unwrap()])
        .status
        .success());
    let cfg = write_config(
        tmp.path(),
        "seed = 2\ntransactions = sim/transactions.csv\ncutoff_date = 2020-03-11\n",
    );
    let dir = tmp.path().join("out");
    let out = tenure(&[
        "ingest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--cutoff",
        "2015-01-01",
    ]);
    assert!(out.status.success());
    assert_eq!(manifest(&dir)["config"]["cutoff_date"], "2015-01-01");
    let summary: Value = serde_json::from_slice(&fs::read(dir.join("ingest_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cutoff_date"], "2015-01-01");
}
