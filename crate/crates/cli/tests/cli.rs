use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regretlab"))
}

fn write_config(dir: &Path, file: &str, body: &str) -> PathBuf {
    let path = dir.join(file);
    fs::write(&path, format!("output = \"{}\"\n{body}\n", dir.join("out").display())).unwrap();
    path
}

fn run(config: &Path) -> Output {
    bin().arg("--workers").arg("2").arg("run").arg(config).env_remove("REGRETLAB_SEED").output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const STOCHASTIC: &str = r#"
name = "pennies"
game = "matching_pennies"
dynamics = "stochastic"
horizon = 2000
runs = 3
seed = 11
analyses = ["hannan", "limit_set"]
"#;

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "p.toml", STOCHASTIC);
    assert_ok(&run(&cfg));
    let first: Vec<Vec<u8>> =
        (0..3).map(|i| fs::read(dir.path().join(format!("out/pennies/{i}/trajectory.csv"))).unwrap()).collect();
    let manifest = fs::read(dir.path().join("out/pennies/manifest.json")).unwrap();
    assert_ok(&run(&cfg));
    for (i, bytes) in first.iter().enumerate() {
        assert_eq!(bytes, &fs::read(dir.path().join(format!("out/pennies/{i}/trajectory.csv"))).unwrap());
    }
    assert_eq!(manifest, fs::read(dir.path().join("out/pennies/manifest.json")).unwrap());
    assert_ne!(first[0], first[1], "runs should use distinct streams");
}

#[test]
fn row_counts_and_summary_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "p.toml", STOCHASTIC);
    assert_ok(&run(&cfg));
    let summary = json(&dir.path().join("out/pennies/summary.json"));
    for r in summary["runs"].as_array().unwrap() {
        let i = r["index"].as_u64().unwrap();
        let text = fs::read_to_string(dir.path().join(format!("out/pennies/{i}/trajectory.csv"))).unwrap();
        let data_rows = text.lines().count() - 1;
        assert_eq!(data_rows as u64, r["csv_rows"].as_u64().unwrap());
        assert_eq!(data_rows as u64, r["expected_rows"].as_u64().unwrap());
    }
    let share = summary["aggregate"]["share_final_r_max_le_0_05"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&share));
    assert!(dir.path().join("out/pennies/0/limit_set.json").is_file());
    assert!(dir.path().join("out/pennies/0/hannan.json").is_file());
}

#[test]
fn manifest_hashes_match_files() {
    use sha2::{Digest, Sha256};
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "p.toml", STOCHASTIC);
    assert_ok(&run(&cfg));
    let root = dir.path().join("out/pennies");
    let manifest = json(&root.join("manifest.json"));
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let bytes = fs::read(root.join(a["path"].as_str().unwrap())).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(a["sha256"].as_str().unwrap(), hex);
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn dfp_fig1_regret_stays_bounded_away() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.toml",
        "name = \"dfp\"\ngame = \"fig1\"\ndynamics = \"dfp\"\nhorizon = 20000\n[initial]\nprofile = [\"L\", \"R\"]\n",
    );
    assert_ok(&run(&cfg));
    let summary = json(&dir.path().join("out/dfp/summary.json"));
    let bound = 2f64.sqrt() / (1.0 + 2f64.sqrt());
    let m = summary["runs"][0]["min_max_regret"].as_f64().unwrap();
    assert!(m >= bound - 1e-6, "{m} < {bound}");
}

#[test]
fn cfp_shapley_conserves_scaled_regret() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "name = \"cfp\"\ngame = \"shapley\"\ndynamics = \"cfp\"\nhorizon = 1000\nseed = 3\n",
    );
    assert_ok(&run(&cfg));
    let summary = json(&dir.path().join("out/cfp/summary.json"));
    let res = summary["aggregate"]["max_conservation_residual"].as_f64().unwrap();
    assert!(res <= 1e-6, "{res}");
}

#[test]
fn seed_env_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "p.toml", STOCHASTIC);
    let out = bin().arg("run").arg(&cfg).env("REGRETLAB_SEED", "99").output().unwrap();
    assert_ok(&out);
    let summary = json(&dir.path().join("out/pennies/summary.json"));
    assert_eq!(summary["runs"][0]["seed"].as_u64().unwrap(), 99);
    let bad = bin().arg("run").arg(&cfg).env("REGRETLAB_SEED", "x").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2_with_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "name = \"b\"\ngame = \"nope\"\ndynamics = \"dfp\"\nhorizon = 5\n");
    let out = run(&cfg);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "unknown_game");
    assert_eq!(bin().arg("verify").arg("sometimes").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("launch").output().unwrap().status.code(), Some(2));
}

#[test]
fn game_info_json() {
    let out = bin().args(["game", "info", "fig1", "--json"]).output().unwrap();
    assert_ok(&out);
    let info: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["rows"], 2);
    assert_eq!(info["nash"].as_array().unwrap().len(), 3);
    assert!(info["curb_sets"].as_array().unwrap().iter().any(|c| c == "{L,R}x{L,R}"));
}

#[test]
fn analyze_reads_game_from_run_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.toml",
        "name = \"a\"\ngame = \"fig1\"\ndynamics = \"dfp\"\nhorizon = 5000\n[record]\nschedule = \"every:1\"\n[initial]\nprofile = [\"L\", \"R\"]\n",
    );
    assert_ok(&run(&cfg));
    let csv = dir.path().join("out/a/0/trajectory.csv");
    let out = bin().arg("analyze").arg(&csv).arg("hannan").output().unwrap();
    assert_ok(&out);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["class"], "outside");
    let out = bin().arg("analyze").arg(&csv).arg("perturbation").arg("--game").arg("fig1").output().unwrap();
    assert_ok(&out);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["max_delta"].as_f64().unwrap(), 0.0);
}

#[test]
fn verify_static_runs() {
    let out = bin().args(["verify", "static", "--json"]).output().unwrap();
    let results: Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = results.as_array().unwrap();
    assert_eq!(results.len(), 6);
    let all_pass = results.iter().all(|r| r["passed"] == true);
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 1 }));
}
