use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use silt_cli::cache::{read_records, EbCache};
use silt_core::{expected_silt, StepDistribution};
use tempfile::TempDir;

fn silt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

const UPPER: &str = r#"
experiment = "upper_tail"
n = [64, 128]
params = [0.2]
trials = 2000
seed = 5
out = "out"

[kappa]
value = 0.6429878
note = "shooting route, r_max 20"
"#;

#[test]
fn validate_accepts_a_good_config() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "u.toml", UPPER);
    let o = silt(tmp.path(), &["validate", "--config", "u.toml"]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "ok");
}

#[test]
fn validate_rejects_linear_schedule() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "u.toml", &UPPER.replace("params", "schedule = \"n\"\nparams"));
    let o = silt(tmp.path(), &["validate", "--config", "u.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("b_n = o(n)"), "{}", text(&o));
}

#[test]
fn validate_rejects_periodic_walk() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "u.toml", &format!("dist = \"simple\"\n{UPPER}"));
    let o = silt(tmp.path(), &["validate", "--config", "u.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("theorem hypotheses violated"), "{}", text(&o));
}

#[test]
fn validate_rejects_tiny_trial_counts() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "u.toml", &UPPER.replace("trials = 2000", "trials = 10"));
    let o = silt(tmp.path(), &["validate", "--config", "u.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("below statistical minimum"), "{}", text(&o));
}

#[test]
fn run_without_kappa_is_refused() {
    let tmp = TempDir::new().unwrap();
    let body = UPPER.split("[kappa]").next().unwrap();
    write_config(tmp.path(), "u.toml", body);
    let o = silt(tmp.path(), &["run", "--config", "u.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("κ unavailable"), "{}", text(&o));
    assert!(!tmp.path().join("out").join("results.csv").exists());
}

#[test]
fn strict_exits_two_on_flagged_estimates() {
    let tmp = TempDir::new().unwrap();
    // λ = 5 is far beyond anything 200 walks of length 64 can reach.
    write_config(
        tmp.path(),
        "u.toml",
        &UPPER.replace("params = [0.2]", "params = [5.0]").replace("trials = 2000", "trials = 200"),
    );
    let lax = silt(tmp.path(), &["run", "--config", "u.toml"]);
    assert_eq!(lax.status.code(), Some(0), "{}", text(&lax));
    let strict = silt(tmp.path(), &["run", "--config", "u.toml", "--strict"]);
    assert_eq!(strict.status.code(), Some(2), "{}", text(&strict));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert!(manifest["flagged"].as_u64().unwrap() > 0);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "u.toml", UPPER);
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let out = format!("out-{threads}");
        let o = silt(tmp.path(), &["run", "--config", "u.toml", "--threads", threads, "--out", &out]);
        assert!(o.status.success(), "{}", text(&o));
        csvs.push(fs::read(tmp.path().join(&out).join("results.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let o = silt(tmp.path(), &["run", "--config", "u.toml", "--seed", "6", "--out", "out-other"]);
    assert!(o.status.success());
    assert_ne!(fs::read(tmp.path().join("out-other/results.csv")).unwrap(), csvs[0]);
}

#[test]
fn manifest_records_config_hash_and_kappa() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "u.toml", UPPER);
    let o = silt(tmp.path(), &["run", "--config", "u.toml"]);
    assert!(o.status.success(), "{}", text(&o));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    let hash = m["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(m["kappa"]["value"].as_f64(), Some(0.6429878));
    assert!(m["outputs"].as_array().unwrap().iter().any(|v| v == "results.csv"));
    let rows = fs::read_to_string(tmp.path().join("out/results.csv")).unwrap();
    assert!(rows.starts_with("experiment,dist,n,b_rule,param,trials,estimate,ci_lo,ci_hi,theory,seed\n"));
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn expectation_cache_roundtrips() {
    let tmp = TempDir::new().unwrap();
    let dist = StepDistribution::lazy();
    let ns = [10, 100, 1000];
    let mut cache = EbCache::open(tmp.path(), &dist).unwrap();
    let first = cache.values(&ns).unwrap();
    let bytes = fs::read(cache.path()).unwrap();
    let records = read_records(&bytes[..], dist.fingerprint()).unwrap();
    assert_eq!(records.keys().copied().collect::<Vec<_>>(), ns);
    assert!(read_records(&bytes[..], dist.fingerprint() ^ 1).is_err());
    for (&n, &v) in ns.iter().zip(&first) {
        assert!((v - expected_silt(&dist, n)).abs() <= 1e-9 * v);
    }
    let mut reopened = EbCache::open(tmp.path(), &dist).unwrap();
    assert_eq!(reopened.values(&ns).unwrap(), first);
}

#[test]
fn run_needs_a_config() {
    let tmp = TempDir::new().unwrap();
    let o = silt(tmp.path(), &["run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("--config"));
}
