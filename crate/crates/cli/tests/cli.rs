use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use drmdp_cli::config::{load_config, parse_config, MdpSpec};
use drmdp_cli::experiment::{run_experiment, Overrides};
use drmdp_cli::ingest::read_episodes;
use serde_json::Value;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn staged(dir: &Path, name: &str) -> PathBuf {
    let dest = dir.join(name);
    fs::copy(example(name), &dest).unwrap();
    dest
}

fn drmdp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_drmdp"))
}

fn replace_line(text: &str, prefix: &str, line: &str) -> String {
    text.lines()
        .map(|l| if l.starts_with(prefix) { line } else { l })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bundled_sandwich_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = staged(dir.path(), "sandwich.toml");
    let out = dir.path().join("out.jsonl");
    let status = drmdp().arg("run").arg(&config).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let record: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(record["kind"], "sandwich");
    assert_eq!(record["pass"], true);
    let reports = record["payload"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 10);
    assert!(reports.iter().all(|r| r["pass"] == true));
    let csv = fs::read_to_string(dir.path().join("sandwich_sweep.csv")).unwrap();
    assert!(csv.starts_with("state,alpha,empirical_mean,dr_lower,dr_upper,reg_value"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn discount_of_one_is_rejected_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("sandwich.toml")).unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, replace_line(&text, "discount", "discount = 1.0")).unwrap();
    let output = drmdp().arg("run").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("mdp.discount"));
    let output = drmdp().arg("validate").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn zero_trials_is_a_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("oos.toml")).unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, replace_line(&text, "trials", "trials = 0")).unwrap();
    let output = drmdp().arg("run").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("oos.trials"));
}

#[test]
fn parse_errors_are_line_anchored() {
    let err = parse_config("kind = \"sandwich\"\nseed = \"x\"\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn validate_accepts_every_example() {
    for name in ["sandwich.toml", "approx.toml", "oos.toml", "robust_vi.toml"] {
        let status = drmdp().arg("validate").arg(example(name)).status().unwrap();
        assert_eq!(status.code(), Some(0), "{name}");
    }
}

#[test]
fn ingest_reports_episodes() {
    let output = drmdp()
        .args(["ingest", example("episodes.csv").to_str().unwrap(), "--dims", "2,2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let summary: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(summary["episodes"].as_array().unwrap().len(), 2);
    let bad = drmdp()
        .args(["ingest", example("episodes.csv").to_str().unwrap(), "--dims", "1,2"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("row 3"));
}

#[test]
fn three_rows_over_two_episodes() {
    let logs = read_episodes("episode,s,a,s_next\n4,0,1,1\n4,1,0,0\n9,1,1,1\n".as_bytes(), 2, 2).unwrap();
    let lens: Vec<usize> = logs.iter().map(|l| l.len()).collect();
    assert_eq!(lens, vec![2, 1]);
}

#[test]
fn reruns_reproduce_numeric_payloads() {
    for name in ["sandwich.toml", "approx.toml", "robust_vi.toml"] {
        let loaded = load_config(&example(name)).unwrap();
        let a = run_experiment(&loaded, &Overrides::default()).unwrap();
        let b = run_experiment(&loaded, &Overrides::default()).unwrap();
        assert_eq!(a.record.numeric_payload(), b.record.numeric_payload(), "{name}");
        assert_eq!(a.record.inputs_digest, b.record.inputs_digest);
    }
}

#[test]
fn seed_override_changes_the_digest() {
    let loaded = load_config(&example("approx.toml")).unwrap();
    let a = run_experiment(&loaded, &Overrides::default()).unwrap();
    let b = run_experiment(&loaded, &Overrides { seed: Some(12), output: None }).unwrap();
    assert_ne!(a.record.inputs_digest, b.record.inputs_digest);
}

#[test]
fn mdp_spec_round_trips() {
    let loaded = load_config(&example("sandwich.toml")).unwrap();
    let spec = loaded.config.mdp.clone();
    let text = toml::to_string(&spec).unwrap();
    let back: MdpSpec = toml::from_str(&text).unwrap();
    assert_eq!(spec, back);
    let whole = toml::to_string(&loaded.config).unwrap();
    assert_eq!(parse_config(&whole).unwrap(), loaded.config);
}
