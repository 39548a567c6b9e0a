use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[scenario]
snr_ratios = [1.0, 2.0, 3.0, 0.0]
avg_snr_db = -8.0
prior = [0.25, 0.25, 0.25, 0.25]
samples_per_slot = 10000
nu = 50.0
horizon = 3000
stage1_slots = 600

[learner]
iters = 300
burnin = 100

[policy]
grid_size = 201
mc_episodes = 200

[engine]
seeds = [0, 1]
strategies = ["periodic", "nonperiodic", "perfect"]
"#;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelshare"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("small.toml"), SMALL).unwrap();
    d
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_source_is_a_usage_error() {
    let d = setup();
    let o = bin(&["simulate"], d.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let d = setup();
    let o = bin(&["simulate", "--preset", "fig99"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_without_scenario_names_the_field() {
    let d = setup();
    std::fs::write(d.path().join("bad.toml"), "[engine]\nseeds = [0]\n").unwrap();
    let o = bin(&["simulate", "--config", "bad.toml"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_tables_and_is_deterministic() {
    let d = setup();
    for out in ["a", "b"] {
        let o = bin(&["simulate", "--config", "small.toml", "--out", out], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["runs.csv", "summary.csv", "curves.csv", "config.toml"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let runs = std::fs::read_to_string(d.path().join("a/runs.csv")).unwrap();
    // header plus two seeds times three strategies
    assert_eq!(runs.lines().count(), 7);
}

#[test]
fn learn_then_plan() {
    let d = setup();
    let o = bin(&["learn", "--config", "small.toml", "--seed", "3", "--out", "m"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["chain.jsonl", "diagnostics.csv", "model.json"] {
        assert!(d.path().join("m").join(f).exists(), "{f} missing");
    }
    let o = bin(&["plan", "--model", "m/model.json", "--tau-s", "3", "--dump"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("tau,k,p_star\n"));
    assert!(d.path().join("m/policy.json").exists() && d.path().join("m/sense_model.json").exists());
    let table: levelshare::PolicyTable = levelshare::PolicyTable::from_json(&std::fs::read_to_string(d.path().join("m/policy.json")).unwrap()).unwrap();
    assert_eq!(table.tau_s, 3);
}

#[test]
fn em_baseline_uses_the_true_level_count() {
    let d = setup();
    let o = bin(&["learn", "--config", "small.toml", "--baseline", "em", "--out", "em"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("em/model.json")).unwrap()).unwrap();
    assert_eq!(model["model"]["mu"].as_array().unwrap().len(), 4);
    assert_eq!(model["method"], "em");
}

#[test]
fn coarse_grid_warns() {
    let d = setup();
    assert_eq!(bin(&["learn", "--config", "small.toml", "--out", "m"], d.path()).status.code(), Some(0));
    let o = bin(&["plan", "--model", "m/model.json", "--grid-size", "21"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).to_lowercase().contains("grid"), "{}", stderr(&o));
}
