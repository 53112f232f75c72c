use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neuroidbench")).args(args).current_dir(cwd).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "name: cli
dataset:
  - name: UserDataset
    parameters: {dataset_path: bundle}
pipelines:
  AR+LDA:
    - name: AutoRegressive
    - name: LDA
evaluation: {k_folds: 2}
";

#[test]
fn validate_prints_a_config_that_parses_again() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.yml", include_str!("fixtures/bi2015a_tnn_and_svm.yml"));
    let out = bin(&["validate", "--config", &path], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let again = neuroidbench::orchestrator::parse_config(&text).unwrap();
    assert_eq!(again, neuroidbench::orchestrator::parse_config(include_str!("fixtures/bi2015a_tnn_and_svm.yml")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.yml", include_str!("fixtures/user_dataset_custom_tnn.yml"));
    for cmd in ["validate", "run"] {
        let out = bin(&[cmd, "--config", &path], dir.path());
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("dataset_path"));
    }
}

#[test]
fn generate_then_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = bin(&["generate", "--out", "bundle", "--subjects", "5", "--epochs", "12", "--seed", "1"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = write(d, "c.yml", SMALL);

    let out = bin(&["run", "--config", &cfg, "--seed", "3"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = d.join("results/cli");
    for f in ["results.csv", "summary.json"] {
        assert!(results.join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(results.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pipelines"]["AR+LDA"].as_array().unwrap().len(), 1);
    assert_eq!(summary["status"], "completed");

    // a single-session bundle cannot serve the multi-session scheme
    let out = bin(&["run", "--config", &cfg, "--output", "multi", "--evaluation", "multi"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(d.join("multi/results.csv").is_file());
}
