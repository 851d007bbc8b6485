use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ptrs(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptrs"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn synth_defaults_write_cohort_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptrs(&["synth", "--out", "s"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("s/cohort.csv")).unwrap();
    assert_eq!(csv.lines().count(), 94);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/cohort.sidecar.json")).unwrap()).unwrap();
    assert_eq!(sidecar["n_positive"], 74);
    assert_eq!(sidecar["n_negative"], 19);
}

#[test]
fn seed_override_changes_cohort() {
    let dir = tempfile::tempdir().unwrap();
    for (name, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        assert_eq!(code(&ptrs(&["synth", "--out", name, "--seed", seed], dir.path())), 0);
    }
    let read = |n: &str| fs::read(dir.path().join(n).join("cohort.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[synth]\nprevalence = 1.5\n").unwrap();
    let out = ptrs(&["synth", "--config", "bad.toml", "--out", "s"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ptrs: "));

    fs::write(dir.path().join("typo.toml"), "[protocol]\nfolds = 5\n").unwrap();
    assert_eq!(code(&ptrs(&["run", "--config", "typo.toml", "--out", "r"], dir.path())), 1);
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[input]\npath = \"nowhere.csv\"\n").unwrap();
    let out = ptrs(&["run", "--config", "run.toml", "--out", "r"], dir.path());
    assert_eq!(code(&out), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], false);
}

#[test]
fn run_then_rerender() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ptrs(&["synth", "--out", "data"], dir.path())), 0);
    fs::write(
        dir.path().join("run.toml"),
        "[input]\npath = \"data/cohort.csv\"\n\n[protocol]\nresamples = 200\n\n[run]\nmodels = [\"LR\", \"KNN\"]\n",
    )
    .unwrap();
    let args = |cmd: &'static str| [cmd, "--config", "run.toml", "--out", "bundle"];
    let out = ptrs(&args("run"), dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let table = dir.path().join("bundle/tables/table_F1.tsv");
    let first = fs::read(&table).unwrap();
    fs::remove_file(&table).unwrap();
    assert_eq!(code(&ptrs(&args("tables"), dir.path())), 0);
    assert_eq!(fs::read(&table).unwrap(), first);
    assert_eq!(code(&ptrs(&args("plotdata"), dir.path())), 0);
    assert!(dir.path().join("bundle/plotdata/auc_ci.tsv").exists());
}
