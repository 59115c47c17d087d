use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"
seed = 5
replicates = 2
methods = ["AE", "POT"]
metrics = ["ap", "prec@3"]
test_metrics = []
output_dir = "out"

[dataset]
source = "sine"
n_inliers = 40

[model]
hidden = [8]
latent = 1

[ensemble]
k = 2

[regularization]
l2_lambda = 0.01

[train]
epochs = 5
batch_size = 16
optimizer = { kind = "adam", lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8 }
"#;

fn potatoes(args: &[&str], dir: &Path, workers_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_potatoes"));
    cmd.args(args).current_dir(dir).env_remove("POTATOES_WORKERS");
    if let Some(w) = workers_env {
        cmd.env("POTATOES_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let run = potatoes(&["run", "tiny.toml"], dir.path(), Some("2"));
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stderr(&run).contains("with 2 workers"));
    let out = dir.path().join("out");
    for f in ["report.json", "report.csv", "timings.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let report = potatoes(&["report", "out/report.json"], dir.path(), None);
    assert!(report.status.success(), "{}", stderr(&report));
    assert!(String::from_utf8_lossy(&report.stdout).contains("Mean ap"));

    let box_plot = potatoes(&["report", "out/report.json", "--box-plot", "prec@3"], dir.path(), None);
    assert!(box_plot.status.success(), "{}", stderr(&box_plot));
    assert!(String::from_utf8_lossy(&box_plot.stdout).contains("POT"));
}

#[test]
fn workers_flag_overrides_env() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = potatoes(&["run", "tiny.toml", "--workers", "1", "--out", "elsewhere"], dir.path(), Some("3"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("with 1 workers"));
    assert!(dir.path().join("elsewhere/report.json").is_file());
}

#[test]
fn sine_demo_writes_plot() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = potatoes(&["sine-demo", "tiny.toml"], dir.path(), Some("1"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("top 3"));
    for f in ["sine_demo.svg", "sine_demo.csv", "sine_demo.json"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("bad.toml"), "name = \"x\"\nunknown_key = 1\n").unwrap();
    fs::write(p.join("zero.toml"), TINY.replace("replicates = 2", "replicates = 0")).unwrap();
    fs::write(p.join("tiny.toml"), TINY).unwrap();
    fs::write(p.join("not_a_report.json"), "{\"format\": \"something else\"}").unwrap();

    for args in [
        &["run", "missing.toml"][..],
        &["run", "bad.toml"],
        &["run", "zero.toml"],
        &["sine-demo", "bad.toml"],
        &["report", "not_a_report.json"],
        &["report", "missing.json"],
    ] {
        let o = potatoes(args, p, Some("1"));
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{args:?}");
    }

    let o = potatoes(&["run", "tiny.toml"], p, Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("POTATOES_WORKERS"));
}
