//! End-to-end behaviour of the `qvl` binary.

use std::path::Path;
use std::process::{Command, Output};

use qvl::commands::{FIDELITY_SCHEMA, FIDELITY_SUMMARY_SCHEMA, TRAIN_SUMMARY_SCHEMA};
use qvl::output::CsvRows;

fn qvl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qvl")).args(args).env_remove("QVL_WORKERS").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = qvl(args);
    assert!(out.status.success(), "qvl {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    out
}

fn config(models: &str, p: &str, f: &str, rounds: &str, extra: &str) -> String {
    format!(
        r#"[grid]
models = {models}
p_phys = {p}
f_anc = {f}
rounds = {rounds}
include_bare = true

[noise]
seed = 3
injection_period = 4
noisy_preparation = false
noisy_extraction = false

[train]
seeds = 2
iterations = 100
batch_size = 8
learning_rate = 0.5
fd_step = 0.1
theta_init = "uniform"

[fidelity]
theta = 4.71238898038469
shots = 4000
{extra}"#
    )
}

fn write(dir: &Path, text: &str) -> String {
    let path = dir.join("config.in.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn noiseless_training_reaches_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), &config(r#"["none"]"#, "[0.0]", "[0.0]", "[0, 2]", "[shots]\nshots = 200\n"));
    let out = dir.path().join("out");
    ok(&["--config", &cfg, "--out", out.to_str().unwrap(), "train"]);
    let rows = CsvRows::read(&out.join("train_summary.csv"), TRAIN_SUMMARY_SCHEMA).unwrap();
    assert_eq!(rows.rows.len(), 3);
    for r in &rows.rows {
        assert_eq!(rows.get(r, "status").unwrap(), "ok");
        assert_eq!(rows.parse::<f64>(r, "mean_final_accuracy").unwrap(), 1.0);
        assert_eq!(rows.parse::<f64>(r, "std_final_accuracy").unwrap(), 0.0);
    }
    // Two seeds of 100 iterations per point.
    let detail = std::fs::read_to_string(out.join("train/none_p0_f0_r2.csv")).unwrap();
    assert_eq!(detail.lines().count(), 2 + 200);
}

#[test]
fn noiseless_fidelity_is_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), &config(r#"["gate"]"#, "[0.0]", "[1.0]", "[1]", ""));
    let out = dir.path().join("out");
    ok(&["--config", &cfg, "--out", out.to_str().unwrap(), "fidelity"]);
    for id in ["gate_p0_f1_bare", "gate_p0_f1_r1"] {
        let rows = CsvRows::read(&out.join(format!("fidelity/{id}.csv")), FIDELITY_SCHEMA).unwrap();
        assert_eq!(rows.rows.len(), 4000);
        for r in &rows.rows {
            assert_eq!(rows.get(r, "F_phys").unwrap(), "1");
            assert_eq!(rows.get(r, "F_full").unwrap(), "1");
            assert_eq!(rows.get(r, "accepted").unwrap(), "true");
        }
    }
    let summary = CsvRows::read(&out.join("fidelity_summary.csv"), FIDELITY_SUMMARY_SCHEMA).unwrap();
    let logical = &summary.rows[1];
    assert_eq!(summary.get(logical, "F_anc_above_098").unwrap(), "1");
    assert_eq!(summary.get(&summary.rows[0], "F_anc_mean").unwrap(), "");
    let hist = std::fs::read_to_string(out.join("fidelity_histograms.csv")).unwrap();
    // 50 bins for full and physical on both points, plus ancilla on one.
    assert_eq!(hist.lines().count(), 2 + 5 * 50);
}

#[test]
fn failing_points_do_not_abort_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    // At p = 0.4 almost every encoded execution is flagged, so a single
    // allowed rerun runs out while the bare circuit is unaffected.
    let shots = "[shots]\nshots = 20\nmax_reruns = 1\n";
    let text = config(r#"["gate"]"#, "[0.4]", "[1.0]", "[3]", shots).replace("iterations = 100", "iterations = 3");
    let cfg = write(dir.path(), &text);
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let run = qvl(&["--config", &cfg, "--out", o, "train"]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("1 grid point(s) failed"));
    let rows = CsvRows::read(&out.join("train_summary.csv"), TRAIN_SUMMARY_SCHEMA).unwrap();
    assert_eq!(rows.get(&rows.rows[0], "status").unwrap(), "ok");
    assert!(rows.get(&rows.rows[1], "status").unwrap().starts_with("failed"));
    assert_eq!(rows.get(&rows.rows[1], "mean_final_accuracy").unwrap(), "");
    assert!(out.join("train/gate_p0.4_f1_bare.csv").exists());
    assert!(!out.join("train/gate_p0.4_f1_r3.csv").exists());
    let meta = std::fs::read_to_string(out.join("run-train.json")).unwrap();
    assert!(meta.contains("failed"));
}

#[test]
fn bad_configs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let good = config(r#"["gate"]"#, "[0.01]", "[1.0]", "[0]", "");
    for (text, needle) in [
        (good.replace("seed = 3", "seed = 3\nsed = 4"), "sed"),
        (good.replace("injection_period = 4\n", ""), "injection_period"),
        (good.replace("p_phys = [0.01]", "p_phys = [0.01"), "line"),
        (good.replace("rounds = [0]", "rounds = [9]"), "rounds"),
    ] {
        let cfg = write(dir.path(), &text);
        let run = qvl(&["--config", &cfg, "--out", dir.path().join("o").to_str().unwrap(), "train"]);
        assert!(!run.status.success());
        let err = String::from_utf8_lossy(&run.stderr);
        assert!(err.contains(needle), "{err}");
    }
    let run = qvl(&["--out", dir.path().join("o").to_str().unwrap(), "train"]);
    assert!(String::from_utf8_lossy(&run.stderr).contains("--config"));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let run = qvl(&["--preset", "desk", "--out", blocker.join("out").to_str().unwrap(), "train"]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("output directory"));
}

#[test]
fn snapshot_reproduces_an_offset_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(r#"["environmental"]"#, "[0.01]", "[0.5]", "[1]", "[shots]\nshots = 30\n")
        .replace("iterations = 100", "iterations = 5")
        .replace("shots = 4000", "shots = 40");
    let cfg = write(dir.path(), &text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for cmd in ["train", "fidelity"] {
        ok(&["--config", &cfg, "--out", a.to_str().unwrap(), "--seed-offset", "7", cmd]);
    }
    let snapshot = a.join("config.toml");
    for cmd in ["train", "fidelity"] {
        ok(&["--config", snapshot.to_str().unwrap(), "--out", b.to_str().unwrap(), cmd]);
    }
    for f in ["train_summary.csv", "fidelity_summary.csv", "train/environmental_p0.01_f0.5_r1.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // Without the offset the seeds differ.
    let c = dir.path().join("c");
    ok(&["--config", &cfg, "--out", c.to_str().unwrap(), "train"]);
    assert_ne!(
        std::fs::read(a.join("train_summary.csv")).unwrap(),
        std::fs::read(c.join("train_summary.csv")).unwrap()
    );
}

#[test]
fn inspect_reads_program_files() {
    let built = String::from_utf8(ok(&["inspect", "--bare", "--input", "11", "--theta", "-0.5"]).stdout).unwrap();
    assert!(built.starts_with("qubits: 2\n"));
    let program = &built[built.find("# qvl-circuit").unwrap()..];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    std::fs::write(&path, program).unwrap();
    let read = String::from_utf8(ok(&["inspect", "--program", path.to_str().unwrap()]).stdout).unwrap();
    assert_eq!(read, built);

    std::fs::write(&path, "# qvl-circuit v1\nnonsense\n").unwrap();
    let run = qvl(&["inspect", "--program", path.to_str().unwrap()]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("line"));
}

#[test]
fn threshold_without_a_sweep_fails() {
    let dir = tempfile::tempdir().unwrap();
    let run = qvl(&["--out", dir.path().to_str().unwrap(), "threshold", "--sweep", dir.path().to_str().unwrap()]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("train_summary.csv"));
}
