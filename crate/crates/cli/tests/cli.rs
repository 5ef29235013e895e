use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
[model]
kind = "heisenberg"
N = 6
J = 1.0
h = 0.3

[sampler]
chi = 8
E = -1.5
iterations = 10
samples = 6
record_every = 5
checkpoints = [1, 5, 10]

[run]
seed = 7
threads = 1
"#;

fn rmps(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rmps"));
    cmd.args(args)
        .env_remove("RMPS_SEED")
        .env_remove("RMPS_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn run_json(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("run.json")).unwrap()).unwrap()
}

#[test]
fn sample_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("out");
    std::fs::create_dir(&out_dir).unwrap();
    let out = rmps(
        &[
            "sample",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--corr",
            "1..2",
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "trace.csv",
        "histogram.csv",
        "fits.csv",
        "corr.csv",
        "run.json",
    ] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 6);
}

#[test]
fn histogram_refit_reproduces_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir(&a).unwrap();
    std::fs::create_dir(&b).unwrap();
    let out = rmps(
        &[
            "sample",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            a.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    let out = rmps(
        &[
            "histogram",
            "--input",
            a.join("histogram.csv").to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(a.join("fits.csv")).unwrap(),
        std::fs::read(b.join("fits.csv")).unwrap()
    );
    let missing = rmps(&["histogram", "--input", "/nonexistent/histogram.csv"], &[]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn sweep_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("samples = 6", "samples = 3"));
    let out = rmps(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--h-grid",
            "0:1:0.5",
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 3);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let d = dir.path().join(format!("t{threads}"));
        std::fs::create_dir(&d).unwrap();
        let out = rmps(
            &[
                "sample",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                d.to_str().unwrap(),
                "--threads",
                threads,
            ],
            &[],
        );
        assert_eq!(code(&out), 0);
        outputs.push(d);
    }
    for name in ["trace.csv", "histogram.csv", "fits.csv"] {
        assert_eq!(
            std::fs::read(outputs[0].join(name)).unwrap(),
            std::fs::read(outputs[1].join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn seed_precedence_flag_env_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("samples = 6", "samples = 1"));
    let seed_of = |args: &[&str], envs: &[(&str, &str)]| {
        let d = tempfile::tempdir_in(dir.path()).unwrap();
        let mut all = vec!["sample", "--config", cfg.to_str().unwrap(), "--out"];
        all.push(d.path().to_str().unwrap());
        all.extend_from_slice(args);
        let out = rmps(&all, envs);
        assert_eq!(code(&out), 0);
        run_json(d.path())["config"]["master_seed"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(seed_of(&[], &[]), 7);
    assert_eq!(seed_of(&[], &[("RMPS_SEED", "21")]), 21);
    assert_eq!(seed_of(&["--seed", "33"], &[("RMPS_SEED", "21")]), 33);
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        CONFIG.replace("E = -1.5", "E = -1.5\nu = -0.25"),
        CONFIG.replace("E = -1.5", "E = -1.5\nsigma = -1.0"),
        CONFIG.replace("N = 6", "N = 1"),
        CONFIG.replace("chi = 8", "chi = 8\nbogus = 1"),
        CONFIG.replace("kind = \"heisenberg\"", "kind = \"potts\""),
    ];
    for text in cases {
        let cfg = write_config(dir.path(), &text);
        let out = rmps(
            &[
                "sample",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.path().to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code(&out), 2, "{text}");
        assert!(!out.stderr.is_empty());
    }
    let cfg = write_config(dir.path(), CONFIG);
    let bad_grid = rmps(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--h-grid",
            "1:0:0.1",
        ],
        &[],
    );
    assert_eq!(code(&bad_grid), 2);
    let missing = rmps(&["sample", "--config", "/nonexistent.toml"], &[]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn verify_rejects_large_chains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("N = 6", "N = 20"));
    let out = rmps(
        &[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("12"));
}

#[test]
fn verify_small_chain_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG
            .replace("samples = 6", "samples = 16")
            .replace("iterations = 10", "iterations = 20")
            .replace("checkpoints = [1, 5, 10]", "checkpoints = [1, 10, 20]"),
    );
    let out = rmps(
        &[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(dir.path().join("verify.json").is_file());
}
