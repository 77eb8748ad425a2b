use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfbm-lab"))
}

#[test]
fn identity_suite_writes_outputs_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ids");
    let status = bin()
        .args(["identity-suite", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("replicate,seed,check,value,tolerance,pass\n"));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed: 20240611"));
    assert!(manifest.contains("config_sha256: "));
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("PASS gradient"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# small run\nreplicates = 40\nhorizon = 4\n").unwrap();
    let out = dir.path().join("sim");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "5", "--", "--dt", "0.5"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    // Forty replicates of nine points each plus the header.
    assert_eq!(csv.lines().count(), 1 + 40 * 9);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed: 5"));
    assert!(manifest.contains("dt=0.5"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        bin()
            .arg("simulate")
            .arg("--out")
            .arg(dir.path().join("x"))
            .args(extra)
            .output()
            .unwrap()
    };
    for bad in [
        &["--", "--no.such.key", "1"][..],
        &["--", "--theta.hurst", "0.6"][..],
        &["--", "--eps_grid", "0.1,0.2,0.2"][..],
        &["--", "--replicates"][..],
    ] {
        let out = run(bad);
        assert_eq!(out.status.code(), Some(2), "{bad:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let missing = bin().args(["simulate", "--config", "/nonexistent/cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unknown_experiment_is_rejected() {
    let out = bin().arg("no-such-experiment").output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}
