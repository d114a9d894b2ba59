use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emhd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emhd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EMHD_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--set", "numerics.n=3", "--set", "numerics.dt=0.001", "--set", "numerics.t_final=0.01"];

#[test]
fn run_writes_diagnostics_and_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "-o", "a"];
    args.extend_from_slice(SMALL);
    let o = emhd(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("a");
    let lines = fs::read_to_string(out.join("diagnostics.ndjson")).unwrap();
    assert!(lines.lines().count() >= 2);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["step"], 0);
    assert!(first["hs"].as_f64().unwrap() > 0.0);
    assert!(fs::read_to_string(out.join("config.toml")).unwrap().contains("[numerics]"));

    let o = emhd(&["inspect", "a/final.ckpt"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("t = 0.01"));

    // the same path twice gives the same bytes
    let mut again = vec!["run", "-o", "b"];
    again.extend_from_slice(SMALL);
    assert!(emhd(&again, dir.path()).status.success());
    assert_eq!(fs::read(out.join("diagnostics.ndjson")).unwrap(), fs::read(dir.path().join("b/diagnostics.ndjson")).unwrap());
}

#[test]
fn config_file_and_environment_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.toml"),
        "[numerics]\nn = 3\ndt = 0.002\nt_final = 0.01\n[initial]\nfamily = \"beltrami\"\namplitude = 0.1\n[output]\ndir = \"from_file\"\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_emhd"))
        .args(["run", "-c", "cfg.toml"])
        .current_dir(dir.path())
        .env("EMHD_OUTPUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from_env/diagnostics.ndjson").exists());
    assert!(!dir.path().join("from_file").exists());
    let written = fs::read_to_string(dir.path().join("from_env/config.toml")).unwrap();
    assert!(written.contains("family = \"beltrami\""));
}

#[test]
fn invalid_configuration_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = emhd(&["run", "--set", "model.alpha=3", "--set", "noise.bogus=1", "--set", "numerics.dt=-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for key in ["model.alpha", "(1, 2]", "noise.bogus", "numerics.dt"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}

#[test]
fn ensemble_writes_paths_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["ensemble", "-o", "e", "--paths", "3", "--workers", "2"];
    args.extend_from_slice(SMALL);
    let o = emhd(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let e = dir.path().join("e");
    for id in 0..3 {
        assert!(e.join(format!("paths/path_{id:05}.ndjson")).exists());
    }
    let agg: serde_json::Value = serde_json::from_str(&fs::read_to_string(e.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["paths"], 3);
    assert!(agg.get("wall_time_s").is_none());
}

#[test]
fn verify_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = emhd(&["verify", "identities", "-o", "v"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = fs::read_to_string(dir.path().join("v/verification.ndjson")).unwrap();
    let reports: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r["pass"] == true));

    let o = emhd(&["verify", "identities", "--inject-ablation", "-o", "f"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));

    // ablations are expected to fail, which is not an error
    let o = emhd(&["verify", "ablations", "-o", "g"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));

    assert_eq!(emhd(&["verify"], dir.path()).status.code(), Some(2));
    assert_eq!(emhd(&["verify", "nonsense"], dir.path()).status.code(), Some(2));
}

#[test]
fn thresholds_file_changes_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("th.toml"), "identity = 1e-30\ntransport_skew = 1e-30\n").unwrap();
    let o = emhd(&["verify", "identities", "--thresholds", "th.toml", "-o", "v"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    fs::write(dir.path().join("bad.toml"), "no_such_tolerance = 1\n").unwrap();
    let o = emhd(&["verify", "identities", "--thresholds", "bad.toml", "-o", "v"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn self_test_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = emhd(&["self-test"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("PASS"));
}
