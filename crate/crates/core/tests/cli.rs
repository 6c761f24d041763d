use std::path::Path;
use std::process::{Command, Output};

fn rfimpute(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfimpute"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RFIMPUTE_WORKERS", "2")
        .output()
        .unwrap()
}

fn manifest(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join(format!("{name}_manifest.json"))).unwrap()).unwrap()
}

const SMALL_SGD: &[&str] = &["sgd-sweep", "--p", "12", "--d", "3", "--n-grid", "50,500", "--replicates", "4"];

#[test]
fn help_and_unknown_command() {
    let out = Command::new(env!("CARGO_BIN_EXE_rfimpute")).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["figure1", "sgd-sweep", "mnar", "validate"] {
        assert!(text.contains(cmd), "{text}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_rfimpute")).arg("plot").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collision_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rfimpute(SMALL_SGD, dir.path()).status.code(), Some(0));
    let again = rfimpute(SMALL_SGD, dir.path());
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    let mut forced = SMALL_SGD.to_vec();
    forced.push("--force");
    assert_eq!(rfimpute(&forced, dir.path()).status.code(), Some(0));
}

#[test]
fn config_file_and_flag_precedence_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rho": 0.5, "p": 12, "d": 3, "n_grid": [50], "replicates": 3}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = rfimpute(&["sgd-sweep", "--config", cfg.to_str().unwrap(), "--rho", "0.6"], &out_dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir, "sgd_sweep");
    assert_eq!(m["settings"]["rho"]["value"], 0.6);
    assert_eq!(m["settings"]["rho"]["source"], "flag");
    assert_eq!(m["settings"]["p"]["source"], "file");
    assert_eq!(m["settings"]["kappa"]["source"], "default");
    assert_eq!(m["workers"], 2);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn gamma_multiplier_is_applied_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_SGD.to_vec();
    args.extend(["--gamma-mult", "0.25"]);
    assert_eq!(rfimpute(&args, dir.path()).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("sgd_sweep.csv")).unwrap();
    let gamma: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((gamma - 0.25 / 3.0).abs() < 1e-15);
    let m = manifest(dir.path(), "sgd_sweep");
    assert_eq!(m["settings"]["gamma_mult"]["value"], 0.25);
    assert_eq!(m["settings"]["gamma_mult"]["source"], "flag");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfimpute(&["sgd-sweep", "--n-grid", ""], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"rho": "high"}"#).unwrap();
    let out = rfimpute(&["figure1", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid config"));
    let out = rfimpute(&["figure1", "--rho", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_rfimpute"))
        .args(["validate", "--out"])
        .arg(dir.path())
        .env("RFIMPUTE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("validate.json").exists());
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = rfimpute(SMALL_SGD, &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn perturbed_validation_fails_that_check_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfimpute(&["validate", "--perturb", "pinv_frobenius_moment"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("validate.json")).unwrap()).unwrap();
    for check in report["checks"].as_array().unwrap() {
        let expected = check["name"] != "pinv_frobenius_moment";
        assert_eq!(check["pass"], expected, "{check}");
        assert!(check["replicates"].as_u64().unwrap() > 0);
    }
    assert_eq!(report["seed"], 20_240_501);
}

#[test]
fn json_emit_format_and_mnar_trend() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "mnar", "--p", "4", "--d-grid", "8,32", "--replicates", "2", "--n-train", "4000", "--n-test", "500", "--emit-format",
        "json",
    ];
    assert_eq!(rfimpute(&args, dir.path()).status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("mnar.json")).unwrap()).unwrap();
    assert_eq!(rows[1]["d"], 32);
    assert!(rows[1]["risk_imp_mc"].as_f64().unwrap() > 0.0);
    let m = manifest(dir.path(), "mnar");
    assert!(m["summary"]["trend"]["decreasing"].is_boolean());
}

#[test]
fn figure1_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfimpute(&["figure1", "--p", "6", "--d-grid", "2,4,6,12", "--replicates", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read_to_string(dir.path().join("figure1_panel_a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("figure1_panel_b.csv")).unwrap();
    let header = a.lines().next().unwrap();
    for col in [
        "d",
        "risk_complete_mc",
        "risk_complete_exact",
        "risk_miss_mc",
        "risk_miss_exact",
        "risk_imp_mc",
        "risk_imp_upper_bound",
        "risk_imp_stderr",
    ] {
        assert!(header.split(',').any(|h| h == col), "missing {col}");
    }
    assert_eq!(a.lines().count(), 3);
    assert_eq!(b.lines().count(), 5);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("complete_risk_matches_closed_form"));
}
