use std::path::Path;
use std::process::{Command, Output};

fn ebm(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebm")).args(args).env("EBM_OUT", out_root).output().expect("spawn ebm")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_RUN: &str = "experiment = gaussian_recovery\nestimator = sm\n";

#[test]
fn list_names_every_experiment_and_estimator() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ebm(&["list"], tmp.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["gaussian_recovery", "mode_weight", "ssm_nce_equiv", "dsm_cv", "pcd", "gradient_oracle"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn same_seed_gives_byte_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.conf", SMALL_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = ebm(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["run.csv", "summary.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,value,tolerance,flag\n"));
    assert!(!summary.contains('\r'));
}

#[test]
fn seed_flag_changes_output_and_default_dir_uses_ebm_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.conf", SMALL_RUN);
    for seed in ["7", "8"] {
        let o = ebm(&["run", "--config", &cfg, "--seed", seed], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(tmp.path().join("gaussian_recovery-sm-seed7/run.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("gaussian_recovery-sm-seed8/run.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn unknown_experiment_is_a_config_error_listing_choices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", "experiment = teleport\n");
    let o = ebm(&["run", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("gaussian_recovery") && err.contains("de_bruijn"), "{err}");
}

#[test]
fn config_errors_exit_2_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", "experiment = gaussian_recovery\nestimator.sigma = -1\n");
    let o = ebm(&["run", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 2") && err.contains("estimator.sigma"), "{err}");

    let cfg =
        write_config(tmp.path(), "mismatch.conf", "experiment = gaussian_recovery\nfamily = poly\ndata.dim = 2\n");
    let o = ebm(&["run", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!tmp.path().join("gaussian_recovery-sm-seed7").exists(), "no output before validation");

    let missing = tmp.path().join("nope.conf");
    let o = ebm(&["run", "--config", missing.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ebm(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(ebm(&["run"], tmp.path()).status.code(), Some(2));
    assert_eq!(ebm(&["check", "--filter", "no_such_group"], tmp.path()).status.code(), Some(2));
}

#[test]
fn filtered_check_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ebm(&["check", "--filter", "de_bruijn"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(tmp.path().join("check/report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("property,value,tolerance,flag"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.starts_with("de_bruijn.") && r.ends_with(",pass")), "{rows:?}");
}

#[test]
fn flipped_sign_fails_the_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("flip");
    let o = ebm(&["check", "--filter", "fisher_sign", "--flip-sm-sign", "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("fisher_sign.sm_grad_max_z") && report.contains(",fail"));
}
