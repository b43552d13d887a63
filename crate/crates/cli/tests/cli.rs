use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rio")).args(args).output().expect("spawn rio")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn simulated(dir: &Path) -> String {
    let seq = dir.join("seq");
    let out = rio(&["simulate", "--duration", "3", "--noise-profile", "low", "--seed", "2", "--out", path(&seq)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path(&seq).to_string()
}

#[test]
fn simulate_run_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let seq = simulated(dir.path());
    for f in ["meta.txt", "imu.csv", "gt.csv", "labels.csv"] {
        assert!(Path::new(&seq).join(f).exists(), "{f}");
    }
    let traj = dir.path().join("traj.tum");
    let report = dir.path().join("report.csv");
    let out = rio(&["run", "--seq", &seq, "--out", path(&traj), "--report", path(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ape_trans_rmse="));
    assert_eq!(fs::read_to_string(&traj).unwrap().lines().count(), 31);
    let summary = fs::read_to_string(dir.path().join("report.csv.summary")).unwrap();
    assert!(summary.contains("w_d") && summary.contains("mean_static"));

    let gt = Path::new(&seq).join("gt.csv");
    let out = rio(&["eval", "--est", path(&traj), "--gt", path(&gt)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ape_trans_rmse,ape_rot_rmse_deg,rpe_trans_rmse,rpe_rot_rmse_deg"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn ablate_writes_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let seq = simulated(dir.path());
    let table = dir.path().join("ablation.csv");
    let out = rio(&["ablate", "--seq", &seq, "--out", path(&table)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 7);
    assert!(rows[0].starts_with("variant,ape_trans_rmse"));
    assert!(rows[1].starts_with("full,"));
    assert!(rows[2].starts_with("w/o imu_residual,"));
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let traj = dir.path().join("t.tum");
    let out = rio(&["run", "--seq", path(&missing), "--out", path(&traj)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let seq = simulated(dir.path());
    for extra in [["--set", "w_d=-1"], ["--set", "bogus=1"], ["--disable", "gps"]] {
        let mut args = vec!["run", "--seq", &seq, "--out", path(&traj)];
        args.extend(extra);
        assert_eq!(rio(&args).status.code(), Some(2), "{extra:?}");
    }
}
