use std::process::Command;

fn roughderiv(args: &[&str], dir: &std::path::Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_roughderiv"))
        .args(args)
        .env("ROUGHDERIV_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn chen_check_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = roughderiv(&["check-chen", "--n", "5", "--grid-level", "4"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.starts_with("PASS check-chen"));
    let csv = std::fs::read_to_string(dir.path().join("chen.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("sample,s,u,t,max_rel_error"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# lift settings\nd = 3\ngrid_level = 3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let (code, plan) = roughderiv(&["lift", "--config", cfg, "--grid-level", "2", "--dry-run"], dir.path());
    assert_eq!(code, 0);
    assert!(plan.contains("d = 3\n") && plan.contains("grid_level = 2\n"), "{plan}");
    let (code, _) = roughderiv(&["lift", "--config", cfg], dir.path());
    assert_eq!(code, 0);
    let path = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert_eq!(path.lines().next(), Some("t,x_1,x_2,x_3"));
    assert_eq!(path.lines().count(), 1 + 9);
}

#[test]
fn usage_and_threshold_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(roughderiv(&["beta-p", "--p", "3"], dir.path()).0, 1);
    assert_eq!(roughderiv(&["check-chen", "--bogus", "1"], dir.path()).0, 1);
    assert_eq!(roughderiv(&["lift", "--grid-level", "15"], dir.path()).0, 1);
    let (code, stdout) = roughderiv(&["w-moment-scan", "--n", "50", "--grid-level", "5"], dir.path());
    assert_eq!(code, 2, "{stdout}");
    assert!(stdout.starts_with("FAIL w-moment-scan"));
    assert!(dir.path().join("results.csv").exists() && dir.path().join("w_moment_scan.svg").exists());
}
