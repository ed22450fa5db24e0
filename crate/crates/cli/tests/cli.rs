//! End-to-end checks of the binary: exit codes, artifacts, determinism.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quadcurl"))
}

#[test]
fn invalid_gradient_order_is_usage_error() {
    let out = bin()
        .args(["converge", "--k", "1", "--l", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = bin().args(["solve", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_complex_n1_passes() {
    let dir = std::env::temp_dir().join("quadcurl-test-vc");
    let out = bin()
        .args([
            "verify-complex",
            "--n",
            "1",
            "--k",
            "1",
            "--l",
            "0",
            "--levels",
            "2",
            "--perturb",
            "0",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("ranks: B=1 D=35"));
    assert!(dir.join("complex_k1_l0.csv").exists());
}

#[test]
fn converge_csv_is_byte_identical_under_same_seed() {
    let d1 = std::env::temp_dir().join("quadcurl-test-c1");
    let d2 = std::env::temp_dir().join("quadcurl-test-c2");
    for d in [&d1, &d2] {
        let out = bin()
            .args([
                "converge", "--k", "1", "--l", "0", "--levels", "2", "--seed", "42", "--out",
            ])
            .arg(d)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read(d1.join("converge_k1_l0.csv")).unwrap();
    let b = std::fs::read(d2.join("converge_k1_l0.csv")).unwrap();
    assert_eq!(a, b, "CSV output must be byte-identical for equal configs");
    // header + 2 data rows + 1 order row
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("level,h,dofs_u,dofs_lambda,dofs_phi,err_sigma"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = std::env::temp_dir().join("quadcurl-test-cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "n=1\nk=1\nl=0\nlevels=2\nperturb=0\n").unwrap();
    // config says n=1; the flag overrides levels down to 1 (cheap run)
    let out = bin()
        .args(["verify-complex", "--levels", "1", "--out"])
        .arg(&dir)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("Sigma=36"), "config n=1 not honored: {stdout}");
}

#[test]
fn solve_on_tiny_mesh_passes_checks() {
    let dir = std::env::temp_dir().join("quadcurl-test-solve");
    let out = bin()
        .args([
            "solve", "--n", "1", "--k", "1", "--l", "0", "--perturb", "0", "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(dir.join("solve_report.txt").exists());
}
