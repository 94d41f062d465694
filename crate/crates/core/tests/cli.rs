use std::path::Path;
use std::process::{Command, Output};

fn frac_ocp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frac-ocp"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = frac_ocp(dir.path(), &["solve"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 16\n");
    for bad in ["s=0.2", "alpha=-1", "nonsense=1", "n=zero", "method=bfgs", "z_lo=3"] {
        let out = frac_ocp(dir.path(), &["solve", "--config", &cfg, "--set", bad, "--set", "z_hi=1"]);
        assert_eq!(out.status.code(), Some(2), "{bad}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = frac_ocp(dir.path(), &["frobnicate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "# small run\nn = 32\ns = 0.5\ngamma = 100\nz_lo = 0\nz_hi = 10\n");
    let run = |name: &str| {
        let out = frac_ocp(dir.path(), &["solve", "--config", &cfg, "--out", name]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(dir.path().join(name)).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    assert!(a.starts_with("x,u_d,u,xi,mult\n"));
    assert_eq!(a.lines().count(), 1 + 33);
    let control = std::fs::read_to_string(dir.path().join("a_control.csv")).unwrap();
    assert!(control.starts_with("x_left,x_right,z\n"));
    assert_eq!(control.lines().count(), 1 + 32);
}

#[test]
fn gamma_sweep_rows_follow_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 32\ngamma0 = 1\nfactor = 10\ncount = 4\nz_lo = 0\nz_hi = 10\n");
    let out = frac_ocp(dir.path(), &["gamma-sweep", "--config", &cfg, "--out", "g.csv", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "gamma,J,Jgamma,viol_l2,viol_sup,mult_l1,dz_l2,kkt,iters");
    assert_eq!(lines.len(), 5);
    let gammas: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(gammas, vec![1.0, 10.0, 100.0, 1000.0]);
    assert_eq!(lines[1].split(',').nth(6), Some("nan"));
}

#[test]
fn iteration_limit_gives_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 32\ngamma = 1e4\nmethod = pg\nmax_iter = 2\n");
    let out = frac_ocp(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged = false"));
}

#[test]
fn dump_matrices_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 8\ngamma = 10\n");
    let out = frac_ocp(dir.path(), &["solve", "--config", &cfg, "--out", "r.csv", "--dump-matrices"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|f| f.starts_with("r_n8"))
        .collect();
    assert!(files.len() >= 3, "{files:?}");
}

#[test]
fn validate_with_fault_injection_fails_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "");
    let out = frac_ocp(dir.path(), &["validate", "--config", &cfg, "--set", "fault_injection=true"]);
    assert_eq!(out.status.code(), Some(3));
    let report = String::from_utf8_lossy(&out.stdout);
    let failed: Vec<serde_json::Value> = report
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .filter(|v: &serde_json::Value| v["passed"] == false)
        .collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|v| v["check"] == "assembly_oracle"));
}

#[test]
fn precision_controls_csv_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 8\ngamma = 10\nprecision = 4\n");
    let out = frac_ocp(dir.path(), &["solve", "--config", &cfg, "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap().split(',').next(), Some("-5.0000e-1"));
    let out = frac_ocp(dir.path(), &["solve", "--config", &cfg, "--set", "precision=40"]);
    assert_eq!(out.status.code(), Some(2));
}
