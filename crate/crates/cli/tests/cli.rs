use std::path::Path;
use std::process::{Command, Output};

fn resmin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resmin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn failure_demo_writes_commented_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = resmin(&["failure-demo", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out.join("failure_demo.csv"));
    assert!(rows[0].starts_with("# config_hash="));
    assert!(rows[1].starts_with("n,interior_residual_sq,boundary_norm_sq,loss_tau"));
    assert_eq!(rows.len(), 2 + 6);
    let fit = lines(&out.join("failure_demo_fit.csv"));
    assert_eq!(fit[1], "quantity,value");
    let slope: f64 = fit[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((slope - 0.5).abs() < 0.02);
}

#[test]
fn certify_run_is_reproducible_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "quad_n = 6\nhidden = [8]\n[schedule]\nsteps = 20\ncheckpoint_every = 10\n",
    );
    let mut texts = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(tag);
        let o = resmin(&[
            "certify-run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(std::fs::read(out.join("certified.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let text = String::from_utf8(texts.remove(0)).unwrap();
    let mut it = text.lines();
    assert!(it.next().unwrap().contains("seeds=7"));
    assert_eq!(
        it.next().unwrap(),
        "seed,step,loss,bound,h2_error,h1_error,l2_error"
    );
    let steps: Vec<&str> = it.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(steps, ["0", "10", "20"]);
}

#[test]
fn unknown_config_key_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "quadn = 6\n");
    let o = resmin(&["certify-run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("quadn"));
}

#[test]
fn bound_violation_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "quad_n = 6\nuser_constant = 1e-6\n[schedule]\nsteps = 0\n",
    );
    let out = dir.path().join("out");
    let o = resmin(&[
        "certify-run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("certified.csv").exists());
}

#[test]
fn divergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "quad_n = 6\n[schedule]\nsteps = 20\nlearning_rate = 1e6\n",
    );
    let out = dir.path().join("out");
    let o = resmin(&[
        "certify-run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn wrong_problem_kind_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = \"P1\"\nquad_n = 4\n");
    let out = dir.path().join("out");
    let o = resmin(&[
        "parabolic-run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn fd_check_passes_on_penalty_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "loss = \"penalty\"\nquad_n = 6\nseeds = [0, 1]\nfd_coords = 10\n",
    );
    let out = dir.path().join("out");
    let o = resmin(&[
        "fd-check",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--parallel",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let rows = lines(&out.join("fd_check.csv"));
    assert_eq!(rows.len(), 2 + 20);
    assert!(rows[2].starts_with("0,"));
    assert!(rows[21].starts_with("1,"));
}

#[test]
fn compare_bc_flags_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "quad_n = 6\nhidden = [6]\n[schedule]\nsteps = 10\n",
    );
    let out = dir.path().join("out");
    let o = resmin(&[
        "compare-bc",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out.join("compare_bc.csv"));
    let exact: Vec<&str> = rows[2].split(',').collect();
    let penalty: Vec<&str> = rows[3].split(',').collect();
    assert_eq!(exact[1], "exact_bc");
    assert_eq!(exact[9], "true");
    assert_eq!(exact[6].parse::<f64>().unwrap(), 0.0);
    assert_eq!(penalty[1], "penalty");
    assert_eq!(penalty[8], "unknown_labeled_heuristic");
    assert_eq!(penalty[9], "false");
    assert!(penalty[6].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn sobolev_run_rows_dominate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "quad_n = 6\nhidden = [6]\n[schedule]\nsteps = 20\ncheckpoint_every = 10\n",
    );
    let out = dir.path().join("out");
    let o = resmin(&[
        "sobolev-run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out.join("sobolev.csv"));
    assert_eq!(rows.len(), 2 + 6);
    for r in &rows[2..] {
        let f: Vec<&str> = r.split(',').collect();
        let l2: f64 = f[3].parse().unwrap();
        let h1: f64 = f[4].parse().unwrap();
        assert!(h1 >= l2);
    }
}
