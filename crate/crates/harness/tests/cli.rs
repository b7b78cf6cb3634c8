use std::fs;
use std::process::Command;

fn plwk(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_plwk"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn list_problems_names_both_builtins() {
    let out = plwk(&["list-problems"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("linear_blocks"));
    assert!(text.contains("elliptic"));
    assert!(text.contains("grid_size = 31"));
}

#[test]
fn exit_codes() {
    assert_eq!(plwk(&["run", "--problem", "linear_blocks", "--tau", "1.5"]).status.code(), Some(1));
    assert_eq!(plwk(&["run", "--problem", "nope"]).status.code(), Some(1));
    assert_eq!(plwk(&["sweep", "--problem", "linear_blocks", "--noise-percent", "1,2"]).status.code(), Some(1));
    assert_eq!(
        plwk(&["check", "--problem", "linear_blocks"]).status.code(),
        Some(0)
    );
    // The cone condition cannot hold with eta = 0 on a nonlinear problem.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, "[elliptic]\ngrid_size = 15\n").unwrap();
    let out = plwk(&["check", "--config", cfg.to_str().unwrap(), "--eta", "0", "--tau", "1.5"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn run_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = plwk(&[
        "run",
        "--problem",
        "linear_blocks",
        "--method",
        "PLWKr",
        "--noise-percent",
        "1",
        "--seed",
        "4",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("PLWKr_noise1.csv")).unwrap();
    assert!(csv.starts_with("cycle,error_ref,residual_sum,residual_max,skipped_steps,cum_pde_solves\n"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["spec"]["seed"], 4);
    assert_eq!(meta["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn empty_file_method_list_falls_back_to_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out_dir = dir.path().join("out");
    fs::write(
        &cfg,
        format!("problem = \"linear_blocks\"\nmethod = []\nout_dir = {:?}\n", out_dir.to_str().unwrap()),
    )
    .unwrap();
    // An empty list in the file falls back to the default method.
    let out = plwk(&["compare", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out_dir.join("LWKls_noise2.csv").exists());
}

