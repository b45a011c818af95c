use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rmt-eth-lab"));
    cmd.args(args).env_remove("RMT_ETH_LAB_THREADS");
    if let Some(t) = threads {
        cmd.env("RMT_ETH_LAB_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn semicircle_density_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("semicircle.json");
    std::fs::write(&cfg, r#"{"version": 1, "deformation": {"kind": "zero"}, "N_list": [128]}"#).unwrap();
    let out = dir.path().join("out");
    let o = lab(&["run", "mde", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let (header, rows) = read_csv(&out.join("density.csv"));
    assert_eq!(header, ["e", "rho", "cumulative"]);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    let k = pts.iter().position(|p| p.0 >= 0.0).unwrap();
    let ((e0, r0), (e1, r1)) = (pts[k - 1], pts[k]);
    let rho0 = r0 + (r1 - r0) * (0.0 - e0) / (e1 - e0);
    assert!((rho0 - std::f64::consts::FRAC_1_PI).abs() < 1e-4, "rho(0) = {rho0}");

    let (qh, q) = read_csv(&out.join("quantiles.csv"));
    assert_eq!(qh, ["i", "gamma"]);
    assert_eq!(q.len(), 128);
    assert_eq!(q[0][0], "1");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(Path::new(f.as_str().unwrap()).exists(), "{f}");
    }
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_config_names_the_path() {
    let o = lab(&["run", "clt", "--config", "missing.json", "--dry-run"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
}

#[test]
fn equipartition_covariance_for_equal_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lab(&["run", "equipartition", "--set", "p=[1,1]", "--set", "N_list=[256]", "--out", out], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("covariance.csv"));
    assert_eq!(header, ["l", "m", "empirical", "predicted"]);
    let row = rows.iter().find(|r| r[0] == "1" && r[1] == "2").unwrap();
    assert_eq!(row[3].parse::<f64>().unwrap(), -0.5);
    let (eh, _) = read_csv(&dir.path().join("equipartition.csv"));
    assert_eq!(eh, ["sample", "index", "l", "x_l", "lambda_i"]);
}

#[test]
fn csv_bodies_do_not_depend_on_thread_count() {
    let sets = ["--set", "N_list=[32,64]", "--set", "samples=6"];
    let mut bodies = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["run", "eth", "--out", dir.path().to_str().unwrap()];
        args.extend(sets);
        let o = lab(&args, Some(threads));
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["threads"].as_u64().unwrap().to_string(), threads);
        bodies.push(std::fs::read(dir.path().join("eth.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let header = String::from_utf8_lossy(&bodies[0]).lines().next().unwrap().to_string();
    assert_eq!(header, "sample,N,max_stat");
}

#[test]
fn unknown_keys_are_listed() {
    let o = lab(&["run", "eth", "--set", "sampels=3", "--set", "dbm.dt=1", "--dry-run"], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("sampels") && err.contains("dbm.dt"), "{err}");
}

#[test]
fn invalid_range_names_the_field() {
    let o = lab(&["run", "eth", "--set", "kappa=2", "--dry-run"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kappa"), "{}", stderr(&o));
}

fn dry_run_hash(config: &Path) -> String {
    let o = lab(&["run", "all", "--config", config.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    plan["config_hash"].as_str().unwrap().to_string()
}

#[test]
fn config_hash_ignores_key_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, r#"{"seed": 7, "samples": 10, "dbm": {"N": 16, "T": 0.1}}"#).unwrap();
    std::fs::write(&b, r#"{"dbm": {"T": 0.1, "N": 16}, "samples": 10, "seed": 7}"#).unwrap();
    assert_eq!(dry_run_hash(&a), dry_run_hash(&b));
    std::fs::write(&b, r#"{"seed": 8, "samples": 10, "dbm": {"N": 16, "T": 0.1}}"#).unwrap();
    assert_ne!(dry_run_hash(&a), dry_run_hash(&b));
}

#[test]
fn dry_run_writes_nothing_and_echoes_a_reparsable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = lab(&["run", "all", "--set", "seed=3", "--out", out.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.exists());
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["experiments"].as_array().unwrap().len(), 6);
    let echoed = dir.path().join("echo.json");
    std::fs::write(&echoed, plan["config"].to_string()).unwrap();
    assert_eq!(dry_run_hash(&echoed), plan["config_hash"].as_str().unwrap());
}

#[test]
fn runtime_domain_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        &["run", "locallaw", "--set", "locallaw.energy=5", "--set", "N_list=[32]", "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(lab(&["run", "bogus"], None).status.code(), Some(2));
    assert_eq!(lab(&["run", "eth", "--threads", "0", "--dry-run"], None).status.code(), Some(2));
}
