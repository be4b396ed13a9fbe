use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn experiment(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/experiments").join(format!("{name}.toml"))
}

fn nilmix(args: &[&str], config: &Path, out: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nilmix"));
    cmd.args(&args[..1]).arg("--config").arg(config).args(&args[1..]).arg("--out").arg(out);
    cmd.env_remove("NILMIX_SEED").env_remove("NILMIX_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn check_cat_map_reports_golden_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilmix(&["check"], &experiment("cat_map"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("check.json")).unwrap()).unwrap();
    assert_eq!(report["ergodicity"]["ergodic"], true);
    assert_eq!(report["probe_agrees"], true);
    let mut ev: Vec<f64> = report["jordan_blocks"].as_array().unwrap().iter().map(|b| b["eigenvalue"][0].as_f64().unwrap()).collect();
    ev.sort_by(f64::total_cmp);
    let s5 = 5f64.sqrt();
    assert!((ev[0] - (3.0 - s5) / 2.0).abs() < 1e-12);
    assert!((ev[1] - (3.0 + s5) / 2.0).abs() < 1e-12);
}

#[test]
fn check_heisenberg_has_central_e3() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilmix(&["check"], &experiment("heisenberg"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let report = &summary(dir.path())["check"];
    assert_eq!(report["step"], 2);
    assert_eq!(report["lcs_dims"], serde_json::json!([3, 1]));
    let central = report["central_basis"].as_array().unwrap();
    assert_eq!(central.len(), 1);
    let v: Vec<f64> = central[0].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12 && v[2].abs() > 0.5);
}

#[test]
fn non_ergodic_configs_exit_one() {
    for name in ["identity", "filiform"] {
        let dir = tempfile::tempdir().unwrap();
        let o = nilmix(&["check"], &experiment(name), dir.path(), &[]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert_eq!(summary(dir.path())["check"]["ergodicity"]["ergodic"], false);
    }
    let dir = tempfile::tempdir().unwrap();
    let o = nilmix(&["mixing"], &experiment("identity"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ergodic"));
}

#[test]
fn free_two_step_is_ergodic_with_three_unstable_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilmix(&["check"], &experiment("free2step"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let blocks = summary(dir.path())["check"]["jordan_blocks"].as_array().unwrap().clone();
    assert_eq!(blocks.iter().filter(|b| b["class"] == "unstable").count(), 3);
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn invalid_definitions_exit_one_and_bad_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let manifold = root.join("manifolds/heisenberg.toml");
    // the cat map lifted without the 1/2 correction does not preserve the lattice
    write(dir.path(), "bad.toml", "matrix = [[2, 1, 0], [1, 1, 0], [0, 0, 1]]");
    let cfg = write(
        dir.path(),
        "exp.toml",
        &format!("manifold = {:?}\nautomorphism = \"bad.toml\"\n", manifold.display().to_string()),
    );
    let o = nilmix(&["check"], &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lattice"));

    // parse error carries a location
    let broken = write(dir.path(), "broken.toml", "manifold = [\n");
    let o = nilmix(&["check"], &broken, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    // runtime parameter error
    let torus = root.join("manifolds/torus2.toml");
    let cat = root.join("automorphisms/cat_map.toml");
    let cfg = write(
        dir.path(),
        "runtime.toml",
        &format!(
            "manifold = {:?}\nautomorphism = {:?}\n[diophantine]\ndirection = [0.0, 0.0]\nsearch_bounds = [5]\n",
            torus.display().to_string(),
            cat.display().to_string()
        ),
    );
    let o = nilmix(&["diophantine"], &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_increasing_schedule_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg = write(
        dir.path(),
        "exp.toml",
        &format!(
            "manifold = {:?}\nautomorphism = {:?}\n[diophantine]\nsearch_bounds = [10, 10]\n",
            root.join("manifolds/torus2.toml").display().to_string(),
            root.join("automorphisms/cat_map.toml").display().to_string()
        ),
    );
    let o = nilmix(&["diophantine"], &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly increasing"));
}

#[test]
fn seed_precedence_and_summary_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment("cat_map");
    // env beats the config file
    let o = nilmix(&["diophantine"], &cfg, dir.path(), &[("NILMIX_SEED", "21")]);
    assert!(o.status.success());
    assert!(dir.path().join("diophantine_21.csv").exists());
    // the flag beats the environment
    let o = nilmix(&["diophantine", "--seed", "22"], &cfg, dir.path(), &[("NILMIX_SEED", "21")]);
    assert!(o.status.success());
    assert!(dir.path().join("diophantine_22.csv").exists());
    let o = nilmix(&["check"], &cfg, dir.path(), &[]);
    assert!(o.status.success());
    let s = summary(dir.path());
    assert_eq!(s["diophantine"]["seed"], 22);
    assert!(s["check"].is_object());
    let csv = fs::read_to_string(dir.path().join("diophantine_22.csv")).unwrap();
    assert!(csv.starts_with("search_bound,c1_hat,argmin\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn clt_csv_echoes_standard_errors() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg = write(
        dir.path(),
        "clt.toml",
        &format!(
            "manifold = {:?}\nautomorphism = {:?}\nworkers = 2\n[clt]\nobservable = {{ kind = \"character\", m = [1, 0] }}\nschedule = [8, 64]\npaths = 500\nwindow = 4\ngk_budget = 20000\n",
            root.join("manifolds/torus2.toml").display().to_string(),
            root.join("automorphisms/cat_map.toml").display().to_string()
        ),
    );
    let o = nilmix(&["clt", "--workers", "3"], &cfg, dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("clt_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,empirical_var,se,ks"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert!(cols[2].parse::<f64>().unwrap() > 0.0);
    }
    assert_eq!(summary(dir.path())["clt"]["workers"], 3);
}
