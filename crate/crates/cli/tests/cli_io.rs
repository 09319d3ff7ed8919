//! End-to-end checks of the command-line front door: exit codes, artifact
//! shapes and replay determinism.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dropoly"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("dropoly-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn config_errors_exit_two() {
    let out = bin().args(["free-energy", "--lamda", "1.0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("lamda"), "{msg}");

    let out = bin().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // base-seed is mandatory
    let dir = tmp_dir("seedless");
    let out = bin()
        .args([
            "free-energy",
            "--lambda",
            "1",
            "--h",
            "0",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_artifacts() {
    let dir = tmp_dir("kernel");
    let out = bin()
        .args([
            "kernel",
            "--d",
            "3",
            "--n-max",
            "64",
            "--base-seed",
            "1",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,p_k,b_k,a_2k");
    // k = 1 row: p = 1/8 for d = 3
    let row1: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row1[0], "1");
    assert!((row1[1].parse::<f64>().unwrap() - 0.125).abs() < 1e-15);
    let aggregate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("aggregate.json")).unwrap()).unwrap();
    assert!(aggregate["alpha"].as_f64().unwrap() > 0.7);
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn free_energy_closed_form_artifacts() {
    let dir = tmp_dir("free-energy");
    let out = bin()
        .args([
            "free-energy",
            "--lambda",
            "1.5",
            "--h",
            "0.4",
            "--p",
            "0",
            "--n",
            "400",
            "--replicas",
            "16",
            "--base-seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let aggregate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("aggregate.json")).unwrap()).unwrap();
    let psi = aggregate["psi_p_hat"].as_f64().unwrap();
    let stderr = aggregate["stderr"].as_f64().unwrap();
    assert!(psi.abs() <= 4.0 * stderr, "psi {psi} stderr {stderr}");
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17); // header + 16 replicas
    assert!(csv.starts_with("seed,n,lambda,h,p,d,log_z_n,log_zhat_n,psi_n,phi_per_replica"));
    // per-replica psi is identically zero at p = 0
    for line in csv.lines().skip(1) {
        let psi_n: f64 = line.split(',').nth(8).unwrap().parse().unwrap();
        assert!(psi_n.abs() < 1e-12);
    }
}

#[test]
fn sample_paths_artifacts_and_disorder_replay() {
    let dir = tmp_dir("paths");
    let out = bin()
        .args([
            "sample-paths",
            "--lambda",
            "1.0",
            "--h",
            "0.0",
            "--p",
            "1.0",
            "--d",
            "1",
            "--n",
            "24",
            "--samples",
            "40",
            "--base-seed",
            "4",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert!(csv.starts_with("sample,t,x1"));
    assert_eq!(csv.lines().count(), 1 + 40 * 25);
    // every path starts at the origin and steps by +/-1
    let mut prev: Option<(i64, i64)> = None;
    for line in csv.lines().skip(1) {
        let fields: Vec<i64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        let (s, t, x) = (fields[0], fields[1], fields[2]);
        if t == 0 {
            assert_eq!(x, 0);
        } else {
            let (ps, px) = prev.unwrap();
            assert_eq!(ps, s);
            assert_eq!((x - px).abs(), 1);
        }
        prev = Some((s, x));
    }
    // the disorder dump replays
    let dump = std::fs::read_to_string(dir.join("disorder.json")).unwrap();
    let disorder = dropoly::model::Disorder::from_json(&dump).unwrap();
    assert_eq!(disorder.len(), 24);
}

#[test]
fn observables_histogram_consistency() {
    let dir = tmp_dir("observables");
    let out = bin()
        .args([
            "observables",
            "--lambda",
            "0.8",
            "--h",
            "0.1",
            "--p",
            "1.0",
            "--n",
            "60",
            "--replicas",
            "3",
            "--samples",
            "800",
            "--mode",
            "annealed",
            "--n-list",
            "30,60",
            "--base-seed",
            "12",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut total = 0u64;
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        total += fields[1].parse::<u64>().unwrap();
        let lo: f64 = fields[2].parse().unwrap();
        let hi: f64 = fields[3].parse().unwrap();
        assert!(lo <= hi);
    }
    assert_eq!(total, 2400);
    let returns = std::fs::read_to_string(dir.join("returns.csv")).unwrap();
    assert_eq!(returns.lines().count(), 3);
}

#[test]
fn replay_is_byte_identical_across_worker_counts() {
    let args_for = |dir: &PathBuf, workers: &str| {
        vec![
            "phase-scan".to_string(),
            "--lambda".into(),
            "0.6".into(),
            "--lambda".into(),
            "1.2".into(),
            "--h".into(),
            "-1.0".into(),
            "--h".into(),
            "0.9".into(),
            "--p".into(),
            "1.0".into(),
            "--n".into(),
            "200".into(),
            "--replicas".into(),
            "12".into(),
            "--base-seed".into(),
            "33".into(),
            "--workers".into(),
            workers.to_string(),
            "--out".into(),
            dir.to_str().unwrap().to_string(),
        ]
    };
    let dir1 = tmp_dir("replay-w1");
    let dir4 = tmp_dir("replay-w4");
    let out1 = bin().args(args_for(&dir1, "1")).output().unwrap();
    assert_eq!(out1.status.code(), Some(0), "{}", String::from_utf8_lossy(&out1.stderr));
    let out4 = bin().args(args_for(&dir4, "4")).output().unwrap();
    assert_eq!(out4.status.code(), Some(0));
    for name in ["results.csv", "aggregate.json"] {
        let a = std::fs::read(dir1.join(name)).unwrap();
        let b = std::fs::read(dir4.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across worker counts");
    }
}

#[test]
fn manifest_reconstructs_the_run() {
    // The manifest's config echo is sufficient to replay the run and get
    // byte-identical data artifacts.
    let dir = tmp_dir("manifest-src");
    let out = bin()
        .args([
            "free-energy",
            "--lambda",
            "0.9",
            "--h",
            "-0.2",
            "--p",
            "0.7",
            "--n",
            "150",
            "--replicas",
            "10",
            "--base-seed",
            "55",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let cfg = &manifest["config"];
    let replay_dir = tmp_dir("manifest-replay");
    let get = |k: &str| cfg[k].to_string();
    let out = bin()
        .args([
            manifest["command"].as_str().unwrap(),
            "--lambda",
            &cfg["lambda"][0].to_string(),
            "--h",
            &cfg["h"][0].to_string(),
            "--p",
            &get("p"),
            "--n",
            &get("n"),
            "--replicas",
            &get("replicas"),
            "--base-seed",
            &get("base_seed"),
            "--out",
            replay_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["results.csv", "aggregate.json"] {
        assert_eq!(
            std::fs::read(dir.join(name)).unwrap(),
            std::fs::read(replay_dir.join(name)).unwrap(),
            "{name} differs after manifest replay"
        );
    }
}

#[test]
fn env_var_overrides_worker_count() {
    let dir = tmp_dir("env-workers");
    let out = bin()
        .env("DROPOLY_WORKERS", "3")
        .args([
            "kernel",
            "--d",
            "1",
            "--n-max",
            "16",
            "--base-seed",
            "1",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workers"], 3);
}

#[test]
fn critical_curve_misclassified_bracket_is_a_job_failure() {
    // p extremely small makes the lower endpoint plainly not Localized at
    // tiny replica counts; expect exit 1 with the endpoint named.
    let dir = tmp_dir("curve-fail");
    let out = bin()
        .args([
            "critical-curve",
            "--lambda",
            "0.2",
            "--p",
            "0.02",
            "--n",
            "60",
            "--replicas",
            "4",
            "--tol",
            "0.4",
            "--base-seed",
            "3",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("endpoint"), "{msg}");
}
