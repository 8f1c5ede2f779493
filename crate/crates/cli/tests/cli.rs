use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn qcka(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcka")).args(args).current_dir(cwd).output().expect("spawn qcka")
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn keyrate_prints_akr_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = qcka(&["keyrate", "--qx", "0.05", "--qber", "0.0159"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["body"]["akr"].as_f64().unwrap() - 0.596).abs() < 1e-3);
    assert_eq!(v["body"]["feasible"], true);
}

#[test]
fn keyrate_finite_length_at_the_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "keyrate", "--qx", "0.05", "--qber", "0.0159", "--rounds", "4140200", "--m", "50100", "--p", "0.012",
        "--eps-tot", "1.8e-8", "--eps-ec", "1e-13", "--eps-pa", "1e-10",
    ];
    let out = qcka(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let l = v["body"]["l_net"].as_f64().unwrap();
    assert!((l - 1.15e6).abs() / 1.15e6 < 0.15, "l = {l}");
}

#[test]
fn infeasible_key_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qcka(&["keyrate", "--qx", "0.2", "--qber", "0.2"], dir.path()).status.code(), Some(3));
}

#[test]
fn config_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qcka(&["simulate", "-c", "missing.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(qcka(&["simulate"], dir.path()).status.code(), Some(2));
    assert_eq!(qcka(&["frobnicate"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "seed = 1\n[topology]\nbobs_km = [0]\n").unwrap();
    assert_eq!(qcka(&["report", "-c", "bad.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(qcka(&["keyrate", "--qx", "0.05"], dir.path()).status.code(), Some(2));
}

#[test]
fn desk_report_emits_identical_keys_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config();
    let cfg = cfg.to_str().unwrap();
    let t = Instant::now();
    let a = qcka(&["report", "-c", cfg, "-o", "a"], dir.path());
    assert!(t.elapsed().as_secs() < 60);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = qcka(&["report", "-c", cfg, "-o", "b"], dir.path());
    assert_eq!(b.status.code(), Some(0));
    let (da, db) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(fs::read(da.join("report.json")).unwrap(), fs::read(db.join("report.json")).unwrap());
    assert_eq!(fs::read(da.join("akr.csv")).unwrap(), fs::read(db.join("akr.csv")).unwrap());

    let r = json(&da.join("report.json"));
    let key = &r["body"]["session"]["pipeline"]["key"];
    assert!(key["length"].as_u64().unwrap() > 0);
    assert_eq!(key["all_identical"], true);
    let files: Vec<Vec<u8>> = ["Alice", "Bob1", "Bob2", "Bob3"]
        .iter()
        .map(|p| fs::read(da.join(format!("key_{p}.qckb"))).unwrap())
        .collect();
    assert!(files.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(files[0], fs::read(db.join("key_Alice.qckb")).unwrap());
    let p = &r["body"]["session"]["pipeline"];
    assert!(p["realized"]["secret_bits"].as_u64() <= p["bound"]["secret_bits"].as_u64());
    let leaked: u64 = p["announcements"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["counts_as_leakage"] == true)
        .map(|a| a["bits"].as_u64().unwrap())
        .sum();
    assert_eq!(leaked, p["leakage_bits"].as_u64().unwrap());
    assert!(da.join("report.timing.json").exists());
    assert!(da.join("akr.gp").exists());
}

#[test]
fn staged_commands_and_one_time_pad() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config();
    let cfg = cfg.to_str().unwrap();
    let d = dir.path();
    assert_eq!(qcka(&["simulate", "-c", cfg, "-o", "s", "--rounds", "100000"], d).status.code(), Some(0));
    // session overrides only apply where a session is simulated
    assert_eq!(qcka(&["estimate", "-c", cfg, "-o", "s", "--rounds", "100000"], d).status.code(), Some(2));
    for cmd in ["estimate", "postprocess"] {
        assert_eq!(qcka(&[cmd, "-c", cfg, "-o", "s"], d).status.code(), Some(0), "{cmd}");
    }
    let est = json(&d.join("s/estimate.json"));
    let post = json(&d.join("s/postprocess.json"));
    assert_eq!(est["body"]["qber_m"], post["body"]["estimate"]["qber_m"]);

    fs::write(d.join("msg.bin"), b"attack at dawn, all four of us").unwrap();
    let enc = qcka(&["encrypt", "-k", "s/key_Alice.qckb", "-i", "msg.bin", "-o", "msg.ct"], d);
    assert_eq!(enc.status.code(), Some(0), "{}", String::from_utf8_lossy(&enc.stderr));
    for bob in ["Bob1", "Bob2", "Bob3"] {
        let key = format!("s/key_{bob}.qckb");
        let out = format!("{bob}.txt");
        assert_eq!(qcka(&["decrypt", "-k", &key, "-i", "msg.ct", "-o", &out], d).status.code(), Some(0));
        assert_eq!(fs::read(d.join(&out)).unwrap(), b"attack at dawn, all four of us");
        // second decryption of the same range is refused by the usage ledger
        assert_eq!(qcka(&["decrypt", "-k", &key, "-i", "msg.ct", "-o", &out], d).status.code(), Some(3));
    }
    let again = qcka(&["encrypt", "-k", "s/key_Alice.qckb", "-i", "msg.bin", "-o", "x.ct", "--offset", "0"], d);
    assert_eq!(again.status.code(), Some(3));
    let image = qcka(&["encrypt", "-k", "s/key_Alice.qckb", "--demo-image", "demo.ppm", "-o", "demo.ct"], d);
    assert_eq!(image.status.code(), Some(3), "a 10 kbit key cannot cover the image");
}

#[test]
fn surface_and_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(qcka(&["surface", "--c", "1.5", "--step", "0.05", "-o", "f", "--gnuplot"], d).status.code(), Some(0));
    let s = json(&d.join("f/surface.json"));
    assert_eq!(s["body"]["argmin"], serde_json::json!([0.5, 0.5]));
    let csv = fs::read_to_string(d.join("f/surface.csv")).unwrap();
    assert!(csv.starts_with("p1,p2,p3,q_x,grad_p1,grad_p2\n"));
    assert!(d.join("f/surface.gp").exists());

    let cfg = fs::read_to_string(desk_config())
        .unwrap()
        .replace("rounds = [100000, 300000, 1000000, 3000000]", "rounds = [20000, 100000]")
        .replace("thresholds_file = \"ldpc_thresholds.toml\"", "");
    fs::write(d.join("small.toml"), cfg).unwrap();
    assert_eq!(qcka(&["sweep", "-c", "small.toml", "-o", "w"], d).status.code(), Some(0));
    let csv = fs::read_to_string(d.join("w/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().ends_with(",0,no_code") || csv.contains("no_key"));
}
