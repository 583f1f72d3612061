use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cshlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cshlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("CSH_OUT_DIR")
        .env_remove("CSH_THREADS")
        .output()
        .expect("spawn cshlab")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("read json")).expect("parse json")
}

#[test]
fn missing_or_unknown_arguments_are_usage_errors() {
    let bin = env!("CARGO_BIN_EXE_cshlab");
    assert_eq!(Command::new(bin).output().unwrap().status.code(), Some(1));
    assert_eq!(Command::new(bin).args(["lie-info", "--frobnicate"]).output().unwrap().status.code(), Some(1));
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn lie_info_reports_su2_structure_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = cshlab(&["lie-info", "--n", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let info = json(&dir.path().join("lie-info.json"));
    assert_eq!(info["dim"], 3);
    let f123 = info["structure_constants"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["a"] == 1 && e["b"] == 2 && e["c"] == 3)
        .expect("f^12_3 listed");
    assert!((f123["f"].as_f64().unwrap() - 2.0).abs() < 1e-14);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "lie-info");
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o == "lie-info.json"));

    assert_eq!(cshlab(&["lie-info", "--n", "1"], dir.path()).status.code(), Some(1));
}

#[test]
fn flags_override_config_file_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 3, "seed": 5}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = dir.path().join("file");
    assert_eq!(cshlab(&["lie-info", "--config", cfg], &from_file).status.code(), Some(0));
    let m = json(&from_file.join("manifest.json"));
    assert_eq!((m["params"]["n"].as_u64(), m["common"]["seed"].as_u64()), (Some(3), Some(5)));

    let flagged = dir.path().join("flag");
    assert_eq!(cshlab(&["lie-info", "--config", cfg, "--n", "2", "--seed", "9"], &flagged).status.code(), Some(0));
    let m = json(&flagged.join("manifest.json"));
    assert_eq!((m["params"]["n"].as_u64(), m["common"]["seed"].as_u64()), (Some(2), Some(9)));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(cshlab(&["lie-info", "--config", bad.to_str().unwrap()], &from_file).status.code(), Some(1));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_cshlab"))
        .args(["lie-info", "--quiet"])
        .env("CSH_OUT_DIR", &env_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_dir.join("lie-info.json").exists());

    let flag_dir = dir.path().join("from-flag");
    let status = Command::new(env!("CARGO_BIN_EXE_cshlab"))
        .args(["lie-info", "--quiet", "--out-dir"])
        .arg(&flag_dir)
        .env("CSH_OUT_DIR", dir.path().join("unused"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flag_dir.join("lie-info.json").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn failed_checks_exit_with_two_and_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = cshlab(
        &["bilinear-scan", "--n-values", "1,2", "--l-values", "1", "--scaling-n", "4", "--global-constant", "0.1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&dir.path().join("manifest.json"));
    let check = &m["checks"].as_array().unwrap()[0];
    assert_eq!((check["name"].as_str(), check["passed"].as_bool()), (Some("global constant"), Some(false)));
    assert!(dir.path().join("bilinear-scan.csv").exists());
}

#[test]
fn plot_scripts_are_stable_and_reject_bad_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("knapp-third.csv");
    fs::write(&csv, "k,lambda,abs_F_d3A2,ci95_total\n1,1e0,1e0,0\n2,1e2,1e5,0\n3,1e4,1e10,0\n4,1e6,1e15,0\n").unwrap();
    let csv_arg = csv.to_str().unwrap();
    assert_eq!(cshlab(&["plot-script", "--csv", csv_arg, "-q"], dir.path()).status.code(), Some(0));
    let first = fs::read(dir.path().join("knapp-third.gp")).unwrap();
    assert_eq!(cshlab(&["plot-script", "--csv", csv_arg, "-q"], dir.path()).status.code(), Some(0));
    assert_eq!(first, fs::read(dir.path().join("knapp-third.gp")).unwrap());
    assert!(String::from_utf8(first).unwrap().contains("fit_slope = 2.5"));

    let empty = dir.path().join("knapp-empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(cshlab(&["plot-script", "--csv", empty.to_str().unwrap()], dir.path()).status.code(), Some(1));

    let broken = dir.path().join("knapp-broken.csv");
    fs::write(&broken, "k,lambda,abs_F_d3A2\n1,1e3,1\n2,oops,4\n").unwrap();
    let out = cshlab(&["plot-script", "--csv", broken.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let unknown = dir.path().join("data.csv");
    fs::write(&unknown, "x,y\n1,2\n").unwrap();
    assert_eq!(cshlab(&["plot-script", "--csv", unknown.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn third_derivative_scan_grows_like_lambda_to_five_halves() {
    let dir = tempfile::tempdir().unwrap();
    let out = cshlab(&["knapp-scan", "--amplitude", "third", "--lambda-decades", "2", "--samples", "20000", "-q"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("knapp-summary.json"));
    let slope = summary["third"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 2.5).abs() <= 0.2, "slope {slope}");
    assert!(summary["third"]["lambda_decades"].as_f64().unwrap() >= 2.0);
    let csv = fs::read_to_string(dir.path().join("knapp-third.csv")).unwrap();
    assert!(csv.starts_with("k,lambda,abs_F_d3A2,ci95_total,"));
    assert!(dir.path().join("knapp-third.gp").exists());
}

#[test]
fn repeated_runs_write_identical_data() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--m", "32", "--band", "2", "--t-final", "0.01", "--stride", "1", "--seed", "3", "-q"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(cshlab(&args, &a).status.code(), Some(0));
    assert_eq!(cshlab(&args, &b).status.code(), Some(0));
    for name in ["simulate-monitor.csv", "simulate-summary.json", "frames/frame-0000.bin", "frames/frame-0002.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(cshlab(&["simulate", "--m", "32", "--t-final", "0.013", "-q"], &a).status.code(), Some(1));
}
