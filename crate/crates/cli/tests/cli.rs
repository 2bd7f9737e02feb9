use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn delaystab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaystab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const TWO_NEGATIVE: &str = r#"
[model]
kind = "polynomial"
name = "two-crossings"
n = 2
horizon = 2.0
terms = [
  { time = [0.25, -0.5], powers = [2, 0], coefficient = 1.0 },
  { time = [0.4, -0.5], powers = [0, 2], coefficient = 1.0 },
  { time = [0.25], powers = [4, 0], coefficient = 1.0 },
  { time = [0.5], powers = [2, 2], coefficient = 1.0 },
  { time = [0.25], powers = [0, 4], coefficient = 1.0 },
]
"#;

#[test]
fn validate_accepts_quartic() {
    let dir = TempDir::new().unwrap();
    let out = delaystab(&["validate", "--model", "quartic-2d"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["result"]["failures"].as_array().unwrap().len(), 0);
    assert!(dir.path().join("validate_summary.json").exists());
}

#[test]
fn validate_reports_rotating_eigenbasis() {
    let dir = TempDir::new().unwrap();
    let out = delaystab(&["validate", "--model", "rotating"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let s = summary(&out);
    assert_eq!(s["error"]["kind"], "hypothesis");
    assert!(s["error"]["message"].as_str().unwrap().contains("A1"));
}

#[test]
fn bad_eps_lists_exit_before_computing() {
    let dir = TempDir::new().unwrap();
    for eps in ["0.001,0.01", "0.01,-0.001"] {
        let out = delaystab(&["sweep", "--eps-list", eps], dir.path());
        assert_eq!(out.status.code(), Some(2), "{eps}");
        assert!(out.stdout.is_empty());
    }
    let cfg = write_config(dir.path(), "empty.toml", "eps = []\n");
    let out = delaystab(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("sweep_summary.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "typo.json", r#"{"epsilon": [0.01]}"#);
    let out = delaystab(&["analyze", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = delaystab(&["analyze", "--model", "quartic-9d"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_quartic_times() {
    let dir = TempDir::new().unwrap();
    let out = delaystab(&["analyze", "--model", "quartic-1d"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let t = &summary(&out)["result"]["times"];
    assert!((t["t_c"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert!((t["t_star"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!((t["lambda1_at_tstar"].as_f64().unwrap() + 0.5).abs() < 1e-8);
    let m = &summary(&out)["result"]["margins"];
    assert!((m["delay"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert!((m["to_horizon"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    let csv = fs::read_to_string(dir.path().join("spectral.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,lambda_1,Lambda");
    assert_eq!(csv.lines().count(), 62);
}

#[test]
fn analyze_commuting_family() {
    let dir = TempDir::new().unwrap();
    let out = delaystab(&["analyze", "--model", "commuting"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let t = &summary(&out)["result"]["times"];
    assert!((t["t_star"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn analyze_without_return_has_no_t_star() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "flat.toml",
        r#"
[model]
kind = "commuting"
base = [[2.0, 0.0], [0.0, 1.0]]
phi = [0.0]
horizon = 1.5
"#,
    );
    let out = delaystab(&["analyze", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert!(s["result"]["times"]["t_star"].is_null());
    assert!(s["result"]["note"].as_str().unwrap().contains("t* undefined"));
}

#[test]
fn critical_points_at_t_star() {
    let dir = TempDir::new().unwrap();
    let out = delaystab(&["critical", "--model", "quartic-1d", "--time", "1.0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let points = summary(&out)["result"]["points"].as_array().unwrap().clone();
    let mut xs: Vec<f64> = points
        .iter()
        .map(|p| p["location"][0].as_f64().unwrap())
        .collect();
    xs.sort_by(f64::total_cmp);
    let r = 0.5f64.sqrt();
    assert_eq!(xs.len(), 3);
    for (x, want) in xs.iter().zip([-r, 0.0, r]) {
        assert!((x - want).abs() < 1e-8, "{xs:?}");
    }
}

#[test]
fn sweep_recovers_t_star_and_target() {
    let dir = TempDir::new().unwrap();
    let out = delaystab(&["sweep"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = &summary(&out)["result"];
    let ext = r["delay"]["extrapolated"].as_f64().unwrap();
    assert!((ext - 1.0).abs() < 0.02, "{ext}");
    assert_eq!(r["delay"]["delayed"], true);
    let x = r["jump_target"]["point"]["location"][0].as_f64().unwrap();
    assert!((x - 0.5f64.sqrt()).abs() < 1e-8);
    for name in [
        "trajectory_eps_1e-2.csv",
        "trajectory_eps_1e-4.csv",
        "events_eps_1e-3.jsonl",
        "limit_curve.csv",
        "heteroclinic_plus.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let events = fs::read_to_string(dir.path().join("events_eps_1e-3.jsonl")).unwrap();
    assert!(events.contains("mu-crossing"));
}

#[test]
fn negative_sign_selects_other_target() {
    let dir = TempDir::new().unwrap();
    let out = delaystab(&["sweep", "--sign", "minus", "--eps-list", "0.01,0.001"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = &summary(&out)["result"];
    let x = r["jump_target"]["point"]["location"][0].as_f64().unwrap();
    assert!((x + 0.5f64.sqrt()).abs() < 1e-8);
    assert!(dir.path().join("heteroclinic_minus.csv").exists());
}

#[test]
fn heteroclinics_land_on_both_minima() {
    let dir = TempDir::new().unwrap();
    let base = delaystab(&["heteroclinic", "--model", "quartic-2d"], dir.path());
    assert_eq!(base.status.code(), Some(0));
    let other = TempDir::new().unwrap();
    let shifted = delaystab(
        &["heteroclinic", "--model", "quartic-2d", "--delta0", "1e-3"],
        other.path(),
    );
    assert_eq!(shifted.status.code(), Some(0));
    let a = summary(&base)["result"]["orbits"].clone();
    let b = summary(&shifted)["result"]["orbits"].clone();
    let r = 0.5f64.sqrt();
    for (k, sign) in [(0, 1.0), (1, -1.0)] {
        let x = a[k]["omega"]["location"][0].as_f64().unwrap();
        let y = b[k]["omega"]["location"][0].as_f64().unwrap();
        assert!((x - sign * r).abs() < 1e-8);
        assert!((x - y).abs() < 1e-8);
        assert_eq!(a[k]["alignment_ok"], true);
    }
}

#[test]
fn second_negative_direction_is_unsupported() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "two.toml", TWO_NEGATIVE);
    let out = delaystab(&["heteroclinic", "--config", &cfg], dir.path());
    assert_ne!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["error"]["kind"], "hypothesis");
    assert!(!s["error"]["message"].as_str().unwrap().is_empty());
}

#[test]
fn summaries_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["sweep", "--model", "quartic-2d", "--eps-list", "0.01,0.001", "--seed", "7"];
    let first = delaystab(&args, dir.path());
    let a = fs::read(dir.path().join("sweep_summary.json")).unwrap();
    let b_csv = fs::read(dir.path().join("trajectory_eps_1e-3.csv")).unwrap();
    let second = delaystab(&args, dir.path());
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(a, fs::read(dir.path().join("sweep_summary.json")).unwrap());
    assert_eq!(b_csv, fs::read(dir.path().join("trajectory_eps_1e-3.csv")).unwrap());

    let s = summary(&first);
    assert_eq!(s["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn defaults_round_trip() {
    let dir = TempDir::new().unwrap();
    for (format, file) in [("toml", "d.toml"), ("json", "d.json")] {
        let out = Command::new(env!("CARGO_BIN_EXE_delaystab"))
            .args(["defaults", "--format", format])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let cfg = write_config(dir.path(), file, &String::from_utf8(out.stdout).unwrap());
        let run = delaystab(&["analyze", "--config", &cfg], dir.path());
        assert_eq!(run.status.code(), Some(0), "{format}");
        let plain = delaystab(&["analyze"], dir.path());
        assert_eq!(summary(&run)["config_hash"], summary(&plain)["config_hash"]);
    }
}
