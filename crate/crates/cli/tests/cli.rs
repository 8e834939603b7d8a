use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: [&str; 4] = ["--emission-points", "513", "--map-points", "129"];

fn cartsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cartsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], out: &Path) -> Output {
    let o = cartsim(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(SMALL);
    v
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn emit_writes_wavepacket_schema() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&with_small(&["emit", "--preset", "ca40"]), dir.path());
    let (header, rows) = csv_rows(&dir.path().join("wavepacket_a.csv"));
    assert_eq!(header.len(), 9);
    assert_eq!(header[0], "t_us");
    assert_eq!(rows.len(), 513);
    assert!(rows.iter().all(|r| r.len() == 9));
    let manifest = json(&dir.path().join("emission.json"));
    assert_eq!(manifest["command"], "emit");
    assert!(manifest["version"].is_string());
    assert_eq!(manifest["config"]["preset"], "ca40");
    assert!(dir.path().join("timings.json").exists());
}

#[test]
fn weak_birefringence_rotated_channel_is_minor() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "emit",
        "--preset",
        "generic",
        "--delta",
        "0.3",
        "--delta-units",
        "kappa",
        "--emission-points",
        "8193",
        "--map-points",
        "2049",
    ];
    run_ok(&args, dir.path());
    let manifest = json(&dir.path().join("emission.json"));
    let norms = &manifest["results"]["nodes"][0]["channel_norms"];
    let ratio = norms["rV"].as_f64().unwrap() / norms["rH"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio < 0.2, "ratio {ratio}");
}

#[test]
fn undriven_node_emits_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.toml");
    std::fs::write(
        &cfg,
        "[node_a]\ng_1 = 10.0\ng_2 = 10.0\n\"κ\" = 5.0\n\"Ω_1\" = 0.0\n\"Ω_2\" = 0.0\n\"Δ_1,Δ_2\" = 400.0\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&with_small(&["emit", "--config", cfg.to_str().unwrap()]), &out);
    let (_, rows) = csv_rows(&out.join("wavepacket_a.csv"));
    assert!(rows.iter().all(|r| r[1..].iter().all(|&x| x == 0.0)));
}

#[test]
fn polarization_without_birefringence_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let args = with_small(&[
        "interfere",
        "--encoding",
        "polarization",
        "--delta-a",
        "0",
        "--delta-b",
        "0",
    ]);
    run_ok(&args, dir.path());
    let f = json(&dir.path().join("windows.json"))["results"]["asymptotic_fidelity"]
        .as_f64()
        .unwrap();
    assert!((f - 1.0).abs() < 1e-9, "F = {f}");
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with_small(&[
        "interfere",
        "--preset",
        "generic",
        "--delta-a",
        "0",
        "--delta-b",
        "1",
        "--delta-units",
        "kappa",
    ]);
    run_ok(&args, a.path());
    run_ok(&args, b.path());
    for f in ["coincidence.csv", "windows.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn sweep_shape_and_scheduling_independence() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with_small(&["sweep", "--preset", "generic", "--resolution", "3"]);
    let mut one = args.clone();
    one.extend(["--jobs", "1"]);
    let mut eight = args.clone();
    eight.extend(["--jobs", "8"]);
    run_ok(&one, a.path());
    run_ok(&eight, b.path());
    let (header, rows) = csv_rows(&a.path().join("heatmap.csv"));
    assert_eq!(
        header,
        [
            "delta_a_over_kappa",
            "delta_b_over_kappa",
            "fidelity",
            "efficiency"
        ]
    );
    assert_eq!(rows.len(), 9);
    for r in rows.iter().filter(|r| r[0] == r[1]) {
        assert!((r[2] - 1.0).abs() < 1e-3, "diagonal {r:?}");
    }
    assert_eq!(
        std::fs::read(a.path().join("heatmap.csv")).unwrap(),
        std::fs::read(b.path().join("heatmap.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "preset = \"ca40\"\n[node_a]\nkapa = 6.0\n").unwrap();
    let o = cartsim(
        &["emit", "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cartsim(&["emit", "--preset", "sr88"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preset_and_version_print() {
    let o = Command::new(env!("CARGO_BIN_EXE_cartsim"))
        .args(["preset", "ra225"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["preset"]["node"]["kappa"], 0.28);
    assert!(v["derived_geometry"]["waist_um"].as_f64().unwrap() > 27.0);
    let o = Command::new(env!("CARGO_BIN_EXE_cartsim"))
        .arg("version")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}
