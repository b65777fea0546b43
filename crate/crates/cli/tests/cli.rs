use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cellflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn regime_table_prints_all_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cellflow(tmp.path(), &["regime-table", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Non-linear 2D Darcy's law (power law type)"));
    assert!(stdout.contains("Linear 2D Darcy's law (viscosity eta_inf)"));
    let text = fs::read_to_string(tmp.path().join("o/regime_table.txt")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn oversized_disk_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"cell": {"shape": {"kind": "disk", "radius": 0.5}}}"#);
    let out = cellflow(tmp.path(), &["mesh", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8(out.stderr).unwrap().is_empty());
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"gama": 1.0}"#);
    let out = cellflow(tmp.path(), &["regime-table", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_resolution_flag_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cellflow(tmp.path(), &["mesh", "--resolution", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_cell_mesh_fills_the_unit_cube() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"cell": {"shape": {"kind": "empty"}}}"#);
    let out = cellflow(tmp.path(), &["mesh", "--config", &cfg, "--resolution", "0.25,4", "--out", "m"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("m/mesh_report.json")).unwrap()).unwrap();
    let volume = report["report"]["volume"].as_f64().unwrap();
    assert!((volume - 1.0).abs() < 1e-12, "volume {volume}");
    assert!(tmp.path().join("m/mesh.msh").exists());
}

#[test]
fn amplitude_sweep_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "cell": {"shape": {"kind": "empty"}, "h": 0.5, "n_layers": 4},
            "amplitude_sweep": {"model": "carreau_operator", "r_values": [1.7, 2.6], "f1": [0.25, 0.5, 1.0]}
        }"#,
    );
    let a = cellflow(tmp.path(), &["sweep-amplitude", "--config", &cfg, "--out", "a"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = cellflow(tmp.path(), &["sweep-amplitude", "--config", &cfg, "--out", "b", "--threads", "2"]);
    assert_eq!(b.status.code(), Some(0));
    let ca = fs::read(tmp.path().join("a/sweep_amplitude.csv")).unwrap();
    let cb = fs::read(tmp.path().join("b/sweep_amplitude.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().next().unwrap(), "r,f1,f2,V1,V2,abs_V,iterations,residual,error");
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn rotation_sweep_covers_the_quarter_turn() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "cell": {"shape": {"kind": "empty"}, "h": 0.5, "n_layers": 4},
            "law": {"eta0": 1.0, "eta_inf": 0.001, "lambda": 100.0, "r": 2.0},
            "rotation_sweep": {"n_theta": 3}
        }"#,
    );
    let out = cellflow(tmp.path(), &["sweep-rotation", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("o/sweep_rotation.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][1], "0");
    assert!((rows[2][1].parse::<f64>().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    // channel tensor is isotropic: |V| does not depend on the direction
    let abs_v: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    for v in &abs_v {
        assert!((v - abs_v[0]).abs() < 1e-6 * abs_v[0]);
    }
}

#[test]
fn validate_reports_injected_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "cell": {"shape": {"kind": "empty"}, "h": 0.5, "n_layers": 8},
            "validate": {"fault": "perturbed_prefactor", "channel_h": 0.5, "cell_properties": false}
        }"#,
    );
    let out = cellflow(tmp.path(), &["validate", "--config", &cfg, "--out", "v"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("[FAIL] power prefactor")));
    assert!(tmp.path().join("v/validation.json").exists());
}
