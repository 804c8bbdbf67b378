use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zgkn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zgkn")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is one JSON document")
}

#[test]
fn angular_output_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let args = ["angular", "--am", "0.2", "--ae", "-0.1", "--kappa", "0.5", "--n", "1", "--json", "--out", "a.json"];
    let a = zgkn(d.path(), &args);
    let b = zgkn(d.path(), &args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert!(v["started"].is_null() && v["finished"].is_null());
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(std::fs::read(d.path().join("a.json")).unwrap(), a.stdout);
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.toml"), "[params]\na = 0.2\nmass = 1.0\nradius = 3\n").unwrap();
    let o = zgkn(d.path(), &["spectrum", "--config", "bad.toml", "--out", "s.json", "--csv", "s.csv"]);
    assert_eq!(code(&o), 2);
    let left: Vec<_> = std::fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("bad.toml")]);
}

#[test]
fn window_outside_the_gap_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = zgkn(d.path(), &["spectrum", "--window", "-1.5,0.5", "--json"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["error"]["kind"], "config");
}

#[test]
fn saved_config_reloads_identically() {
    let d = tempfile::tempdir().unwrap();
    let o = zgkn(
        d.path(),
        &["spectrum", "--a", "0.1", "--gamma", "-0.2", "--kappa-list", "-0.5,1.5", "--save-config", "c.toml"],
    );
    assert_eq!(code(&o), 0);
    let first = std::fs::read_to_string(d.path().join("c.toml")).unwrap();
    let o = zgkn(d.path(), &["spectrum", "--config", "c.toml", "--save-config", "c2.toml"]);
    assert_eq!(code(&o), 0);
    assert_eq!(first, std::fs::read_to_string(d.path().join("c2.toml")).unwrap());
}

#[test]
fn state_file_drives_trajectory_and_rejects_tampering() {
    let d = tempfile::tempdir().unwrap();
    let o = zgkn(
        d.path(),
        &["state", "--a", "0.2", "--gamma", "-0.3", "--out", "st.json", "--csv", "st.csv", "--r", "-4,4,5"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let st: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("st.json")).unwrap()).unwrap();
    let e = st["payload"]["energy"].as_f64().unwrap();
    assert!((e - 0.954_031_139_85).abs() < 1e-9);
    let csv = std::fs::read_to_string(d.path().join("st.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash: {}\nr,theta,phi,ck_r", st["config_hash"].as_str().unwrap())));

    let o =
        zgkn(d.path(), &["trajectory", "--state-file", "st.json", "--cadence", "50", "--output", "tr.csv", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let tr = json(&o);
    assert_eq!(tr["payload"]["samples"], 51);
    let q = &tr["payload"]["final_q"];
    assert!((q[1].as_f64().unwrap() - 1.5).abs() < 1e-6 && (q[2].as_f64().unwrap() - 0.8).abs() < 1e-6);
    let rows = std::fs::read_to_string(d.path().join("tr.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2 + 51);

    let text = std::fs::read_to_string(d.path().join("st.json")).unwrap();
    std::fs::write(d.path().join("bad.json"), text.replace("\"gamma\": -0.3", "\"gamma\": -0.31")).unwrap();
    for args in
        [&["trajectory", "--state-file", "bad.json"][..], &["verify", "--quick", "--state-file", "bad.json"][..]]
    {
        let o = zgkn(d.path(), args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("hash"));
    }
}

#[test]
fn fields_csv_has_the_documented_columns() {
    let d = tempfile::tempdir().unwrap();
    let o = zgkn(
        d.path(),
        &[
            "fields",
            "--a",
            "1",
            "--q",
            "0.7",
            "--q-prime",
            "1",
            "--xi",
            "-1,1,3",
            "--eta",
            "-1,1,3",
            "--output",
            "f.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.path().join("f.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash: "));
    assert_eq!(lines.next().unwrap(), "xi,eta,phi_kn,psi_kn,A_t,A_phi,E_x,E_y,E_z,B_x,B_y,B_z");
    // The ring point (0, 0) is skipped.
    assert_eq!(lines.count(), 8);
}

#[test]
fn target_check_failure_is_recorded_and_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = zgkn(
        d.path(),
        &[
            "interaction",
            "--a",
            "1",
            "--q",
            "0.7",
            "--q-prime",
            "1.3",
            "--qpt",
            "1.2,0.5,0.7,1",
            "--target-check",
            "--json",
        ],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["payload"]["target_check"]["passed"], false);
    assert_eq!(v["diagnostics"]["error"]["kind"], "check");
    assert_eq!(v["payload"]["p0"]["raw_ladder"].as_array().unwrap().len(), 11);
}

#[test]
fn contradictory_sheet_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = zgkn(d.path(), &["interaction", "--a", "1", "--q", "0.7", "--q-prime", "1.3", "--qpt", "1.2,0.5,0.7,-1"]);
    assert_eq!(code(&o), 2);
}
