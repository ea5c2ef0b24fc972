use std::path::Path;
use std::process::{Command, Output};

use hodograph::field::FieldGrid;

fn hodograph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hodograph"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn catastrophe_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = hodograph(dir.path(), &["catastrophe", "--map", "cubic", "--check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "catastrophe.json")).unwrap();
    assert!((v["t_c"].as_f64().unwrap() - 1.62019).abs() < 1e-3);

    assert_eq!(code(&hodograph(dir.path(), &["catastrophe", "--map", "rotational:alpha=1"])), 4);
    assert_eq!(code(&hodograph(dir.path(), &["catastrophe", "--map", "harmonic:W=expcos"])), 4);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hodograph(dir.path(), &["surface", "--map", "spiral"])), 2);
    assert_eq!(code(&hodograph(dir.path(), &["surface", "--grid", "10x10x10"])), 2);
    assert_eq!(code(&hodograph(dir.path(), &["vorticity", "--point", "1,2,3"])), 2);

    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"map": "cubic", "grid": [20], "colour": "red"}"#).unwrap();
    assert_eq!(code(&hodograph(dir.path(), &["surface", "--config", cfg.to_str().unwrap()])), 2);
    std::fs::write(&cfg, r#"{"command": "field", "map": "cubic"}"#).unwrap();
    assert_eq!(code(&hodograph(dir.path(), &["surface", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "exponent", "map": {"dim": 2, "builtin": "cubic"}, "random": 4, "seed": 3, "check": true}"#,
    )
    .unwrap();
    let out = hodograph(dir.path(), &["exponent", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "exponent.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "u1,u2,t_b,slope,stderr,level");
    assert_eq!(lines.count(), 4);
}

#[test]
fn surface_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = hodograph(dir.path(), &["surface", "--map", "linear:beta=1", "--grid", "11", "--box=-1:1,-1:1", "--check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "surface.csv");
    assert!(csv.starts_with("branch,u1,u2,label,n_real,t1,m1,t2,m2\n"));
    for row in csv.lines().skip(1) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[5].parse::<f64>().unwrap(), -1.0);
        assert_eq!(cells[6], "2");
    }

    // no real roots anywhere: informational empty-result code, files still written
    let out = hodograph(dir.path(), &["surface", "--map", "harmonic:W=(u2^2-u1^2)/2", "--grid", "21", "--check"]);
    assert_eq!(code(&out), 3);
    let csv = read(dir.path(), "surface.csv");
    assert!(csv.lines().skip(1).all(|r| r.split(',').nth(4) == Some("0")));

    let out = hodograph(dir.path(), &["surface", "--map", "cubic", "--grid", "101", "--check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(dir.path(), "locus.csv").lines().count() > 20);
    assert!(read(dir.path(), "locus_segments.csv").lines().count() > 20);
}

#[test]
fn vorticity_series_and_laurent() {
    let dir = tempfile::tempdir().unwrap();
    let out = hodograph(dir.path(), &["vorticity", "--map", "rotational:alpha=2", "--t-range", "0:10", "--t-steps", "11", "--check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "vorticity.csv");
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    let (t, w): (f64, f64) = (row[4].parse().unwrap(), row[5].parse().unwrap());
    assert!((w - 4.0 / (4.0 * t * t + 1.0)).abs() < 1e-12);

    let out = hodograph(dir.path(), &["vorticity", "--map", "gaussian", "--laurent", "--check", "--times", "0,0.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "laurent.json")).unwrap();
    let c = v["fit"]["coefficients"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() - 0.270466).abs() < 1e-3);
    assert!(dir.path().join("vorticity_snapshot_1.csv").exists());
}

#[test]
fn field_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = hodograph(dir.path(), &["field", "--map", "gaussian", "--grid", "41", "--times", "0,0.3", "--format", "both", "--fd-curl", "--check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let grid = FieldGrid::read_binary(&mut std::fs::File::open(dir.path().join("field_1.bin")).unwrap()).unwrap();
    assert_eq!(grid.len(), 41 * 41);
    assert_eq!(grid.t, 0.3);
    let csv = read(dir.path(), "field_0.csv");
    assert!(csv.lines().next().unwrap().ends_with(",curl_fd"));
    // at t = 0 the field is the initial data
    for row in csv.lines().skip(1).step_by(37) {
        let v: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((v[2] - (-v[0] * v[0] - v[1] * v[1]).exp()).abs() <= 1e-8);
    }
}

#[test]
fn exponent_and_frame_checks() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["exponent", "--map", "cubic", "--locus", "5", "--check"][..],
        &["exponent", "--map", "jordan", "--point", "0.3,-0.2,0.5", "--check"],
        &["exponent", "--map", "cubic", "--regime", "spatial", "--random", "3", "--check"],
        &["frame", "--map", "cubic", "--random", "3", "--scan", "--check"],
    ] {
        let out = hodograph(dir.path(), args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let frames: serde_json::Value = serde_json::from_str(&read(dir.path(), "frame.json")).unwrap();
    assert_eq!(frames.as_array().unwrap().len(), 3);
    assert!(read(dir.path(), "frame_candidates.csv").lines().count() > 1);
}

#[test]
fn runs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let out = hodograph(dir, &["exponent", "--map", "cubic", "--regime", "spatial", "--random", "3", "--seed", "9", "--workers", "2"]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(read(a.path(), "exponent.csv"), read(b.path(), "exponent.csv"));
}

#[test]
fn acceptance_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = hodograph(dir.path(), &["acceptance", "--only", "1,8"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.contains(": PASS ")).count(), 2);
}
