use std::fs;
use std::path::Path;
use std::process::Command;

use qtransfer_cli::config::{layer, preset, resolve, Overrides, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qtransfer"))
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn manifest_digests(dir: &Path) -> serde_json::Value {
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["files"].clone()
}

#[test]
fn config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig2", "fig3", "fig4", "alt_083"] {
        let mut cfg = preset(name).unwrap();
        cfg.workers = Some(3);
        cfg.beta = Some(2.5);
        let path = dir.path().join(format!("{name}.json"));
        fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        let back = resolve(None, Some(&path), &Overrides::default()).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"t_max": 2.0, "master_seed": 5}"#).unwrap();
    let flags = Overrides {
        seed: Some(9),
        ..Overrides::default()
    };
    let cfg = resolve(Some("fig2"), Some(&path), &flags).unwrap();
    assert_eq!((cfg.gamma1, cfg.t_max, cfg.master_seed), (0.2, 2.0, 9));
    assert!(layer(&RunConfig::default(), r#"{"omega3": 1}"#).is_err());
}

#[test]
fn ensemble_output_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("w1");
    let b = dir.path().join("w4");
    for (out, w) in [(&a, "1"), (&b, "4")] {
        run_ok(&[
            "ensemble",
            "--preset",
            "fig3",
            "--n-traj",
            "700",
            "--t-max",
            "3",
            "--seed",
            "77",
            "--workers",
            w,
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for f in ["ensemble.csv", "jumps.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(manifest_digests(&a), manifest_digests(&b));
}

#[test]
fn negative_rate_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"gamma1": -0.5}"#).unwrap();
    let out = bin()
        .args([
            "lindblad",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma1"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"gamma_1": 0.5}"#).unwrap();
    let out = bin()
        .args([
            "lindblad",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fully_decayed_postselection_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["postselect", "--preset", "fig3", "--t-max", "60", "--n-traj", "10"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_rates_give_constant_lindblad_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"gamma1": 0, "gamma2": 0, "gamma_c": 0, "t_max": 1}"#).unwrap();
    run_ok(&[
        "lindblad",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let rows = read_rows(&dir.path().join("lindblad.csv"));
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert_eq!(r[1..], rows[0][1..]);
    }
}

#[test]
fn analytic_fig3_reports_the_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["analytic", "--preset", "fig3", "--out", dir.path().to_str().unwrap()]);
    let rows = read_rows(&dir.path().join("analytic_summary.csv"));
    assert_eq!(rows[0][0], "transfer_fidelity_infinite");
    let f: f64 = rows[0][1].parse().unwrap();
    assert!((f - 0.947).abs() < 1e-3);
}

#[test]
fn every_csv_declares_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    run_ok(&["trajectory", "--preset", "fig3", "--seed", "4", "--out", d]);
    run_ok(&["histogram", "--preset", "fig2", "--n-traj", "200", "--out", d]);
    run_ok(&[
        "postselect",
        "--preset",
        "fig3",
        "--n-traj",
        "200",
        "--t-max",
        "2",
        "--out",
        d,
    ]);
    run_ok(&[
        "demon", "--preset", "fig4", "--n-traj", "4", "--t-max", "20", "--out", d,
    ]);
    let mut n = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let text = fs::read_to_string(&path).unwrap();
            assert!(text.starts_with("# schema: "), "{}", path.display());
            n += 1;
        }
    }
    assert_eq!(n, 7);
    let hist = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert_eq!(
        hist.lines().nth(1),
        Some("bin_start,bin_end,count_q1,count_q2,frac_q1,frac_q2,low_stats_flag")
    );
}

#[test]
fn json_format_and_preset_command() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "trajectory",
        "--preset",
        "fig2",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(v["columns"][0], "t");
    assert_eq!(v["rows"].as_array().unwrap().len(), 61);

    let out = bin().args(["preset", "fig4"]).output().unwrap();
    assert!(out.status.success());
    let cfg: RunConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg, preset("fig4").unwrap());
    assert_eq!(bin().args(["preset", "fig9"]).output().unwrap().status.code(), Some(2));
}
