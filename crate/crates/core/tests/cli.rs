use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wavenumber_dof::pattern::TabulatedPattern;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavenumber-dof"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no error JSON in {stderr:?}"));
    serde_json::from_str(line).unwrap()
}

/// Body rows of a CSV written by the tool, keyed by header name.
fn csv_rows(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn coupling_cos1_interior_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["coupling", "--aperture", "10x10", "--pattern", "cos:1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 317);
    let want = 1.0 / (200.0 * std::f64::consts::PI);
    let interior: Vec<f64> = rows
        .iter()
        .filter(|r| r["clipped"] == "false")
        .map(|r| r["sigma_sq"].parse().unwrap())
        .collect();
    assert!(!interior.is_empty());
    for v in interior {
        assert!((v - want).abs() < 1e-8, "{v}");
    }
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# settings_hash: ")));
}

#[test]
fn coupling_from_pattern_file() {
    let dir = tempfile::tempdir().unwrap();
    let pat = dir.path().join("patch.csv");
    TabulatedPattern::from_fn(5.0, 10.0, |t, _| 2.0 * t.cos().powi(2))
        .unwrap()
        .write_csv(&pat)
        .unwrap();
    let out = dir.path().join("s.json");
    let spec = format!("file:{}", pat.display());
    let o = run(&[
        "coupling", "--aperture", "10x10", "--pattern", &spec, "--format", "json", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 317);
    assert_eq!(v["grid"]["count"], 317);
    assert_eq!(v["pattern"], spec);
}

#[test]
fn several_patterns_write_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "coupling", "--aperture", "3x3", "--pattern", "cos:0,cos:2", "--out",
        dir.path().join("spectra").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("spectra"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["coupling_3x3_cos_0.csv", "coupling_3x3_cos_2.csv"]);
}

#[test]
fn invalid_aperture_exits_with_validation_code() {
    let o = run(&["coupling", "--aperture", "0x10", "--pattern", "cos:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "validation");
}

#[test]
fn missing_pattern_file_is_an_io_error() {
    let o = run(&["emcc", "--aperture", "2x2", "--pattern", "file:/nonexistent/patch.csv"]);
    assert_eq!(o.status.code(), Some(4));
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "io");
    assert!(e["error"]["message"].as_str().unwrap().contains("/nonexistent/patch.csv"));
}

#[test]
fn single_realization_is_rejected() {
    let o = run(&["emcc", "--aperture", "2x2", "--pattern", "cos:1", "--realizations", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn singular_normal_equations_exit_with_numeric_code() {
    let o = run(&[
        "emcc", "--aperture", "2x2", "--pattern", "cos:1", "--realizations", "10",
        "--ls-method", "normal-equations",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"]["kind"], "numeric");
}

#[test]
fn emcc_reports_reference_and_relative_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = run(&[
        "emcc", "--aperture", "3x3", "--pattern", "cos:1", "--realizations", "300", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 29);
    for r in rows {
        let est: f64 = r["sigma_sq"].parse().unwrap();
        let reference: f64 = r["sigma_sq_ref"].parse().unwrap();
        let rel: f64 = r["rel_error"].parse().unwrap();
        let ci: f64 = r["ci_half_width"].parse().unwrap();
        if reference > 0.0 {
            assert!((rel - (est / reference - 1.0).abs()).abs() < 1e-12);
        } else {
            // Cells that touch the disk in a single point carry no energy.
            assert!(rel.is_nan());
        }
        assert!(ci >= 0.0);
    }
}

#[test]
fn sweep_rejects_spacing_above_half_wavelength() {
    let o = run(&["sweep", "--aperture", "4x4", "--pattern", "hypothetical", "--spacing", "0.25,0.6"]);
    assert_eq!(o.status.code(), Some(2));
}

fn sweep(dir: &Path, name: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let o = run(&[
        "sweep", "--aperture", "4x4", "--pattern", "hypothetical", "--spacing", "0.125,0.25,0.5",
        "--snr-db", "10", "--trials", "100", "--realizations", "20", "--seed", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn hypothetical_sweep_trends() {
    let dir = tempfile::tempdir().unwrap();
    let rows = csv_rows(&sweep(dir.path(), "a.csv"));
    assert_eq!(rows.len(), 3);
    let caps: Vec<f64> = rows.iter().map(|r| r["capacity_bits"].parse().unwrap()).collect();
    assert!(caps[0] > caps[1] && caps[1] > caps[2], "{caps:?}");
    assert!(rows.iter().all(|r| r["eta_e"] == rows[0]["eta_e"]));
    assert!(rows.iter().all(|r| !r["eta_det"].is_empty()));
}

#[test]
fn identical_settings_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read(sweep(dir.path(), "a.csv")).unwrap();
    let b = fs::read(sweep(dir.path(), "b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_supplies_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "aperture = \"3x3\"\npattern = \"cos:2\"\nseed = 1\n\n[capacity]\nsnr-db = [0, 10, 20]\ntrials = 50\n",
    )
    .unwrap();
    let out = dir.path().join("c.json");
    let o = run(&[
        "capacity", "--config", cfg.to_str().unwrap(), "--format", "json", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    assert_eq!(v["settings"]["trials"], 50);
    let caps: Vec<f64> = results.iter().map(|r| r["capacity_bits"].as_f64().unwrap()).collect();
    assert!(caps.windows(2).all(|w| w[1] > w[0]));
    for r in results {
        assert!(r["truncated_capacity_bits"].as_f64().unwrap() <= r["capacity_bits"].as_f64().unwrap());
    }
}

#[test]
fn edof_reports_both_estimates() {
    let o = run(&[
        "edof", "--aperture", "4x4", "--pattern", "hypothetical", "--realizations", "30", "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = &v["results"][0];
    assert_eq!(r["eta_u"], 50);
    assert_eq!(r["gamma"], 0.95);
    assert!(r["eta_e"].as_u64().unwrap() <= 49);
    assert!(r["eta_det"].as_u64().is_some());
}
