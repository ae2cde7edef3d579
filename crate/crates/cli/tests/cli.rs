use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fwdsearch::ReferenceDistribution;

fn fwdsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwdsearch"))
        .args(args)
        .env("FS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = fwdsearch(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const REGRESSION: &str = "y,x1
1.2,0.3
2.1,1.1
3.3,2.0
3.4,2.7
5.2,3.9
5.0,4.4
6.9,5.2
7.3,6.1
8.4,6.8
19.0,7.5
9.9,8.3
11.2,9.0
11.0,9.6
-3.0,10.4
";

fn records(csv_text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn analyze_reports_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "reg.csv", REGRESSION);
    let text = stdout_ok(&["analyze", data.to_str().unwrap(), "--add-intercept", "--initial", "ols"]);
    let (header, rows) = records(&text);
    for name in ["m", "psi", "z", "d", "sigma", "sigma_corr", "beta_const", "beta_x1", "band_lower", "band_upper"] {
        column(&header, name);
    }
    // m0 defaults to n / 2 = 7, so steps 7..13
    assert_eq!(rows.len(), 7);
    let (m, z, d) = (column(&header, "m"), column(&header, "z"), column(&header, "d"));
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[m].parse::<usize>().unwrap(), 7 + k);
        assert!(row[d].parse::<f64>().unwrap() <= row[z].parse::<f64>().unwrap());
    }
    // the two planted outliers enter last and stand out
    let last: f64 = rows[6][z].parse().unwrap();
    let before: f64 = rows[4][z].parse().unwrap();
    assert!(last > 10.0 * before);
}

#[test]
fn analyze_location_model_from_single_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "loc.csv", "y\n1.0\n1.4\n0.7\n1.1\n9.0\n0.9\n");
    let text = stdout_ok(&["analyze", data.to_str().unwrap()]);
    let (header, rows) = records(&text);
    column(&header, "beta_const");
    assert_eq!(rows.len(), 3);
}

#[test]
fn analyze_json_matches_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "reg.csv", REGRESSION);
    let path = data.to_str().unwrap();
    let csv_text = stdout_ok(&["analyze", path, "--add-intercept", "--seed", "4"]);
    let json_text = stdout_ok(&["analyze", path, "--add-intercept", "--seed", "4", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&json_text).unwrap();
    let (header, rows) = records(&csv_text);
    let json_rows = json["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), rows.len());
    let z = column(&header, "z");
    for (row, jrow) in rows.iter().zip(json_rows) {
        assert_eq!(row[z].parse::<f64>().unwrap(), jrow["z"].as_f64().unwrap());
    }
    assert_eq!(json["regressors"], serde_json::json!(["const", "x1"]));
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "reg.csv", REGRESSION);
    let target = dir.path().join("out.csv");
    let printed = stdout_ok(&[
        "analyze",
        data.to_str().unwrap(),
        "--add-intercept",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert!(printed.is_empty());
    let written = std::fs::read_to_string(&target).unwrap();
    assert_eq!(written, stdout_ok(&["analyze", data.to_str().unwrap(), "--add-intercept"]));
}

#[test]
fn malformed_cell_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "bad.csv", "y,x1\n1.0,2.0\n2.0,abc\n3.0,1.0\n");
    let out = fwdsearch(&["analyze", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2, column 'x1'"), "{err}");
}

#[test]
fn missing_file_and_missing_y_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = fwdsearch(&["analyze", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let data = write(dir.path(), "noy.csv", "a,b\n1,2\n3,4\n");
    let out = fwdsearch(&["analyze", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'y'"));
}

#[test]
fn out_of_range_psi_is_rejected() {
    let out = fwdsearch(&["bands", "--psi-max", "1.0"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn t_without_dof_is_rejected() {
    let out = fwdsearch(&["moments", "--dist", "t"]);
    assert_eq!(out.status.code(), Some(4));
    let out = fwdsearch(&["moments", "--dist", "t", "--dof", "3"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn moments_agree_with_quadrature() {
    for (args, dist) in [
        (vec!["moments"], ReferenceDistribution::standard_normal()),
        (vec!["moments", "--dist", "t", "--dof", "7"], ReferenceDistribution::scaled_t(7.0).unwrap()),
    ] {
        let (header, rows) = records(&stdout_ok(&args));
        assert_eq!(rows.len(), 181);
        let (psi, tau, kappa) = (column(&header, "psi"), column(&header, "tau"), column(&header, "kappa"));
        for row in rows.iter().step_by(10) {
            let p: f64 = row[psi].parse().unwrap();
            let t: f64 = row[tau].parse().unwrap();
            let k: f64 = row[kappa].parse().unwrap();
            assert!((t - dist.truncated_moment_numeric(p, 2).unwrap()).abs() < 1e-10);
            assert!((k - dist.truncated_moment_numeric(p, 4).unwrap()).abs() < 1e-8);
        }
    }
}

#[test]
fn bands_are_ordered_and_narrow_with_n() {
    let width = |n: &str| -> Vec<f64> {
        let text = stdout_ok(&["bands", "--statistic", "corr", "--n", n, "--psi-points", "11"]);
        let (header, rows) = records(&text);
        let (lo, hi) = (column(&header, "lower"), column(&header, "upper"));
        rows.iter()
            .map(|r| r[hi].parse::<f64>().unwrap() - r[lo].parse::<f64>().unwrap())
            .collect()
    };
    let narrow = width("400");
    for (a, b) in width("100").iter().zip(&narrow) {
        assert!(*b > 0.0);
        assert!((a / b - 2.0).abs() < 1e-12);
    }
}

#[test]
fn simulate_single_replicate_json() {
    let text = stdout_ok(&["simulate", "--n", "40", "--reps", "1", "--seed", "5", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["replicates"], 1);
    assert_eq!(json["completed"], 1);
    assert_eq!(json["probes"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_reads_config_file_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "sim.json",
        r#"{
  "dgp": {
    "regime": {"kind": "stationary_ar1", "coef": 0.3},
    "n": 60,
    "dim_x": 2,
    "beta": [0.0, 1.0],
    "sigma": 2.0,
    "error_dist": {"kind": "standard_normal"}
  },
  "replicates": 20,
  "psi_probes": [0.6, 0.8],
  "master_seed": 9
}"#,
    );
    let text = stdout_ok(&["simulate", "--config", config.to_str().unwrap(), "--reps", "5", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["replicates"], 5);
    assert_eq!(json["config"]["dgp"]["n"], 60);
    assert_eq!(json["probes"].as_array().unwrap().len(), 2);
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; rerun with UPDATE_GOLDEN=1", path.display()));
    assert!(expected == actual, "output differs from {}", path.display());
}

#[test]
fn analyze_matches_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "reg.csv", REGRESSION);
    golden(
        "analyze_regression.csv",
        &stdout_ok(&["analyze", data.to_str().unwrap(), "--add-intercept", "--seed", "11"]),
    );
}

#[test]
fn simulate_matches_golden_output() {
    golden(
        "simulate_location.json",
        &stdout_ok(&["simulate", "--n", "50", "--reps", "40", "--seed", "17", "--format", "json"]),
    );
}
