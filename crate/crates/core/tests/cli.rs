use std::io::Write;
use std::process::{Command, Output};

use nwboot::bench::{parse_json_table, PRESETS};
use nwboot::cli::{parse_csv, CliError};

fn nwboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nwboot")).args(args).output().expect("binary runs")
}

fn csv_file(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

fn series_csv(n: usize) -> tempfile::NamedTempFile {
    let mut body = String::from("value\r\n");
    let mut x = 0.3f64;
    for i in 0..n {
        x = (x * x + 1.0).ln() + ((i * 7919 % 101) as f64 / 50.0 - 1.0);
        body.push_str(&format!("{x}\r\n"));
    }
    csv_file(&body)
}

#[test]
fn ingestion_examples() {
    assert_eq!(parse_csv("1.0\n2.0\n3.0").unwrap().len(), 3);
    assert_eq!(parse_csv("x\n4\n5\n").unwrap().values(), &[4.0, 5.0]);
    assert!(matches!(parse_csv("1\n2\n3\n4\nabc\n"), Err(CliError::ParseError(5))));
    assert!(matches!(parse_csv("1\ninf\n"), Err(CliError::ParseError(2))));
}

#[test]
fn interval_on_constant_series_has_zero_width() {
    let f = csv_file(&"2.0\n".repeat(30));
    let out = nwboot(&["interval", "-i", f.path().to_str().unwrap(), "-k", "3", "-B", "20", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for r in v["forecasts"].as_array().unwrap() {
        assert_eq!(r["qpi"][0], r["qpi"][1]);
        assert_eq!(r["ppi"][0], r["ppi"][1]);
    }
}

#[test]
fn zero_horizon_is_a_usage_error() {
    let f = series_csv(40);
    let out = nwboot(&["predict", "-i", f.path().to_str().unwrap(), "-k", "0", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_by_failure_class() {
    assert_eq!(nwboot(&["predict", "--bogus"]).status.code(), Some(1));
    assert_eq!(nwboot(&["fit", "-i", "/definitely/not/here.csv"]).status.code(), Some(2));
    let bad = csv_file("x\n1\n2\noops\n");
    assert_eq!(nwboot(&["fit", "-i", bad.path().to_str().unwrap()]).status.code(), Some(2));
    let short = csv_file("1\n2\n3\n");
    let out = nwboot(&["predict", "-i", short.path().to_str().unwrap(), "-k", "1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes() {
    let f = series_csv(60);
    let path = f.path().to_str().unwrap();
    let args = ["interval", "-i", path, "-k", "2", "-B", "30", "--seed", "42", "--residuals", "predictive"];
    let a = nwboot(&args);
    let b = nwboot(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_seed_is_reported() {
    let f = series_csv(40);
    let out = nwboot(&["predict", "-i", f.path().to_str().unwrap(), "-k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: "));
}

#[test]
fn fit_reports_bandwidths_and_bounds() {
    let f = series_csv(80);
    let out = nwboot(&["fit", "-i", f.path().to_str().unwrap(), "--strategy", "B1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let h_op = v["h_op"].as_f64().unwrap();
    assert!((v["bandwidth"]["h_est"].as_f64().unwrap() - 0.5 * h_op).abs() < 1e-12 * h_op);
    assert!(v["bounds"]["sd_floor"].as_f64().unwrap() > 0.0);
    assert_eq!(v["residuals"]["count"].as_u64().unwrap() + v["residuals"]["excluded"].as_u64().unwrap(), 79);
}

#[test]
fn benchmark_preset_smoke() {
    let out = nwboot(&["benchmark", "--preset", "table1-T100", "--n", "50", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let table = parse_json_table(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 10);
    assert!(table.rows.iter().all(|r| r.mspe.is_some() && r.completed == 50));
}

#[test]
fn benchmark_from_config_file() {
    let cfg = csv_file("dgp = \"model2-normal\"\nT = 40\nN = 3\nM = 50\nB = 10\nppi_M = 10\nmethods = [\"QPI-p\", \"L1-PPI-f-opv\"]\nseed = 3\n");
    let out = nwboot(&["benchmark", "--config", cfg.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("method,horizon,mspe,cvr,len"));
    assert_eq!(text.lines().count(), 11);
    let bad = csv_file("dgp = \"model9\"\nT = 40\nmethods = [\"SPI\"]\n");
    assert_eq!(nwboot(&["benchmark", "--config", bad.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn help_lists_every_preset() {
    let out = nwboot(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for (name, _) in PRESETS {
        assert!(text.contains(name), "{name} missing from help");
    }
}
