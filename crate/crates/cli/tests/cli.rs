use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn crashvol(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crashvol"));
    cmd.args(args).env_remove("CRASHVOL_LOG");
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = crashvol(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

fn value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

fn both_inputs() -> Vec<String> {
    vec!["--input".into(), data("dc_2010_2014.csv"), "--input".into(), data("dc_2015_2019.csv")]
}

fn with_inputs<'a>(inputs: &'a [String], rest: &[&'a str]) -> Vec<&'a str> {
    let mut v: Vec<&str> = rest.to_vec();
    v.extend(inputs.iter().map(String::as_str));
    v
}

#[test]
fn diagnose_writes_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let input = data("dc_2010_2014.csv");
    ok(&["diagnose", "--input", &input, "--out", out]);
    let vol = read(&dir.path().join("volatility.csv"));
    assert!((value(&vol, "window_vol") - 0.6333).abs() < 5e-4);
    assert!((value(&vol, "vol_of_vol") - 0.2626).abs() < 5e-4);
    assert!((value(&read(&dir.path().join("growth.csv")), "growth") - 0.1361).abs() < 5e-3);
    let season = read(&dir.path().join("season.csv"));
    let spikes: Vec<&str> = season
        .lines()
        .filter(|l| l.ends_with(",true"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(spikes, ["1", "7", "8"]);
    for f in ["distribution.csv", "rate_histogram.csv", "logdiff_histogram.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn fit_forecast_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.txt");
    let forecast = dir.path().join("forecast.csv");
    let inputs = both_inputs();
    let p = params.to_str().unwrap();
    let f = forecast.to_str().unwrap();
    ok(&with_inputs(
        &inputs,
        &["fit", "--train-start", "2010-01", "--train-end", "2014-12", "--out", p],
    ));
    let kv = read(&params);
    assert!(kv.contains("model = heston") || kv.contains("model=heston"), "{kv}");
    ok(&["forecast", "--params", p, "--seed", "1", "--paths", "500", "--out", f]);
    let text = read(&forecast);
    assert_eq!(text.lines().count(), 61);
    assert!(text.starts_with("year,month,median,"));
    let eval = dir.path().join("eval");
    ok(&with_inputs(
        &inputs,
        &["evaluate", "--forecast", f, "--model-id", "heston", "--out", eval.to_str().unwrap()],
    ));
    let report = read(&eval.join("report.csv"));
    assert!(report.lines().last().unwrap().starts_with("heston,overall,"));
    assert_eq!(read(&eval.join("coverage.csv")).lines().count(), 3);
}

#[test]
fn arima_fit_forecast_needs_no_seed() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("arima.txt");
    let p = params.to_str().unwrap();
    let inputs = both_inputs();
    ok(&with_inputs(
        &inputs,
        &["fit", "--model", "arima-garch", "--train-start", "2010-01", "--train-end", "2014-12", "--out", p],
    ));
    let out = ok(&["forecast", "--params", p, "--horizon", "12"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 13);
}

#[test]
fn rho_override_is_recorded() {
    let inputs = both_inputs();
    let out = ok(&with_inputs(
        &inputs,
        &["fit", "--train-start", "2010-01", "--train-end", "2014-12", "--rho", "0"],
    ));
    let text = String::from_utf8(out.stdout).unwrap();
    let rho = text
        .lines()
        .find(|l| l.split('=').next().unwrap().trim() == "rho")
        .unwrap();
    assert_eq!(rho.split('=').nth(1).unwrap().trim().parse::<f64>().unwrap(), 0.0);
}

fn backtest_files(threads: usize, model: &str) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let inputs = both_inputs();
    let args = with_inputs(
        &inputs,
        &[
            "backtest", "--model", model, "--train-start", "2010-01", "--train-end", "2014-12", "--test-start",
            "2015-01", "--test-end", "2019-12", "--seed", "42", "--paths", "1000", "--out",
            dir.path().to_str().unwrap(),
        ],
    );
    let out = crashvol(&args, Some(threads));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn backtest_is_byte_identical_across_thread_counts() {
    for model in ["heston", "vasicek"] {
        let one = backtest_files(1, model);
        assert_eq!(one.len(), 4);
        assert_eq!(one, backtest_files(4, model), "{model}");
        assert_eq!(one, backtest_files(1, model), "{model}");
    }
}

fn single_error_line(out: &Output, code: &str, exit: i32) {
    assert_eq!(out.status.code(), Some(exit));
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    assert!(lines[0].starts_with(&format!("{code}: ")), "{stderr}");
}

#[test]
fn error_reporting() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = crashvol(&["diagnose", "--input", empty.to_str().unwrap(), "--out", "x"], None);
    single_error_line(&out, "E_PARSE", 1);

    let missing = dir.path().join("nope.csv");
    let out = crashvol(&["diagnose", "--input", missing.to_str().unwrap(), "--out", "x"], None);
    single_error_line(&out, "E_IO", 1);

    let inputs = both_inputs();
    let args = with_inputs(
        &inputs,
        &[
            "backtest", "--train-start", "2010-01", "--train-end", "2014-12", "--test-start", "2015-01",
            "--test-end", "2019-12", "--out", dir.path().to_str().unwrap(),
        ],
    );
    single_error_line(&crashvol(&args, None), "E_VALIDATION", 1);

    let args = with_inputs(&inputs, &["fit", "--train-start", "2010-13", "--train-end", "2014-12"]);
    single_error_line(&crashvol(&args, None), "E_USAGE", 2);

    let args = with_inputs(
        &inputs,
        &[
            "backtest", "--train-start", "2010-01", "--train-end", "2014-12", "--test-start", "2015-03",
            "--test-end", "2019-12", "--seed", "1", "--out", dir.path().to_str().unwrap(),
        ],
    );
    single_error_line(&crashvol(&args, None), "E_RANGE", 1);
}
