use std::path::Path;
use std::process::{Command, Output};

fn granular(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_granular"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synth(dir: &Path, extra: &str) {
    let cfg = format!("[synth]\nstart = \"2011-01-01\"\nend = \"2015-12-31\"\nexpected_claims = 1500\n{extra}");
    std::fs::write(dir.join("granular.toml"), cfg).unwrap();
    ok(&granular(dir, &["synth", "--config", "granular.toml", "--seed", "3"]));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_reproducible_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "");
    let first = std::fs::read(dir.path().join("portfolio.csv")).unwrap();
    synth(dir.path(), "");
    assert_eq!(first, std::fs::read(dir.path().join("portfolio.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "claim_id,claim_type,accident_date,reporting_date,payment_date,amount");
    assert!(lines.count() >= 1000);
    assert_eq!(json(&dir.path().join("truth.json"))["seed"], 3);
}

#[test]
fn reserve_is_deterministic_and_reports_one_year_window() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "");
    ok(&granular(d, &["fit", "--input", "portfolio.csv", "--out", "fit"]));
    let run = |out: &str, workers: &str| {
        let args = [
            "reserve", "--input", "portfolio.csv", "--model", "fit/model.json", "--scenarios", "300", "--seed", "17",
            "--horizon", "one-year", "--valuation-date", "2015-06-30", "--workers", workers, "--out", out,
        ];
        let stdout = ok(&granular(d, &args));
        assert!(stdout.contains("seed: 17"));
        std::fs::read(d.join(out).join("summary.json")).unwrap()
    };
    let a = run("r1", "1");
    let b = run("r2", "3");
    assert_eq!(a, b, "summary differs between runs");
    assert_eq!(std::fs::read(d.join("r1/scenarios.csv")).unwrap(), std::fs::read(d.join("r2/scenarios.csv")).unwrap());

    let s = json(&d.join("r1/summary.json"));
    assert_eq!(s["valuation_date"], "2015-06-30");
    assert_eq!(s["horizon_end"], "2016-06-29");
    assert_eq!(s["window_days"], 365);
    assert_eq!(s["seed"], 17);
    let levels: Vec<f64> =
        s["summary"]["total"]["quantiles"].as_array().unwrap().iter().map(|q| q["level"].as_f64().unwrap()).collect();
    assert!(levels.contains(&0.995), "{levels:?}");
    let cash = std::fs::read_to_string(d.join("r1/cash_flows.csv")).unwrap();
    assert_eq!(cash.lines().next().unwrap(), "period,start,end,mean");
}

#[test]
fn missing_input_exits_with_code_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = granular(dir.path(), &["fit", "--input", "no-such-claims.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-claims.csv"));
}

#[test]
fn bad_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "scenarios = \"many\"\n").unwrap();
    let out = granular(dir.path(), &["reserve", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = granular(dir.path(), &["reserve", "--horizon", "someday"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn model_failure_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = "claim_id,claim_type,accident_date,reporting_date,payment_date,amount\n\
               C1,BodilyInjury,2015-01-01,2015-01-05,2015-02-01,100\n";
    std::fs::write(dir.path().join("tiny.csv"), csv).unwrap();
    let out = granular(dir.path(), &["fit", "--input", "tiny.csv"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_claim_type_skips_inter_type_stage() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "");
    std::fs::write(dir.path().join("bi.toml"), "claim_types = [\"BodilyInjury\"]\n").unwrap();
    let out = granular(dir.path(), &["fit", "--input", "portfolio.csv", "--config", "bi.toml"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("notice:"));
    let report = json(&dir.path().join("fit_report.json"));
    assert!(report["inter_type"].is_null());
    assert_eq!(report["types"].as_array().unwrap().len(), 1);
    assert!(!report["notices"].as_array().unwrap().is_empty());
}

#[test]
fn triangle_and_backtest_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "");
    let stdout = ok(&granular(d, &["triangle", "--input", "portfolio.csv"]));
    assert!(stdout.contains("chain-ladder reserve"));
    let tri = std::fs::read_to_string(d.join("triangle.csv")).unwrap();
    assert_eq!(tri.lines().count(), 6);
    let cl = json(&d.join("chain_ladder.json"));
    assert!(cl["total"].as_f64().unwrap() > 0.0);

    let stdout = ok(&granular(d, &["backtest", "--input", "portfolio.csv", "--scenarios", "200"]));
    assert!(stdout.contains("seed: 1"));
    let bt = json(&d.join("backtest.json"));
    assert_eq!(bt["seed"], 1);
    assert!(bt["percentile"].as_f64().unwrap() >= 0.0);
    assert_eq!(bt["checks"].as_array().unwrap().len(), 4);

    let out = granular(d, &["backtest", "--input", "portfolio.csv", "--valuation-date", "2015-12-01"]);
    assert_eq!(out.status.code(), Some(2));
}
