use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifshitz")).args(args).env("LIFSHITZ_THREADS", "2").output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn energy_is_negative() {
    let out = run(&["energy", "--model", "plasma", "--omega-p", "1", "--a", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["command"], "energy");
    assert_eq!(v["route"], "imaginary_axis");
    assert!(v["value"]["energy"].as_f64().unwrap() < 0.0);
    for key in ["inputs", "units", "truncation_report", "checks"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["inputs"]["a"], 1.0);
}

#[test]
fn report_has_no_trailing_whitespace() {
    let out = run(&["poles"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l == l.trim_end()));
}

#[test]
fn equivalence_check_within_bounds() {
    let out = run(&["equivalence-check", "--sigma", "TM", "--k", "1", "--a", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["value"]["mismatch"].as_f64().unwrap() < v["value"]["combined_bound"].as_f64().unwrap());
    assert_eq!(v["checks"][0]["passed"], true);
}

#[test]
fn fdt_check_two_level() {
    let out = run(&["fdt-check", "--preset", "two-level", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["value"]["abs_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["value"]["lhs"], 1.0);
}

#[test]
fn fdt_check_matrix_files() {
    let dir = std::env::temp_dir().join(format!("lifshitz-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let h = dir.join("h.txt");
    let a = dir.join("a.txt");
    std::fs::write(&h, "# diagonal\n0 0 0 0 0 0\n0 0 1 0 0 0\n0 0 0 0 2.5 0\n").unwrap();
    std::fs::write(&a, "0 0 1 0 0 0.5\n1 0 0 0 1 0\n0 -0.5 1 0 0 0\n").unwrap();
    let out = run(&["fdt-check", "--matrix", h.to_str().unwrap(), "--observable", a.to_str().unwrap(), "--beta", "0.7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(&out)["value"]["abs_error"].as_f64().unwrap() < 1e-10);
    let bad = dir.join("bad.txt");
    std::fs::write(&bad, "0 0 1\n").unwrap();
    let out = run(&["fdt-check", "--matrix", bad.to_str().unwrap(), "--observable", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn validation_errors_exit_2_with_json() {
    for args in [
        &["energy", "--a", "-1"][..],
        &["energy", "--omega-p", "0"],
        &["free-energy", "--a", "1"],
        &["energy", "--model", "plasma", "--gamma", "0.1"],
        &["spectrum", "--model", "drude"],
        &["energy", "--sweep", "beta=1,2"],
        &["energy", "--csv"],
        &["no-such-command"],
        &["energy", "--a", "x"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        let v: serde_json::Value = serde_json::from_str(err.trim_end()).unwrap();
        assert_eq!(v["error"]["kind"], "validation");
    }
}

#[test]
fn config_file_with_flag_override() {
    let path = std::env::temp_dir().join(format!("lifshitz-cfg-{}.conf", std::process::id()));
    std::fs::write(&path, "# geometry\na = 2\nomega_p = 1 # plasma frequency\nmodel = plasma\n").unwrap();
    let p = path.to_str().unwrap();
    let from_file = json(&run(&["energy", "--config", p]));
    assert_eq!(from_file["inputs"]["a"], 2.0);
    let overridden = json(&run(&["energy", "--config", p, "--a", "0.5"]));
    assert_eq!(overridden["inputs"]["a"], 0.5);
    std::fs::write(&path, "colour = blue\n").unwrap();
    assert_eq!(run(&["energy", "--config", p]).status.code(), Some(2));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn csv_sweep_columns_and_order() {
    let out = run(&["energy", "--sweep", "a=50,100,150,200", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.starts_with("parameter,value,result,error_estimate,scaled_result,error\n"));
    let rows = csv_rows(&out);
    let values: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(values, vec![50.0, 100.0, 150.0, 200.0]);
    // E·(2a)³ is nearly constant in the ideal-metal regime
    let scaled: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    assert!((hi - lo) / lo.abs() < 0.05, "{scaled:?}");
}

#[test]
fn anomaly_sweep_is_zero_at_zero_gamma() {
    let rows = csv_rows(&run(&["anomaly", "--t", "0.1", "--sweep", "gamma=0,0.1", "--csv"]));
    assert_eq!(rows[0][2], "0.0");
    assert!(rows[1][2].parse::<f64>().unwrap() != 0.0);
}

#[test]
fn temperature_sweep_approaches_energy() {
    let e = json(&run(&["energy", "--a", "1"]))["value"]["energy"].as_f64().unwrap();
    let rows = csv_rows(&run(&["free-energy", "--a", "1", "--sweep", "t=0.02,0.01,0.005", "--csv"]));
    let errs: Vec<f64> = rows.iter().map(|r| (r[2].parse::<f64>().unwrap() - e).abs()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn sweep_row_failures_are_recorded() {
    let out = run(&["energy", "--sweep", "a=1,-1", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert!(rows[0][5].is_empty() && rows[0][2].parse::<f64>().unwrap() < 0.0);
    assert!(rows[1][2].is_empty() && rows[1][5].contains("a must be positive"));
    let out = run(&["spectrum", "--sweep", "k=1,2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["sweep"]["parameter"], "k");
}

#[test]
fn verbose_summary_on_stderr() {
    let out = run(&["pressure", "--a", "1", "--verbose"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pressure"));
    assert!(json(&out)["value"]["pressure"].as_f64().unwrap() < 0.0);
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_lifshitz")).args(["energy", "--sweep", "a=1,2"]).env("LIFSHITZ_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
