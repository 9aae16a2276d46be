use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssr_core::sim::read_path_dump;

const BIN: &str = env!("CARGO_BIN_EXE_ssr-lab");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("SSRLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// `column → value` for every data row of a CSV document.
fn csv_rows(text: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == name).unwrap_or_else(|| panic!("no column {name}")).1
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &[&str] = &["--paths", "4000", "--steps", "16", "--antithetic", "--seed", "7"];

fn flat_exp() -> String {
    configs_dir().join("flat_exp.json").to_str().unwrap().to_string()
}

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let o = run(&["estimate", "--config", "/no/such/config.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/config.json"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn manifest_violations_exit_2() {
    let cfg = flat_exp();
    for bad in [
        vec!["estimate", "--config", &cfg, "--steps", "4"],
        vec!["estimate", "--config", &cfg, "--paths", "4001", "--antithetic"],
        vec!["estimate", "--config", &cfg, "--workers", "zero"],
        vec!["estimate"],
        vec!["sweep-eps", "--config", &cfg, "--values", "0.1,0.1"],
        vec!["sweep-T", "--config", &cfg, "--values", "-1"],
    ] {
        let o = run(&bad);
        assert_eq!(o.status.code(), Some(2), "{bad:?}: {}", stderr(&o));
    }
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "bad.json", r#"{"spot0": 1.0, "maturity": -1.0}"#);
    let o = run(&["limit", "--config", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json"));
}

#[test]
fn zero_epsilon_is_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(flat_exp()).unwrap().replace("0.05", "0.0");
    let p = write_config(dir.path(), "eps0.json", &text);
    let mut args = vec!["estimate", "--config", p.as_str()];
    args.extend_from_slice(SMALL);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert_eq!(field(&rows[0], "X").parse::<f64>().unwrap(), 0.0);
    assert_eq!(field(&rows[0], "warning"), "degenerate_denominator");
    assert_eq!(field(&rows[0], "wall_time_s"), "");
}

#[test]
fn demo_config_gives_finite_ratio() {
    let cfg = configs_dir().join("two_factor_bergomi.json");
    let mut args = vec!["estimate", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let r: f64 = field(&rows[0], "R").parse().unwrap();
    let se: f64 = field(&rows[0], "R_se").parse().unwrap();
    assert!(r.is_finite() && se > 0.0, "R={r} se={se}");
}

#[test]
fn limit_reports_both_limits() {
    let o = run(&["limit", "--config", configs_dir().join("rough_h01.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    let row = &rows[0];
    assert_eq!(field(row, "short_maturity_status"), "ok");
    assert_eq!(field(row, "small_vol_status"), "ok");
    let short: f64 = field(row, "short_maturity").parse().unwrap();
    let small: f64 = field(row, "small_vol").parse().unwrap();
    // flat curve, single power kernel: both limits equal H + 3/2
    assert!((short - 1.6).abs() < 1e-15);
    assert!((small - 1.6).abs() < 1e-8);
    for c in ["A", "B", "C", "D", "g0", "H"] {
        assert!(field(row, c).parse::<f64>().is_ok(), "{c}");
    }
}

#[test]
fn failed_hypothesis_is_data() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "cancel.json",
        r#"{"spot0": 1.0, "maturity": 1.0, "curve": {"type": "flat", "v0": 0.04},
            "factors": [{"rho": 0.5, "kernel": {"type": "exp", "a": 1.0, "b": 1.0}},
                        {"rho": -0.5, "kernel": {"type": "exp", "a": 1.0, "b": 1.0}}]}"#,
    );
    let o = run(&["limit", "--config", &p, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["short_maturity_status"], "hypothesis_not_satisfied");
    assert!(v[0]["short_maturity"].is_null());
    assert_eq!(v[0]["small_vol_status"], "hypothesis_not_satisfied");
}

#[test]
fn single_value_sweep_matches_estimate() {
    let cfg = flat_exp();
    let mut est = vec!["estimate", "--config", cfg.as_str()];
    est.extend_from_slice(SMALL);
    let mut sweep = vec!["sweep-eps", "--config", cfg.as_str(), "--values", "0.05"];
    sweep.extend_from_slice(SMALL);
    let e = run(&est);
    let s = run(&sweep);
    assert_eq!(s.status.code(), Some(0), "{}", stderr(&s));
    let e = csv_rows(&stdout(&e));
    let s = csv_rows(&stdout(&s));
    assert_eq!(s.len(), 2);
    assert_eq!(field(&s[0], "row"), "limit");
    assert_eq!(field(&s[1], "row"), "mc");
    assert_eq!(field(&s[1], "status"), "ok");
    for (k, v) in &e[0] {
        assert_eq!(field(&s[1], k), v, "{k}");
    }
}

#[test]
fn sweep_rows_are_sorted_with_limit_first() {
    let cfg = configs_dir().join("rough_h01.json");
    let mut args = vec!["sweep-T", "--config", cfg.to_str().unwrap(), "--values", "0.2,0.1,0.05"];
    args.extend_from_slice(SMALL);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(field(&rows[0], "row"), "limit");
    assert_eq!(field(&rows[0], "R").parse::<f64>().unwrap(), 1.6);
    let t: Vec<f64> = rows[1..].iter().map(|r| field(r, "maturity").parse().unwrap()).collect();
    assert_eq!(t, vec![0.05, 0.1, 0.2]);
}

#[test]
fn output_is_worker_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flat_exp();
    let mut files = Vec::new();
    for (i, w) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.csv"));
        let mut args = vec!["sweep-eps", "--config", cfg.as_str(), "--values", "0.4,0.1", "--workers", w];
        args.extend_from_slice(SMALL);
        args.extend_from_slice(&["--out", out.to_str().unwrap()]);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
        files.push(std::fs::read(out).unwrap());
    }
    assert_eq!(files[0], files[1]);

    // SSRLAB_WORKERS is honoured when --workers is absent
    let mut args = vec!["sweep-eps", "--config", cfg.as_str(), "--values", "0.4,0.1"];
    args.extend_from_slice(SMALL);
    let o = Command::new(BIN).args(&args).env("SSRLAB_WORKERS", "2").output().unwrap();
    assert_eq!(o.stdout, files[0]);
    let o = Command::new(BIN).args(&args).env("SSRLAB_WORKERS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_mirrors_csv() {
    let cfg = flat_exp();
    let mut base = vec!["estimate", "--config", cfg.as_str()];
    base.extend_from_slice(SMALL);
    let csv = csv_rows(&stdout(&run(&base)));
    base.extend_from_slice(&["--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&run(&base).stdout).unwrap();
    let obj = json[0].as_object().unwrap();
    let keys: Vec<&String> = obj.keys().collect();
    let cols: Vec<&String> = csv[0].iter().map(|(k, _)| k).collect();
    assert_eq!(keys, cols);
    for (k, v) in &csv[0] {
        match &obj[k] {
            serde_json::Value::Number(n) => {
                assert_eq!(n.as_f64().unwrap().to_bits(), v.parse::<f64>().unwrap().to_bits(), "{k}")
            }
            serde_json::Value::String(s) => assert_eq!(s, v),
            serde_json::Value::Null => assert_eq!(v, ""),
            other => panic!("{k}: {other}"),
        }
    }
}

#[test]
fn failed_run_leaves_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let o = run(&["estimate", "--config", "/no/such.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn path_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("paths.bin");
    let cfg = flat_exp();
    let mut args = vec!["estimate", "--config", cfg.as_str()];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--dump-paths", dump.to_str().unwrap(), "--dump-limit", "10"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, paths) = read_path_dump(std::fs::File::open(&dump).unwrap()).unwrap();
    assert_eq!((header.n_steps, header.n_paths, header.seed), (16, 10, 7));
    assert_eq!(paths.len(), 10);
    // antithetic partners mirror each other's Brownian increments
    for (a, b) in paths[0].brownian_increments.iter().zip(&paths[1].brownian_increments) {
        assert_eq!(*a, -*b);
    }
}

#[test]
fn selftest_passes_and_reports_injected_failure() {
    let ok = run(&["selftest"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let again = run(&["selftest"]);
    assert_eq!(ok.stdout, again.stdout);
    let rows = csv_rows(&stdout(&ok));
    assert!(rows.iter().all(|r| field(r, "status") == "pass"));
    assert!(stderr(&ok).contains(" s\n"), "per-suite timing on stderr");

    let bad = run(&["selftest", "--bad-tolerance", "asymptotics"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("failing suites: asymptotics"), "{}", stderr(&bad));
    let rows = csv_rows(&stdout(&bad));
    let failing: Vec<&str> = rows
        .iter()
        .filter(|r| field(r, "status") == "fail")
        .map(|r| field(r, "suite"))
        .collect();
    assert_eq!(failing, vec!["asymptotics"]);

    assert_eq!(run(&["selftest", "--bad-tolerance", "nonsense"]).status.code(), Some(2));
}
