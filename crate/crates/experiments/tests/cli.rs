//! End-to-end runs of the `coopsense` binary.

use std::process::{Command, Output};

use coopsense_experiments::REFERENCE_CONFIG;

fn coopsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopsense"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

fn desk_config() -> tempfile::NamedTempFile {
    let file = tempfile::NamedTempFile::new().unwrap();
    let text = REFERENCE_CONFIG.replace("x_FC = 600", "x_FC = 300");
    std::fs::write(file.path(), text).unwrap();
    file
}

#[test]
fn single_point_gives_header_and_one_row() {
    let cfg = desk_config();
    let out = coopsense(&["run", "--config", cfg.path().to_str().unwrap(), "--sweep", "tau1=2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    let lines = data_lines(&csv);
    assert_eq!(lines.len(), 2, "{csv}");
    assert_eq!(
        lines[0],
        "preset,engine,tail_mode,policy,tau1,metric_name,value,stderr,n_trials,residual_bound,error"
    );
    assert!(lines[1].starts_with("custom,analytic,"), "{}", lines[1]);
    assert!(csv.starts_with("# coopsense "));
}

#[test]
fn monte_carlo_runs_repeat_exactly() {
    let cfg = desk_config();
    let args = [
        "run",
        "--config",
        cfg.path().to_str().unwrap(),
        "--engine",
        "both",
        "--trials",
        "2000",
        "--seed",
        "5",
        "--metric",
        "P_FA/aggregate",
        "--metric",
        "P_MD/memoryless",
    ];
    let a = coopsense(&args);
    let b = coopsense(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(data_lines(&stdout(&a)).len(), 5);
}

#[test]
fn sweeps_multiply() {
    let cfg = desk_config();
    let out = coopsense(&[
        "run",
        "--config",
        cfg.path().to_str().unwrap(),
        "--sweep",
        "tau1=1,2,3",
        "--sweep",
        "lambda=2,5",
    ]);
    assert!(out.status.success());
    assert_eq!(data_lines(&stdout(&out)).len(), 1 + 6);
}

#[test]
fn bad_input_exits_with_one() {
    let cfg = desk_config();
    let path = cfg.path().to_str().unwrap();
    for args in [
        vec!["run", "--config", path, "--sweep", "mass=1"],
        vec!["run", "--config", path, "--metric", "P_XX/memoryless"],
        vec!["run", "--preset", "fig9"],
        vec!["run", "--config", "/nonexistent/file.cfg"],
        vec!["run"],
    ] {
        let out = coopsense(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn failing_points_are_reported_in_the_error_column() {
    let cfg = desk_config();
    let out = coopsense(&[
        "run",
        "--config",
        cfg.path().to_str().unwrap(),
        "--sweep",
        "alpha=1.5,0.8",
        "--metric",
        "P_e_L/type-a",
    ]);
    assert!(out.status.success());
    let csv = stdout(&out);
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains("alpha"), "{}", rows[1]);
    assert!(rows[2].ends_with(','), "{}", rows[2]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning:"));
}

#[test]
fn validate_reports_derived_quantities() {
    let cfg = desk_config();
    let out = coopsense(&["validate", "--config", cfg.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("K=5"), "{text}");
    assert!(text.contains("flow: not checked"));
}

#[test]
fn presets_are_listed() {
    let out = coopsense(&["presets"]);
    let text = stdout(&out);
    for name in coopsense_experiments::PRESET_NAMES {
        assert!(text.contains(name), "{name}");
    }
}
