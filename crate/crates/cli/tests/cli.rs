use std::path::Path;
use std::process::{Command, Output};

fn espf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_espf"))
        .args(args)
        .env("ESPF_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn run_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let o = espf(&[
        "run",
        &scenario("leo_nominal"),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "measurements.duration_s=3600",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["trace.csv", "summary.json", "config_resolved.txt"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"final_rms\""));
}

#[test]
fn override_appears_in_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = espf(&[
        "run",
        &scenario("leo_nominal.toml"),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "measurements.duration_s=1800",
        "--set",
        "espf.eta=0.8",
        "--seed",
        "42",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = std::fs::read_to_string(dir.path().join("config_resolved.txt")).unwrap();
    assert!(resolved.contains("eta = 0.8"), "{resolved}");
    assert!(resolved.contains("seed = 42"), "{resolved}");
}

#[test]
fn invalid_override_key_exits_2_and_lists_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = espf(&[
        "run",
        &scenario("leo_nominal"),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "espf.etaa=0.9",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("espf.etaa") && err.contains("espf.eta,"),
        "{err}"
    );
}

#[test]
fn missing_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.toml");
    let o = espf(&[
        "run",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(missing.to_str().unwrap()));
    let o = espf(&["compare", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\nseed = \"x\"\n").unwrap();
    let o = espf(&["compare", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // the first reset blows the support past representable sizes
    let dir = tempfile::tempdir().unwrap();
    let o = espf(&[
        "run",
        "leo_bias",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "espf.reset_factor=1e150",
        "--filter",
        "espf",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure"));
}

#[test]
fn compare_prints_a_parseable_table() {
    let o = espf(&[
        "compare",
        &scenario("leo_nominal"),
        "leo_bias",
        "--set",
        "measurements.duration_s=3600",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(
        rows[0],
        [
            "scenario",
            "filter",
            "final_rms",
            "avg_surprisal",
            "necessity_retention_pct"
        ]
    );
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.len() == 5));
    let ukf: Vec<_> = rows.iter().filter(|r| r[1] == "UKF").collect();
    assert_eq!(ukf.len(), 2);
    assert!(ukf.iter().all(|r| r[3] == "N/A" && r[4] == "N/A"));
    assert!(rows[1..].iter().all(|r| r[2].parse::<f64>().is_ok()));
}

#[test]
fn filter_flag_limits_the_table() {
    let o = espf(&[
        "compare",
        "leo_nominal",
        "--filter",
        "ukf",
        "--set",
        "measurements.duration_s=1800",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().contains("\tUKF\t"));
}

#[test]
fn grid_counts() {
    let o = espf(&["grid", "--dim", "1", "--level", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "points\t5");
    // level 1 in two dimensions is the 2 x 2 corner tensor
    let o = espf(&["grid", "--dim", "2", "--level", "1"]);
    assert_eq!(stdout(&o).trim(), "points\t4");
}

#[test]
fn grid_dump_has_one_point_per_row() {
    let o = espf(&["grid", "--dim", "2", "--level", "2", "--dump"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let count: usize = lines
        .next()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(lines.next(), Some("x0,x1"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), count);
    assert!(rows.iter().all(|r| r.split(',').count() == 2));
}

#[test]
fn invalid_grid_arguments_exit_2() {
    assert_eq!(
        espf(&["grid", "--dim", "0", "--level", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        espf(&["grid", "--dim", "2", "--level", "0"]).status.code(),
        Some(2)
    );
}
