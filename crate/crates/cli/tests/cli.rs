use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use qinf_cli::ExperimentConfig;

fn qinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qinf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn expand_prints_digits() {
    let o = qinf(&["expand", "--vector", "luroth", "--x", "1/3", "--depth", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0,2,0,0");
}

#[test]
fn exit_codes() {
    assert_eq!(qinf(&["expand", "--x", "1", "--depth", "3"]).status.code(), Some(2));
    assert_eq!(qinf(&["expand", "--depth", "3"]).status.code(), Some(2));
    assert_eq!(qinf(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(qinf(&["decode", "--digits", "0,1", "--tail", "unspecified"]).status.code(), Some(2));
    assert_eq!(qinf(&["expand", "--vector", "cauchy", "--x", "1/2"]).status.code(), Some(2));
    assert_eq!(qinf(&["scenario", "no-such-scenario"]).status.code(), Some(2));
    assert_eq!(qinf(&["check-faithful", "--vector", "geometric:1/2"]).status.code(), Some(0));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gap");
    // Three coarse scales put the box-count slope far above the 0.3 threshold.
    let o = qinf(&[
        "scenario",
        "thm2-gap",
        "--samples",
        "200",
        "--words",
        "2",
        "--scales",
        "1,2,3",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL unrestricted_proxy_below_0.3"));
    assert!(out.join("checks.json").exists());
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "vector = \"geometric:1/2\"\nx = \"3/4\"\ndepth = 2\n").unwrap();
    let o = qinf(&["expand", "--config", path.to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "2,0");
    let o = qinf(&["expand", "--config", path.to_str().unwrap(), "--depth", "4"]);
    assert_eq!(stdout(&o).trim(), "2,0,0,0");
    std::fs::write(&path, "dpeth = 2\n").unwrap();
    assert_eq!(qinf(&["expand", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn outputs_carry_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("digits.csv");
    let o = qinf(&["expand", "--x", "1/3", "--depth", "4", "--seed", "5", "-o", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = read(&csv);
    assert!(text.starts_with("# qinf "));
    // expand draws nothing at random, so no seed is recorded as used.
    assert!(text.contains("# seed: none"));
    assert!(text.contains("#   seed = 5"));
    assert!(text.contains("# config:"));
    assert!(text.lines().any(|l| l == "0,2,0,0"));

    let json = dir.path().join("verdict.json");
    let o = qinf(&["check-faithful", "--format", "json", "-o", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(&json)).unwrap();
    assert_eq!(v["header"]["tool"], "qinf");
    assert!(v["header"]["seed"].is_null());
    assert_eq!(v["header"]["config"]["format"], "json");
    assert!(v["report"].is_object());
}

#[test]
fn scenario_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = qinf(&["scenario", "lln", "--samples", "2000", "--depth", "200", "-o", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "lln.csv"));
    assert!(names.iter().any(|n| n == "checks.json"));
    for name in names {
        if !name.to_string_lossy().ends_with(".svg") {
            assert_eq!(read(&a.join(&name)), read(&b.join(&name)), "{name:?}");
        }
    }
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop::option::of(prop_oneof![Just("luroth".to_string()), Just("geometric:1/3".to_string())]),
        prop::option::of(any::<u64>()),
        prop::option::of(0usize..10_000),
        prop::option::of(prop::collection::vec(0.01f64..1.0, 1..5)),
        prop::option::of(prop::collection::vec(1u32..30, 1..5)),
        prop::option::of("[a-z0-9/]{1,12}"),
        prop::option::of(any::<bool>()),
    )
        .prop_map(|(vector, seed, depth, alpha_grid, scales, x, svg)| ExperimentConfig {
            vector,
            seed,
            depth,
            alpha_grid,
            scales,
            x,
            svg,
            ..Default::default()
        })
}

proptest! {
    #[test]
    fn config_round_trips_through_toml(cfg in config()) {
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn merge_prefers_the_override(a in config(), b in config()) {
        let m = a.clone().merge(b.clone());
        prop_assert_eq!(m.seed, b.seed.or(a.seed));
        prop_assert_eq!(m.depth, b.depth.or(a.depth));
        prop_assert_eq!(m.vector, b.vector.or(a.vector));
    }
}
