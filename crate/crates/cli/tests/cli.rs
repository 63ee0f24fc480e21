use std::path::Path;
use std::process::Command;
use std::time::Duration;

use noether_paths::profiles::ShapeFunction;
use noether_paths::ErrorKind;
use noether_paths_cli::output::format_float;
use noether_paths_cli::{emit_csv, parse_scenario, run_scenario, write_record, Cell, CliError, ResultRecord, Table};

fn column(record: &ResultRecord, name: &str) -> Vec<f64> {
    let table = &record.tables[0];
    let j = table.columns.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    table
        .rows
        .iter()
        .filter_map(|r| match r[j] {
            Cell::Num(v) => Some(v),
            _ => None,
        })
        .collect()
}

fn run(text: &str) -> ResultRecord {
    run_scenario(&parse_scenario(text).unwrap()).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noether-paths"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn minimal_document_uses_free_defaults() {
    let s = parse_scenario(r#"{"name": "minimal", "experiment": "henstock"}"#).unwrap();
    assert_eq!(s.profile_name, "free");
    assert_eq!(s.shape_name, "zero");
    assert_eq!(s.hbar, 1.0);
    assert_eq!(s.window, (0.0, 1.0));
    for &(x, t) in &[(-3.0, 0.0), (0.0, 0.5), (7.5, 1.0)] {
        assert_eq!(s.system.potential_at(x, t).unwrap(), 0.0);
    }
}

#[test]
fn general_profile_with_proportional_shift_is_the_tdho() {
    let doc = r#"{
        "name": "tdho",
        "profile": {"name": "general",
                    "rho": {"kind": "sqrt_quadratic", "c0": 1, "c1": 0, "c2": 1},
                    "a": {"kind": "proportional", "factor": 0.7}},
        "shape": {"name": "zero"},
        "window": [0, 3],
        "experiment": "potential"
    }"#;
    let s = parse_scenario(doc).unwrap();
    assert_eq!(s.profile_name, "general");
    assert!(matches!(s.system.shape(), ShapeFunction::Zero));
    for &t in &[0.0, 1.0, 2.5] {
        let p = s.system.sample(t).unwrap();
        assert!((p.a - 0.7 * p.rho).abs() < 1e-15);
        // a proportional to rho leaves a pure quadratic: V = -(rho''/rho) x^2 / 2
        let curvature = -p.rho_d2 / p.rho;
        for &x in &[-2.0, 0.5, 3.0] {
            let v = s.system.potential_at(x, t).unwrap();
            assert!((v - 0.5 * curvature * x * x).abs() < 1e-9, "t={t} x={x}");
        }
    }
}

#[test]
fn rho_crossing_zero_is_a_domain_error() {
    let doc =
        r#"{"name": "bad", "profile": {"name": "static_oscillator"}, "window": [0, 2], "experiment": "potential"}"#;
    match parse_scenario(doc) {
        Err(CliError::Module(e)) => {
            assert_eq!(e.kind(), ErrorKind::Domain);
            assert!(e.to_string().contains("not positive"));
        }
        other => panic!("expected a domain error, got {other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.json", doc);
    let status = bin().args(["run"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap().status;
    assert_eq!(status.code(), Some(4));
}

#[test]
fn every_violation_is_reported() {
    let doc = r#"{
        "name": "many",
        "hbar": -1,
        "shape": {"name": "sextic"},
        "grid": {"n": 3},
        "slicing": {"q_max": 40, "engine": "magic"},
        "experiment": {"kind": "invariant", "tol": 0},
        "colour": "red"
    }"#;
    let Err(CliError::Config(errors)) = parse_scenario(doc) else { panic!("expected a config error") };
    for needle in ["hbar", "shape.name", "grid.n", "slicing.q_max", "slicing.engine", "experiment.tol", "colour"] {
        assert!(errors.iter().any(|e| e.contains(needle)), "no message for {needle}: {errors:?}");
    }
    assert_eq!(errors.len(), 7);
}

#[test]
fn syntax_and_unknown_builtins_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    for (file, text) in [
        ("syntax.json", "{\"name\": "),
        ("profile.json", r#"{"name": "p", "profile": {"name": "nope"}, "experiment": "potential"}"#),
        ("experiment.json", r#"{"name": "e", "experiment": "dance"}"#),
    ] {
        let path = write(dir.path(), file, text);
        let out = bin().arg("run").arg(&path).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{file}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn semigroup_needs_zero_shape() {
    let doc = r#"{"name": "s", "shape": {"name": "quadratic"}, "window": [0, 1.5], "experiment": "semigroup"}"#;
    match run_scenario(&parse_scenario(doc).unwrap()) {
        Err(CliError::Module(e)) => assert_eq!(e.kind(), ErrorKind::Invalid),
        other => panic!("expected an invalid-argument error, got {other:?}"),
    }
}

#[test]
fn invariant_run_keeps_drift_below_tolerance() {
    for (x0, v0) in [(1.0, 0.0), (0.5, 1.0)] {
        let doc = format!(
            r#"{{"name": "inv", "profile": {{"name": "tdho_sqrt"}}, "window": [0, 10],
                "experiment": {{"kind": "invariant", "x0": {x0}, "v0": {v0}, "tol": 1e-10}}}}"#
        );
        let r = run(&doc);
        let i0 = column(&r, "invariant")[0];
        let worst = column(&r, "drift").into_iter().fold(0.0, f64::max);
        assert!(worst / i0.abs().max(1.0) <= 1e-8, "start ({x0}, {v0}): {worst:e}");
        assert_eq!(*column(&r, "t").last().unwrap(), 10.0);
    }
}

#[test]
fn free_slice_convergence_gaps_are_roundoff() {
    let doc = r#"{"name": "free", "slicing": {"q_max": 6, "tol": 1e-9},
                  "experiment": {"kind": "slice-converge", "q_start": -0.5, "q_end": 0.7}}"#;
    let r = run(doc);
    let t = &r.tables[0];
    assert_eq!(t.columns, ["q", "m", "re_gamma", "im_gamma", "cauchy_gap"]);
    assert_eq!(t.rows.len(), 6);
    assert_eq!(t.rows[0][4], Cell::Empty);
    assert_eq!(t.rows[5][1], Cell::Int(64));
    let gaps = column(&r, "cauchy_gap");
    assert_eq!(gaps.len(), 5);
    assert!(gaps.iter().all(|&g| g <= 1e-9), "{gaps:?}");
    assert!(r.summary["relative_error_vs_free_kernel"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn reduce_check_on_the_oscillator_agrees_with_direct_slicing() {
    let doc = r#"{"name": "rc", "profile": {"name": "static_oscillator"},
                  "experiment": {"kind": "reduce-check", "direct_q": 12, "field_points": 9}}"#;
    let r = run(doc);
    let diffs = column(&r, "rel_diff");
    assert_eq!(diffs.len(), 9);
    assert!(diffs.iter().all(|&d| d <= 1e-3), "{diffs:?}");
    let field = &r.tables[1];
    assert_eq!(field.suffix.as_deref(), Some("field"));
    assert_eq!(field.columns, ["x", "re_K", "im_K", "abs_K"]);
    assert_eq!(field.rows.len(), 9);
    // cos-profile kernel at T = 1 has constant modulus (2 pi sin 1)^(-1/2)
    let expected = (2.0 * std::f64::consts::PI * 1f64.sin()).powf(-0.5);
    for row in &field.rows {
        let Cell::Num(m) = row[3] else { panic!() };
        assert!((m - expected).abs() < 1e-9);
    }
}

#[test]
fn semigroup_run_reports_every_law_passing() {
    let doc = r#"{"name": "sg", "window": [0, 1.5], "grid": {"n": 1024, "window": "none"},
                  "experiment": {"kind": "semigroup", "dtheta": 0.5, "slices": 3, "horizon": 1.0}}"#;
    let r = run(doc);
    let t = &r.tables[0];
    assert_eq!(t.columns, ["law", "value", "tolerance", "passed"]);
    assert!(t.rows.iter().all(|row| row[3] == Cell::Int(1)), "{:?}", t.rows);
    assert!(r.summary["omega_hat"].as_f64().unwrap().abs() <= 0.02);
}

#[test]
fn identical_configs_give_identical_csv() {
    let doc = r#"{"name": "det", "profile": {"name": "uniform_force", "params": {"force": 0.5}},
                  "shape": {"name": "quadratic", "params": {"k": 1}},
                  "slicing": {"q_max": 5, "engine": "grid"},
                  "experiment": {"kind": "slice-converge", "q_start": 0.2, "q_end": -0.1}}"#;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        write_record(&run(doc), dir.path(), Duration::ZERO).unwrap();
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("det.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(a.path().join("det.meta.json").exists());
}

#[test]
fn empty_result_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    let table =
        Table { suffix: None, columns: vec!["x".into(), "re_K".into(), "im_K".into(), "abs_K".into()], rows: vec![] };
    emit_csv(&table, &path).unwrap();
    emit_csv(&table, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "x,re_K,im_K,abs_K\n");
}

#[test]
fn floats_round_trip_through_the_csv_format() {
    for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
        let s = format_float(v);
        assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        let mantissa = s.split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    }
}

#[test]
fn potential_table_has_one_row_per_sample() {
    let doc = r#"{"name": "pot", "profile": {"name": "uniform_force", "params": {"force": 2}},
                  "experiment": {"kind": "potential", "x_min": -1, "x_max": 1, "points": 5, "times": [0, 0.5]}}"#;
    let r = run(doc);
    assert_eq!(r.tables[0].rows.len(), 10);
    let (x, v, g) = (column(&r, "x"), column(&r, "V"), column(&r, "dV_dx"));
    for i in 0..10 {
        assert!((v[i] - 2.0 * x[i]).abs() < 1e-12);
        assert!((g[i] - 2.0).abs() < 1e-12);
    }
}

#[test]
fn henstock_run_matches_known_values() {
    let r = run(r#"{"name": "h", "experiment": {"kind": "henstock", "eps": 1e-3}}"#);
    let errors = column(&r, "abs_error");
    assert_eq!(errors[0], 0.0);
    assert!(errors[1] <= 1e-3);
    assert!(errors[2] <= 1e-8 && errors[3] <= 1e-8);
}

#[test]
fn batch_runs_every_scenario_and_list_profiles_names_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    std::fs::create_dir(&configs).unwrap();
    write(&configs, "a.json", r#"{"name": "a", "experiment": "henstock"}"#);
    write(&configs, "b.json", r#"{"name": "b", "experiment": {"kind": "potential", "points": 3}}"#);
    let out = dir.path().join("out");
    let status = bin().arg("run").arg("--batch").arg(&configs).arg("--out").arg(&out).output().unwrap().status;
    assert!(status.success());
    for f in ["a.csv", "a.meta.json", "b.csv", "b.meta.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let listing = bin().arg("list-profiles").output().unwrap();
    assert!(listing.status.success());
    let text = String::from_utf8(listing.stdout).unwrap();
    for name in ["free", "tdho_sqrt", "general", "quartic", "reduce-check"] {
        assert!(text.contains(name), "{name}");
    }
}
