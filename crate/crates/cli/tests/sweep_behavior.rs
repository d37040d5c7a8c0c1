//! Grid sweeps: lexicographic row order, per-cell failure isolation, the
//! cell cap, and agreement with single runs.

mod common;

use common::{column, exit_code, parse_csv, read_output, run, stderr_text, write_config};
use tempfile::tempdir;

const DISCRETE_BASE: &str = r#"
[sweep.base]
lam = 0.0
alpha = 0.0
v_rate = 1.0
duration = 30
horizon = 150
noise = [0.0, 0.0]
flow_kernel = { kind = "power-law", exponent = 1.5 }
impact_kernel = { kind = "power-law", exponent = 0.25 }
"#;

fn run_sweep_config(body: &str) -> (tempfile::TempDir, String) {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), "sweep.toml", body);
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "7",
        "--quiet",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let csv = read_output(&out_dir, "sweep.csv");
    (dir, csv)
}

#[test]
fn stronger_routing_weakens_the_reversal_at_every_excitation_level() {
    // Reading the grid along the alpha axis at each fixed lambda — the
    // second value sits close to the critical excitation — the reversal
    // after the source stops must shrink monotonically.
    let (_dir, csv) = run_sweep_config(&format!(
        r#"
format_version = 1

[sweep]
target = "discrete"

[[sweep.axis]]
name = "alpha"
values = [0.2, 0.45, 0.7, 0.95]

[[sweep.axis]]
name = "lam"
values = [0.2, 0.35]
{DISCRETE_BASE}"#
    ));
    let (header, rows) = parse_csv(&csv);
    assert_eq!(rows.len(), 8);
    let lam_col = column(&header, "lam");
    let rr_col = column(&header, "reversion_ratio");
    let status_col = column(&header, "status");
    for lam in ["0.2", "0.35"] {
        let series: Vec<f64> = rows
            .iter()
            .filter(|r| r[lam_col] == lam)
            .map(|r| {
                assert_eq!(r[status_col], "ok");
                r[rr_col].parse::<f64>().unwrap()
            })
            .collect();
        assert_eq!(series.len(), 4);
        for pair in series.windows(2) {
            assert!(
                pair[1] < pair[0],
                "reversion ratio must fall with alpha at lam={lam}: {series:?}"
            );
        }
    }
}

#[test]
fn rows_follow_the_grid_in_lexicographic_order() {
    let (_dir, csv) = run_sweep_config(&format!(
        r#"
format_version = 1

[sweep]
target = "discrete"

[[sweep.axis]]
name = "alpha"
values = [0.2, 0.5]

[[sweep.axis]]
name = "lam"
values = [0.1, 0.2, 0.3]
{DISCRETE_BASE}"#
    ));
    let (_, rows) = parse_csv(&csv);
    let coords: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r[0].clone(), r[1].clone()))
        .collect();
    let expected: Vec<(String, String)> = [
        ("0.2", "0.1"),
        ("0.2", "0.2"),
        ("0.2", "0.3"),
        ("0.5", "0.1"),
        ("0.5", "0.2"),
        ("0.5", "0.3"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    assert_eq!(coords, expected);
}

#[test]
fn a_single_cell_sweep_matches_the_direct_run() {
    let (_dir, csv) = run_sweep_config(&format!(
        r#"
format_version = 1

[sweep]
target = "discrete"

[[sweep.axis]]
name = "alpha"
values = [0.6]
{DISCRETE_BASE}"#
    ));
    let (header, rows) = parse_csv(&csv);
    assert_eq!(rows.len(), 1, "a 1x1 grid is one row");

    // The same parameters through the single-run command.
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("direct");
    let cfg = write_config(
        dir.path(),
        "direct.toml",
        r#"
format_version = 1

[discrete]
lam = 0.0
alpha = 0.6
v_rate = 1.0
duration = 30
horizon = 150
noise = [0.0, 0.0]
flow_kernel = { kind = "power-law", exponent = 1.5 }
impact_kernel = { kind = "power-law", exponent = 0.25 }
"#,
    );
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "7",
        "--quiet",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let (dheader, drows) = parse_csv(&read_output(&out_dir, "discrete_metrics.csv"));

    for name in ["criticality_margin", "peak", "long_term", "reversion_ratio"] {
        assert_eq!(
            rows[0][column(&header, name)],
            drows[0][column(&dheader, name)],
            "sweep cell and direct run disagree on {name}"
        );
    }
}

#[test]
fn a_failing_cell_is_reported_and_the_sweep_continues() {
    let (_dir, csv) = run_sweep_config(&format!(
        r#"
format_version = 1

[sweep]
target = "discrete"

[[sweep.axis]]
name = "lam"
values = [0.3, 0.55]
{DISCRETE_BASE}"#
    ));
    let (header, rows) = parse_csv(&csv);
    let status = column(&header, "status");
    let error = column(&header, "error");
    assert_eq!(rows[0][status], "ok");
    assert_eq!(rows[1][status], "failed");
    assert!(rows[1][error].contains("supercritical"), "row: {:?}", rows[1]);
    assert!(rows[1][column(&header, "peak")].is_empty());
}

#[test]
fn an_oversized_grid_is_refused_up_front() {
    let dir = tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "big.toml",
        &format!(
            r#"
format_version = 1

[sweep]
target = "discrete"
max_cells = 4

[[sweep.axis]]
name = "alpha"
values = [0.1, 0.2, 0.3]

[[sweep.axis]]
name = "lam"
values = [0.1, 0.2]
{DISCRETE_BASE}"#
        ),
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "--seed", "1", "--out", "o"]);
    assert_eq!(exit_code(&out), 2);
    let err = stderr_text(&out);
    assert!(err.contains("max_cells"), "stderr: {err}");
    assert!(err.contains('6'), "stderr should say how big the grid is: {err}");
}

#[test]
fn an_axis_that_is_not_a_field_of_the_target_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "badaxis.toml",
        &format!(
            r#"
format_version = 1

[sweep]
target = "discrete"

[[sweep.axis]]
name = "bogus"
values = [1.0]
{DISCRETE_BASE}"#
        ),
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "--seed", "1", "--out", "o"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("bogus"), "stderr: {}", stderr_text(&out));
}

#[test]
fn duplicate_axis_names_are_rejected() {
    let dir = tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dup.toml",
        &format!(
            r#"
format_version = 1

[sweep]
target = "discrete"

[[sweep.axis]]
name = "lam"
values = [0.1]

[[sweep.axis]]
name = "lam"
values = [0.2]
{DISCRETE_BASE}"#
        ),
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "--seed", "1", "--out", "o"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("duplicate"));
}

#[test]
fn a_dotted_axis_path_reaches_into_a_nested_table() {
    // Sweeping the flow kernel's tail exponent changes the critical
    // excitation: heavier tails (smaller exponent) mean more total kernel
    // mass, hence a smaller criticality margin at fixed lambda.
    let (_dir, csv) = run_sweep_config(
        r#"
format_version = 1

[sweep]
target = "discrete"

[[sweep.axis]]
name = "flow_kernel.exponent"
values = [1.3, 1.6, 2.5]

[sweep.base]
lam = 0.15
alpha = 0.5
v_rate = 1.0
duration = 30
horizon = 150
noise = [0.0, 0.0]
flow_kernel = { kind = "power-law", exponent = 1.5 }
impact_kernel = { kind = "power-law", exponent = 0.25 }
"#,
    );
    let (header, rows) = parse_csv(&csv);
    let margin = column(&header, "criticality_margin");
    let margins: Vec<f64> = rows
        .iter()
        .map(|r| r[margin].parse::<f64>().unwrap())
        .collect();
    assert_eq!(margins.len(), 3);
    assert!(
        margins[0] < margins[1] && margins[1] < margins[2],
        "margins must grow with the tail exponent: {margins:?}"
    );
}
