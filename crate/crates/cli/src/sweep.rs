//! Parameter sweeps: a cross-product grid over named fields of a base
//! command block, one CSV row of metrics per cell. Cells run in parallel;
//! a failing cell marks its row `failed` and the sweep continues.

use rayon::prelude::*;
use serde::Deserialize;

use impactlab::diffusivity::{log_spaced_windows, long_memory_report, simulate_stationary_flow};
use impactlab::numeric::mix_seed;
use impactlab::propagator::{
    asymptote, criticality_margin, price_closed, skeleton_metrics, ContinuousParams,
};

use crate::config::{DiffusivityBlock, DiscreteBlock, SweepAxis, SweepBlock, SweepTarget};
use crate::runner::{discrete_params, flow_params, RunContext};
use crate::CliError;

/// Single-point counterpart of the continuous command block: one `alpha`
/// instead of a list, metrics read at `duration` and `t_max`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuousPoint {
    alpha: f64,
    lam: f64,
    beta: f64,
    rho: f64,
    v_rate: f64,
    duration: f64,
    t_max: f64,
}

fn metric_columns(target: SweepTarget) -> &'static [&'static str] {
    match target {
        SweepTarget::Continuous => &["asymptote", "peak", "long_term", "reversion_ratio"],
        SweepTarget::Discrete => &["criticality_margin", "peak", "long_term", "reversion_ratio"],
        SweepTarget::Diffusivity => &[
            "gamma",
            "gamma_se",
            "amplification",
            "variance_exponent",
            "variance_se",
        ],
    }
}

/// Renders one axis value for the CSV coordinate columns.
fn value_display(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(x) => x.to_string(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Coordinate indices of cell `idx` with the first axis slowest, so
/// increasing `idx` walks the grid in lexicographic coordinate order.
fn coordinates(axes: &[SweepAxis], idx: usize) -> Vec<usize> {
    let mut coords = vec![0usize; axes.len()];
    let mut rest = idx;
    for (j, axis) in axes.iter().enumerate().rev() {
        coords[j] = rest % axis.values.len();
        rest /= axis.values.len();
    }
    coords
}

/// Builds the cell's block table: the base table with every axis field
/// replaced by this cell's value. Axis names may be dotted paths
/// (`flow_kernel.rate`) into nested tables.
fn cell_table(block: &SweepBlock, coords: &[usize]) -> Result<toml::value::Table, String> {
    let mut table = match &block.base {
        toml::Value::Table(t) => t.clone(),
        _ => return Err("sweep.base must be a table".into()),
    };
    for (axis, &ci) in block.axes.iter().zip(coords) {
        let value = axis.values[ci].clone();
        let mut parts = axis.name.split('.').peekable();
        let mut current = &mut table;
        loop {
            let key = parts.next().expect("split yields at least one part");
            if parts.peek().is_none() {
                current.insert(key.to_string(), value);
                break;
            }
            let entry = current
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::value::Table::new()));
            current = entry.as_table_mut().ok_or_else(|| {
                format!("axis {:?}: field {key:?} in the base is not a table", axis.name)
            })?;
        }
    }
    Ok(table)
}

fn run_cell(
    target: SweepTarget,
    table: toml::value::Table,
    seed: u64,
) -> Result<Vec<String>, String> {
    let value = toml::Value::Table(table);
    match target {
        SweepTarget::Continuous => {
            let point: ContinuousPoint = value.try_into().map_err(|e| e.to_string())?;
            let cp = ContinuousParams {
                alpha: point.alpha,
                v_rate: point.v_rate,
                lam: point.lam,
                beta: point.beta,
                rho: point.rho,
                duration: point.duration,
            };
            let asym = asymptote(&cp).map_err(|e| format!("propagator: {e}"))?;
            let peak =
                price_closed(&cp, point.duration).map_err(|e| format!("propagator: {e}"))?;
            let end = price_closed(&cp, point.t_max).map_err(|e| format!("propagator: {e}"))?;
            let rr = if peak == 0.0 {
                String::new()
            } else {
                ((peak - end) / peak).to_string()
            };
            Ok(vec![
                asym.to_string(),
                peak.to_string(),
                end.to_string(),
                rr,
            ])
        }
        SweepTarget::Discrete => {
            let block: DiscreteBlock = value.try_into().map_err(|e| e.to_string())?;
            let params = discrete_params(&block, seed);
            let margin = criticality_margin(&params).map_err(|e| format!("propagator: {e}"))?;
            let m = skeleton_metrics(&params).map_err(|e| format!("propagator: {e}"))?;
            Ok(vec![
                margin.to_string(),
                m.peak.to_string(),
                m.long_term.to_string(),
                m.reversion_ratio.map_or(String::new(), |r| r.to_string()),
            ])
        }
        SweepTarget::Diffusivity => {
            let block: DiffusivityBlock = value.try_into().map_err(|e| e.to_string())?;
            let windows = log_spaced_windows(
                block.windows.lo,
                block.windows.hi,
                block.windows.count,
            )
            .map_err(|e| format!("diffusivity: {e}"))?;
            let flow = simulate_stationary_flow(&flow_params(&block, seed))
                .map_err(|e| format!("diffusivity: {e}"))?;
            let report = long_memory_report(&flow, block.delta, block.acf_range, &windows)
                .map_err(|e| format!("diffusivity: {e}"))?;
            Ok(vec![
                report.gamma.value.to_string(),
                report.gamma.std_err.to_string(),
                report.amplification.to_string(),
                report.variance_exponent.value.to_string(),
                report.variance_exponent.std_err.to_string(),
            ])
        }
    }
}

/// CSV field sanitizer for error messages: strips the delimiter and line
/// breaks so a failed row stays a single well-formed line.
fn sanitize(msg: &str) -> String {
    msg.replace(['\n', '\r'], " ").replace(',', ";")
}

pub fn run_sweep(block: &SweepBlock, ctx: &mut RunContext) -> Result<(), CliError> {
    if block.axes.is_empty() {
        return Err(CliError::Config(
            "sweep: at least one [[sweep.axis]] is required".into(),
        ));
    }
    for (i, axis) in block.axes.iter().enumerate() {
        if axis.name.is_empty() || axis.name.split('.').any(str::is_empty) {
            return Err(CliError::Config(format!(
                "sweep axis {}: name must be a field name or dotted path",
                i + 1
            )));
        }
        if axis.values.is_empty() {
            return Err(CliError::Config(format!(
                "sweep axis {:?}: values must not be empty",
                axis.name
            )));
        }
        if block.axes[..i].iter().any(|other| other.name == axis.name) {
            return Err(CliError::Config(format!(
                "sweep axis {:?}: duplicate axis name",
                axis.name
            )));
        }
    }
    let mut total: usize = 1;
    for axis in &block.axes {
        total = total.checked_mul(axis.values.len()).ok_or_else(|| {
            CliError::Config("sweep: grid size overflows".into())
        })?;
    }
    if total > block.max_cells {
        return Err(CliError::Config(format!(
            "sweep: grid has {total} cells, more than max_cells = {} — shrink the axes or raise max_cells",
            block.max_cells
        )));
    }

    // Schema check up front: the first cell must at least deserialize into
    // the target block, otherwise the whole request is malformed (e.g. an
    // axis name that is not a field of the target).
    let probe = cell_table(block, &coordinates(&block.axes, 0)).map_err(CliError::Config)?;
    let probe_value = toml::Value::Table(probe);
    let schema_err: Option<String> = match block.target {
        SweepTarget::Continuous => probe_value
            .try_into::<ContinuousPoint>()
            .err()
            .map(|e| e.to_string()),
        SweepTarget::Discrete => probe_value
            .try_into::<DiscreteBlock>()
            .err()
            .map(|e| e.to_string()),
        SweepTarget::Diffusivity => probe_value
            .try_into::<DiffusivityBlock>()
            .err()
            .map(|e| e.to_string()),
    };
    if let Some(e) = schema_err {
        return Err(CliError::Config(format!("sweep.base with axes applied: {e}")));
    }

    let master = ctx.seed;
    let rows: Vec<(Vec<usize>, Result<Vec<String>, String>)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let coords = coordinates(&block.axes, idx);
            let result = cell_table(block, &coords)
                .and_then(|table| run_cell(block.target, table, mix_seed(master, idx as u64)));
            (coords, result)
        })
        .collect();

    let metrics = metric_columns(block.target);
    let mut csv = String::new();
    for axis in &block.axes {
        csv.push_str(&axis.name);
        csv.push(',');
    }
    csv.push_str("status,");
    csv.push_str(&metrics.join(","));
    csv.push_str(",error\n");
    for (coords, result) in &rows {
        for (axis, &ci) in block.axes.iter().zip(coords) {
            csv.push_str(&value_display(&axis.values[ci]));
            csv.push(',');
        }
        match result {
            Ok(values) => {
                csv.push_str("ok,");
                csv.push_str(&values.join(","));
                csv.push_str(",\n");
            }
            Err(msg) => {
                csv.push_str("failed,");
                for _ in 0..metrics.len() {
                    csv.push(',');
                }
                csv.push_str(&sanitize(msg));
                csv.push('\n');
            }
        }
    }
    ctx.write_file("sweep.csv", &csv)
}
