//! Linear price-impact models and their least-squares calibration.
//!
//! Two nested specifications over aligned `(Δp_t, v_t)` samples with lag
//! order `p`:
//!
//! * the full two-equation form regresses `Δp_t` on `p` of its own lags plus
//!   volume lags `0..p`, and `v_t` on `p` lags of both series;
//! * the volume-only form drops every `Δp` regressor (`a ≡ 0`, `c ≡ 0`), so
//!   prices react to flow but flow ignores past prices.
//!
//! Each equation is estimated independently by streaming QR least squares
//! (see [`lstsq`]); no intercepts are fitted — inputs are assumed centred by
//! construction of the conventions in [`crate::marketdata`].

mod companion;
mod lstsq;

pub use companion::{
    stationarity_report, CompanionError, CompanionSystem, StationarityReport, STATIONARITY_EPS,
};
pub use lstsq::{LstsqError, LstsqSolution, StreamingLstsq};

use std::io::{self, BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::marketdata::{PriceConvention, RegressionDataset};

#[derive(Debug, Error)]
pub enum LinModelError {
    #[error("lag order p must be at least 1")]
    InvalidOrder,
    #[error("insufficient observations: need more than {need}, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("{equation} equation: rank-deficient design at {regressor}")]
    RankDeficient {
        equation: &'static str,
        regressor: String,
    },
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Which regressor blocks the model includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Volume-only price formation: `a ≡ 0`, `c ≡ 0`.
    Tim,
    /// Full two-equation form with price-change feedback.
    Hasbrouck,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Tim => "tim",
            ModelKind::Hasbrouck => "hasbrouck",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "tim" => Some(ModelKind::Tim),
            "hasbrouck" => Some(ModelKind::Hasbrouck),
            _ => None,
        }
    }
}

/// A calibrated (or hand-specified) linear impact model.
///
/// Coefficient layout: `a[i]`/`c[i]`/`d[i]` hold lag `i+1`; `b[i]` holds lag
/// `i`, so `b[0]` is the contemporaneous impact. Standard errors are zero for
/// hand-built models and filled in by [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub p: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub se_a: Vec<f64>,
    pub se_b: Vec<f64>,
    pub se_c: Vec<f64>,
    pub se_d: Vec<f64>,
    pub resid_var_dp: f64,
    pub resid_var_v: f64,
    pub n_obs: usize,
}

impl LinearModel {
    /// Volume-only model from kernel coefficients (`b` has `p+1` entries,
    /// `d` has `p`).
    pub fn tim(b: Vec<f64>, d: Vec<f64>) -> Self {
        let p = d.len();
        assert!(p >= 1, "lag order must be at least 1");
        assert_eq!(b.len(), p + 1, "b must have p+1 entries (lag 0..p)");
        LinearModel {
            kind: ModelKind::Tim,
            p,
            a: vec![0.0; p],
            b,
            c: vec![0.0; p],
            d,
            se_a: vec![0.0; p],
            se_b: vec![0.0; p + 1],
            se_c: vec![0.0; p],
            se_d: vec![0.0; p],
            resid_var_dp: 0.0,
            resid_var_v: 0.0,
            n_obs: 0,
        }
    }

    /// Full two-equation model from explicit coefficient vectors.
    pub fn hasbrouck(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: Vec<f64>) -> Self {
        let p = d.len();
        assert!(p >= 1, "lag order must be at least 1");
        assert_eq!(a.len(), p, "a must have p entries");
        assert_eq!(b.len(), p + 1, "b must have p+1 entries (lag 0..p)");
        assert_eq!(c.len(), p, "c must have p entries");
        LinearModel {
            kind: ModelKind::Hasbrouck,
            p,
            a,
            b,
            c,
            d,
            se_a: vec![0.0; p],
            se_b: vec![0.0; p + 1],
            se_c: vec![0.0; p],
            se_d: vec![0.0; p],
            resid_var_dp: 0.0,
            resid_var_v: 0.0,
            n_obs: 0,
        }
    }
}

/// Fits a [`LinearModel`] of the given kind and lag order by per-equation
/// streaming QR least squares.
///
/// Requires strictly more usable rows than regressors in each equation
/// (`n > 2p+1` for the volume-only kind, `n > 3p+1` for the full kind).
pub fn fit(ds: &RegressionDataset, kind: ModelKind, p: usize) -> Result<LinearModel, LinModelError> {
    if p == 0 {
        return Err(LinModelError::InvalidOrder);
    }
    let n = ds.len();
    let dp_cols = match kind {
        ModelKind::Tim => p + 1,
        ModelKind::Hasbrouck => 2 * p + 1,
    };
    let v_cols = match kind {
        ModelKind::Tim => p,
        ModelKind::Hasbrouck => 2 * p,
    };
    let need = p + dp_cols.max(v_cols);
    if n <= need {
        return Err(LinModelError::InsufficientData { need, got: n });
    }

    let (dp_sol, v_sol) = rayon::join(
        || fit_equation(ds, kind, p, Equation::PriceChange),
        || fit_equation(ds, kind, p, Equation::Volume),
    );
    let dp_sol = dp_sol?;
    let v_sol = v_sol?;

    let mut model = match kind {
        ModelKind::Tim => LinearModel::tim(vec![0.0; p + 1], vec![0.0; p]),
        ModelKind::Hasbrouck => LinearModel::hasbrouck(
            vec![0.0; p],
            vec![0.0; p + 1],
            vec![0.0; p],
            vec![0.0; p],
        ),
    };
    match kind {
        ModelKind::Tim => {
            model.b.copy_from_slice(&dp_sol.beta);
            model.se_b.copy_from_slice(&dp_sol.std_err);
            model.d.copy_from_slice(&v_sol.beta);
            model.se_d.copy_from_slice(&v_sol.std_err);
        }
        ModelKind::Hasbrouck => {
            model.a.copy_from_slice(&dp_sol.beta[..p]);
            model.se_a.copy_from_slice(&dp_sol.std_err[..p]);
            model.b.copy_from_slice(&dp_sol.beta[p..]);
            model.se_b.copy_from_slice(&dp_sol.std_err[p..]);
            model.c.copy_from_slice(&v_sol.beta[..p]);
            model.se_c.copy_from_slice(&v_sol.std_err[..p]);
            model.d.copy_from_slice(&v_sol.beta[p..]);
            model.se_d.copy_from_slice(&v_sol.std_err[p..]);
        }
    }
    model.resid_var_dp = dp_sol.resid_var;
    model.resid_var_v = v_sol.resid_var;
    model.n_obs = dp_sol.rows;
    Ok(model)
}

#[derive(Clone, Copy)]
enum Equation {
    PriceChange,
    Volume,
}

impl Equation {
    fn name(&self) -> &'static str {
        match self {
            Equation::PriceChange => "price-change",
            Equation::Volume => "volume",
        }
    }
}

fn fit_equation(
    ds: &RegressionDataset,
    kind: ModelKind,
    p: usize,
    eq: Equation,
) -> Result<LstsqSolution, LinModelError> {
    let n = ds.len();
    let cols = match (kind, eq) {
        (ModelKind::Tim, Equation::PriceChange) => p + 1,
        (ModelKind::Tim, Equation::Volume) => p,
        (ModelKind::Hasbrouck, Equation::PriceChange) => 2 * p + 1,
        (ModelKind::Hasbrouck, Equation::Volume) => 2 * p,
    };
    let mut acc = StreamingLstsq::new(cols);
    let mut row = vec![0.0; cols];
    for t in p..n {
        let mut idx = 0;
        if matches!(kind, ModelKind::Hasbrouck) {
            for i in 1..=p {
                row[idx] = ds.dp[t - i];
                idx += 1;
            }
        }
        match eq {
            Equation::PriceChange => {
                for i in 0..=p {
                    row[idx] = ds.v[t - i];
                    idx += 1;
                }
            }
            Equation::Volume => {
                for i in 1..=p {
                    row[idx] = ds.v[t - i];
                    idx += 1;
                }
            }
        }
        debug_assert_eq!(idx, cols);
        let y = match eq {
            Equation::PriceChange => ds.dp[t],
            Equation::Volume => ds.v[t],
        };
        acc.push_row(&mut row, y);
    }
    acc.solve().map_err(|e| match e {
        LstsqError::RankDeficient { column } => LinModelError::RankDeficient {
            equation: eq.name(),
            regressor: describe_column(kind, eq, p, column),
        },
        LstsqError::Underdetermined { rows, cols } => LinModelError::InsufficientData {
            need: cols + p,
            got: rows + p,
        },
    })
}

fn describe_column(kind: ModelKind, eq: Equation, p: usize, column: usize) -> String {
    let (block, lag) = match (kind, eq) {
        (ModelKind::Tim, Equation::PriceChange) => ("volume", column),
        (ModelKind::Tim, Equation::Volume) => ("volume", column + 1),
        (ModelKind::Hasbrouck, Equation::PriceChange) => {
            if column < p {
                ("price-change", column + 1)
            } else {
                ("volume", column - p)
            }
        }
        (ModelKind::Hasbrouck, Equation::Volume) => {
            if column < p {
                ("price-change", column + 1)
            } else {
                ("volume", column - p + 1)
            }
        }
    };
    format!("{block} lag {lag}")
}

/// Running sums of the lagged kernel coefficients: `(Σ_{i=1..k} b_i,
/// Σ_{i=1..k} d_i)` for `k = 1..p`. The contemporaneous `b₀` is excluded so
/// both outputs describe the lagged response only.
pub fn cumulative_coefficients(m: &LinearModel) -> (Vec<f64>, Vec<f64>) {
    let mut cum_b = Vec::with_capacity(m.p);
    let mut cum_d = Vec::with_capacity(m.p);
    let mut sb = 0.0;
    let mut sd = 0.0;
    for i in 0..m.p {
        sb += m.b[i + 1];
        sd += m.d[i];
        cum_b.push(sb);
        cum_d.push(sd);
    }
    (cum_b, cum_d)
}

/// Builds the companion form of a model (convenience re-export of
/// [`CompanionSystem::from_model`]).
pub fn companion(m: &LinearModel) -> CompanionSystem {
    CompanionSystem::from_model(m)
}

/// Simulates the structural two-equation system driven by Gaussian shocks,
/// returning a regression-ready dataset (post-trade convention tag).
///
/// `noise = (σ_dp, σ_v)` are the structural shock standard deviations. The
/// first `burn_in` samples are discarded to wash out the zero initial state.
pub fn simulate_model(
    m: &LinearModel,
    n: usize,
    burn_in: usize,
    seed: u64,
    noise: (f64, f64),
) -> RegressionDataset {
    let total = n + burn_in;
    let mut dp = vec![0.0; total];
    let mut v = vec![0.0; total];
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let p = m.p;
    for t in 0..total {
        let mut vt = noise.1 * <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng);
        for i in 1..=p.min(t) {
            vt += m.c[i - 1] * dp[t - i] + m.d[i - 1] * v[t - i];
        }
        v[t] = vt;
        let mut dpt = m.b[0] * vt
            + noise.0 * <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng);
        for i in 1..=p.min(t) {
            dpt += m.a[i - 1] * dp[t - i] + m.b[i] * v[t - i];
        }
        dp[t] = dpt;
    }
    RegressionDataset {
        dp: dp.split_off(burn_in),
        v: v.split_off(burn_in),
        convention: PriceConvention::PostTrade,
    }
}

/// Writes a model as a coefficient CSV with `#`-prefixed header metadata.
pub fn write_model<W: Write>(mut w: W, m: &LinearModel) -> io::Result<()> {
    writeln!(w, "# kind={}", m.kind.as_str())?;
    writeln!(w, "# p={}", m.p)?;
    writeln!(w, "# n_obs={}", m.n_obs)?;
    writeln!(w, "# resid_var_dp={}", m.resid_var_dp)?;
    writeln!(w, "# resid_var_v={}", m.resid_var_v)?;
    writeln!(w, "block,lag,coefficient,std_error")?;
    if matches!(m.kind, ModelKind::Hasbrouck) {
        for i in 0..m.p {
            writeln!(w, "a,{},{},{}", i + 1, m.a[i], m.se_a[i])?;
        }
    }
    for i in 0..=m.p {
        writeln!(w, "b,{},{},{}", i, m.b[i], m.se_b[i])?;
    }
    if matches!(m.kind, ModelKind::Hasbrouck) {
        for i in 0..m.p {
            writeln!(w, "c,{},{},{}", i + 1, m.c[i], m.se_c[i])?;
        }
    }
    for i in 0..m.p {
        writeln!(w, "d,{},{},{}", i + 1, m.d[i], m.se_d[i])?;
    }
    Ok(())
}

/// Reads a model written by [`write_model`]. Round-trips exactly: floats are
/// serialized in shortest-round-trip form.
pub fn read_model<R: BufRead>(r: R) -> Result<LinearModel, LinModelError> {
    let mut kind: Option<ModelKind> = None;
    let mut p: Option<usize> = None;
    let mut n_obs = 0usize;
    let mut resid_var_dp = 0.0;
    let mut resid_var_v = 0.0;
    let mut rows: Vec<(String, usize, f64, f64)> = Vec::new();
    let mut saw_header = false;

    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| LinModelError::Parse { line: line_no, msg };
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            let (key, value) = meta
                .split_once('=')
                .ok_or_else(|| parse_err(format!("bad metadata line: {meta:?}")))?;
            match key.trim() {
                "kind" => {
                    kind = Some(ModelKind::parse(value.trim()).ok_or_else(|| {
                        parse_err(format!("unknown model kind: {value:?}"))
                    })?)
                }
                "p" => {
                    p = Some(value.trim().parse().map_err(|_| {
                        parse_err(format!("bad lag order: {value:?}"))
                    })?)
                }
                "n_obs" => {
                    n_obs = value.trim().parse().map_err(|_| {
                        parse_err(format!("bad n_obs: {value:?}"))
                    })?
                }
                "resid_var_dp" => {
                    resid_var_dp = value.trim().parse().map_err(|_| {
                        parse_err(format!("bad resid_var_dp: {value:?}"))
                    })?
                }
                "resid_var_v" => {
                    resid_var_v = value.trim().parse().map_err(|_| {
                        parse_err(format!("bad resid_var_v: {value:?}"))
                    })?
                }
                other => return Err(parse_err(format!("unknown metadata key: {other:?}"))),
            }
            continue;
        }
        if !saw_header {
            if line != "block,lag,coefficient,std_error" {
                return Err(parse_err(format!("unexpected header: {line:?}")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 columns, got {}", fields.len())));
        }
        let lag: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("bad lag: {:?}", fields[1])))?;
        let coef: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("bad coefficient: {:?}", fields[2])))?;
        let se: f64 = fields[3]
            .parse()
            .map_err(|_| parse_err(format!("bad std error: {:?}", fields[3])))?;
        rows.push((fields[0].to_string(), lag, coef, se));
    }

    let kind = kind.ok_or(LinModelError::Parse {
        line: 0,
        msg: "missing kind metadata".into(),
    })?;
    let p = p.ok_or(LinModelError::Parse {
        line: 0,
        msg: "missing p metadata".into(),
    })?;
    if p == 0 {
        return Err(LinModelError::InvalidOrder);
    }

    let mut model = match kind {
        ModelKind::Tim => LinearModel::tim(vec![0.0; p + 1], vec![0.0; p]),
        ModelKind::Hasbrouck => {
            LinearModel::hasbrouck(vec![0.0; p], vec![0.0; p + 1], vec![0.0; p], vec![0.0; p])
        }
    };
    for (block, lag, coef, se) in rows {
        let bad_lag = || LinModelError::Parse {
            line: 0,
            msg: format!("lag {lag} out of range for block {block:?}"),
        };
        match block.as_str() {
            "a" => {
                if matches!(kind, ModelKind::Tim) {
                    return Err(LinModelError::Parse {
                        line: 0,
                        msg: "volume-only model cannot carry an `a` block".into(),
                    });
                }
                let i = lag.checked_sub(1).ok_or_else(bad_lag)?;
                *model.a.get_mut(i).ok_or_else(bad_lag)? = coef;
                model.se_a[i] = se;
            }
            "b" => {
                *model.b.get_mut(lag).ok_or_else(bad_lag)? = coef;
                model.se_b[lag] = se;
            }
            "c" => {
                if matches!(kind, ModelKind::Tim) {
                    return Err(LinModelError::Parse {
                        line: 0,
                        msg: "volume-only model cannot carry a `c` block".into(),
                    });
                }
                let i = lag.checked_sub(1).ok_or_else(bad_lag)?;
                *model.c.get_mut(i).ok_or_else(bad_lag)? = coef;
                model.se_c[i] = se;
            }
            "d" => {
                let i = lag.checked_sub(1).ok_or_else(bad_lag)?;
                *model.d.get_mut(i).ok_or_else(bad_lag)? = coef;
                model.se_d[i] = se;
            }
            other => {
                return Err(LinModelError::Parse {
                    line: 0,
                    msg: format!("unknown coefficient block: {other:?}"),
                })
            }
        }
    }
    model.n_obs = n_obs;
    model.resid_var_dp = resid_var_dp;
    model.resid_var_v = resid_var_v;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_sums_start_at_lag_one() {
        let m = LinearModel::tim(vec![0.5, 0.2, 0.1], vec![0.4, 0.1]);
        let (cum_b, cum_d) = cumulative_coefficients(&m);
        assert_eq!(cum_b, vec![0.2, 0.30000000000000004]);
        assert_eq!(cum_d, vec![0.4, 0.5]);
    }

    #[test]
    fn fit_rejects_too_short_dataset() {
        let p = 3;
        let n = 2 * p + 1;
        let ds = RegressionDataset {
            dp: vec![0.1; n],
            v: vec![1.0; n],
            convention: PriceConvention::PostTrade,
        };
        assert!(matches!(
            fit(&ds, ModelKind::Tim, p),
            Err(LinModelError::InsufficientData { .. })
        ));
    }

    #[test]
    fn fit_names_offending_block_on_rank_deficiency() {
        // Zero volume everywhere makes every volume column dependent.
        let m = LinearModel::tim(vec![1.0, 0.0], vec![0.3]);
        let mut ds = simulate_model(&m, 500, 50, 3, (1.0, 1.0));
        ds.v.iter_mut().for_each(|x| *x = 0.0);
        match fit(&ds, ModelKind::Tim, 1) {
            Err(LinModelError::RankDeficient { regressor, .. }) => {
                assert!(regressor.contains("volume"), "got {regressor}");
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn fit_recovers_volume_only_coefficients_within_three_se() {
        let truth = LinearModel::tim(vec![0.5, 0.2, 0.1], vec![0.4, 0.1]);
        let ds = simulate_model(&truth, 100_000, 1000, 99, (1.0, 1.0));
        let fitted = fit(&ds, ModelKind::Tim, 2).unwrap();
        for i in 0..=2 {
            let dev = (fitted.b[i] - truth.b[i]).abs();
            assert!(
                dev <= 3.0 * fitted.se_b[i],
                "b[{i}]: dev {dev} > 3·se {}",
                fitted.se_b[i]
            );
        }
        for i in 0..2 {
            let dev = (fitted.d[i] - truth.d[i]).abs();
            assert!(
                dev <= 3.0 * fitted.se_d[i],
                "d[{i}]: dev {dev} > 3·se {}",
                fitted.se_d[i]
            );
        }
        assert!((fitted.resid_var_dp - 1.0).abs() < 0.05);
        assert!((fitted.resid_var_v - 1.0).abs() < 0.05);
    }

    #[test]
    fn fit_recovers_full_model_coefficients_within_three_se() {
        let truth = LinearModel::hasbrouck(
            vec![0.15, -0.05],
            vec![0.5, 0.2, 0.1],
            vec![0.05, 0.02],
            vec![0.4, 0.1],
        );
        let ds = simulate_model(&truth, 100_000, 1000, 7, (1.0, 1.0));
        let fitted = fit(&ds, ModelKind::Hasbrouck, 2).unwrap();
        let checks: Vec<(f64, f64, f64, &str)> = vec![
            (fitted.a[0], truth.a[0], fitted.se_a[0], "a1"),
            (fitted.a[1], truth.a[1], fitted.se_a[1], "a2"),
            (fitted.b[0], truth.b[0], fitted.se_b[0], "b0"),
            (fitted.b[1], truth.b[1], fitted.se_b[1], "b1"),
            (fitted.b[2], truth.b[2], fitted.se_b[2], "b2"),
            (fitted.c[0], truth.c[0], fitted.se_c[0], "c1"),
            (fitted.c[1], truth.c[1], fitted.se_c[1], "c2"),
            (fitted.d[0], truth.d[0], fitted.se_d[0], "d1"),
            (fitted.d[1], truth.d[1], fitted.se_d[1], "d2"),
        ];
        for (est, tru, se, name) in checks {
            assert!(
                (est - tru).abs() <= 3.0 * se,
                "{name}: {est} vs {tru} (se {se})"
            );
        }
    }

    #[test]
    fn model_csv_round_trips_exactly() {
        let truth = LinearModel::hasbrouck(
            vec![0.15, -0.05],
            vec![0.5, 0.2, 0.1],
            vec![0.05, 0.02],
            vec![0.4, 0.1],
        );
        let ds = simulate_model(&truth, 5000, 500, 21, (1.0, 1.0));
        let fitted = fit(&ds, ModelKind::Hasbrouck, 2).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &fitted).unwrap();
        let read = read_model(buf.as_slice()).unwrap();
        assert_eq!(fitted, read);
    }

    #[test]
    fn simulate_is_deterministic_per_seed() {
        let m = LinearModel::tim(vec![0.5, 0.2], vec![0.4]);
        let a = simulate_model(&m, 100, 10, 5, (1.0, 2.0));
        let b = simulate_model(&m, 100, 10, 5, (1.0, 2.0));
        assert_eq!(a, b);
    }
}
