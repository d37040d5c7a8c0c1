//! Trapezoidal quadrature engine for the continuous-time model, used as an
//! independent numerical cross-check of the closed forms.
//!
//! The flow equation is a Volterra integral equation of the second kind,
//! `v(t) = f(t) + λ ∫₀ᵗ D(t−s) v(s) ds`, solved by stepping forward on a
//! uniform grid with the trapezoid rule; each step is an explicit solve for
//! the newest value. For smooth sources this converges at second order.
//!
//! The metaorder source `f(t) = α·V·1{t < T}` is *not* smooth — it jumps at
//! `T` — so [`metaorder_volume_oracle`] substitutes `v = f + w` and solves
//! for the continuous remainder `w` instead, with the source's own
//! convolution folded into an exactly-integrated cumulative-kernel term.
//! That keeps the scheme second order across the jump. The price is then a
//! plain convolution over `w` plus the same exactly-integrated direct term
//! ([`price_integrate`]).

use super::continuous::{ContinuousError, ContinuousParams};

/// Threshold on |solution| beyond which the quadrature reports divergence.
const DIVERGENCE_LIMIT: f64 = 1e12;

/// A function sampled on a uniform time grid `t0 + i·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    /// Time of the first sample.
    pub t0: f64,
    /// Grid step (positive).
    pub dt: f64,
    /// Sample values, one per node.
    pub values: Vec<f64>,
}

impl GridFunction {
    /// Time of the `i`-th sample.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the grid holds no samples.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute difference against another function on the same
    /// grid; errors when the grids differ in origin, step, or length.
    pub fn max_abs_difference(&self, other: &GridFunction) -> Result<f64, ContinuousError> {
        if (self.t0 - other.t0).abs() > 1e-12
            || (self.dt - other.dt).abs() > 1e-12
            || self.len() != other.len()
        {
            return Err(ContinuousError::InvalidGrid(format!(
                "grids are incompatible: ({}, {}, {} samples) vs ({}, {}, {} samples)",
                self.t0,
                self.dt,
                self.len(),
                other.t0,
                other.dt,
                other.len()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn check_grid_args(t_max: f64, dt: f64) -> Result<usize, ContinuousError> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(ContinuousError::InvalidGrid(format!("step must be positive, got {dt}")));
    }
    if !t_max.is_finite() || t_max < dt {
        return Err(ContinuousError::InvalidGrid(format!(
            "horizon {t_max} must cover at least one step of size {dt}"
        )));
    }
    Ok((t_max / dt).round() as usize)
}

/// Index of the node carrying the execution end, which must sit exactly on
/// the grid so the flow jump is not smeared across a cell.
fn duration_node(duration: f64, dt: f64) -> Result<usize, ContinuousError> {
    let m = (duration / dt).round();
    if (m * dt - duration).abs() > 1e-9 * duration.max(1.0) || m < 1.0 {
        return Err(ContinuousError::GridMisaligned { duration, dt });
    }
    Ok(m as usize)
}

/// Core trapezoid stepper for `w_n = f_n + λ·dt·Σ'' D_{n−j} w_j`, where the
/// double-primed sum halves the endpoint weights. Kernel and source are
/// pre-sampled on the grid; the newest value appears linearly and is solved
/// for explicitly.
fn solve_sampled(
    kernel: &[f64],
    lam: f64,
    source: &[f64],
    dt: f64,
) -> Result<Vec<f64>, ContinuousError> {
    let n = source.len();
    let denom = 1.0 - lam * dt * kernel[0] / 2.0;
    if denom <= 0.0 {
        return Err(ContinuousError::InvalidGrid(format!(
            "step {dt} too large for excitation strength {lam}: implicit weight {denom} <= 0"
        )));
    }
    let mut w = Vec::with_capacity(n);
    w.push(source[0]);
    for i in 1..n {
        let mut acc = kernel[i] * w[0] / 2.0;
        for j in 1..i {
            acc += kernel[i - j] * w[j];
        }
        let value = (source[i] + lam * dt * acc) / denom;
        if value.abs() > DIVERGENCE_LIMIT {
            return Err(ContinuousError::QuadratureDiverged { t: dt * i as f64 });
        }
        w.push(value);
    }
    Ok(w)
}

/// Cumulative integral of a sampled kernel by the trapezoid rule
/// (`out[0] = 0`).
fn cumulative_trapezoid(samples: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    out.push(0.0);
    for i in 1..samples.len() {
        out.push(out[i - 1] + dt * (samples[i - 1] + samples[i]) / 2.0);
    }
    out
}

/// Solves `v(t) = f(t) + λ ∫₀ᵗ D(t−s) v(s) ds` on `[0, t_max]` by the
/// trapezoid rule, sampling both handles on the grid.
///
/// Second-order accurate for smooth sources; for the discontinuous metaorder
/// source use [`metaorder_volume_oracle`], which handles the jump exactly.
pub fn volterra_solve(
    kernel: impl Fn(f64) -> f64,
    lam: f64,
    source: impl Fn(f64) -> f64,
    t_max: f64,
    dt: f64,
) -> Result<GridFunction, ContinuousError> {
    let n = check_grid_args(t_max, dt)?;
    let d: Vec<f64> = (0..=n).map(|i| kernel(dt * i as f64)).collect();
    let f: Vec<f64> = (0..=n).map(|i| source(dt * i as f64)).collect();
    let values = solve_sampled(&d, lam, &f, dt)?;
    Ok(GridFunction { t0: 0.0, dt, values })
}

/// Quadrature solution of the metaorder flow equation on `[0, t_max]`,
/// second-order accurate across the source jump at `T`.
///
/// Splits `v = f + w` with `f(t) = α·V·1{t < T}`: the continuous remainder
/// `w` obeys a Volterra equation whose source is the exactly-integrated
/// kernel mass `λ·α·V·(I(t) − I(t − T))`, `I` being the cumulative integral
/// of the flow kernel.
pub fn metaorder_volume_oracle(
    p: &ContinuousParams,
    t_max: f64,
    dt: f64,
) -> Result<GridFunction, ContinuousError> {
    p.validate()?;
    let n = check_grid_args(t_max, dt)?;
    let m = duration_node(p.duration, dt)?;
    let d: Vec<f64> = (0..=n).map(|i| (-p.beta * dt * i as f64).exp()).collect();
    let kernel_mass = cumulative_trapezoid(&d, dt);
    let source_rate = p.alpha * p.v_rate;
    let g: Vec<f64> = (0..=n)
        .map(|i| p.lam * source_rate * (kernel_mass[i] - kernel_mass[i.saturating_sub(m)]))
        .collect();
    let w = solve_sampled(&d, p.lam, &g, dt)?;
    let values = (0..=n)
        .map(|i| w[i] + if i < m { source_rate } else { 0.0 })
        .collect();
    Ok(GridFunction { t0: 0.0, dt, values })
}

/// Integrates a flow grid into a price path through an impact kernel `G`:
/// `p(t) = ∫₀ᵗ G(t−s)·[v(s) + (1−α)·V·1{s < T}] ds`.
///
/// The jump in `v` at `T` and the direct-source step are removed before the
/// trapezoid convolution and re-added as exactly-integrated cumulative-`G`
/// terms, so the result is second-order accurate even across the jump.
pub fn price_integrate(
    kernel_g: impl Fn(f64) -> f64,
    volume: &GridFunction,
    p: &ContinuousParams,
) -> Result<GridFunction, ContinuousError> {
    p.validate()?;
    if volume.t0.abs() > 1e-12 {
        return Err(ContinuousError::InvalidGrid(format!(
            "flow grid must start at t = 0, got t0 = {}",
            volume.t0
        )));
    }
    if volume.len() < 2 {
        return Err(ContinuousError::InvalidGrid("flow grid needs at least two samples".into()));
    }
    let dt = volume.dt;
    let n = volume.len() - 1;
    let m = duration_node(p.duration, dt)?;
    let g: Vec<f64> = (0..=n).map(|i| kernel_g(dt * i as f64)).collect();
    let impact_mass = cumulative_trapezoid(&g, dt);
    let source_rate = p.alpha * p.v_rate;
    // Continuous remainder of the flow: subtract the active-source step.
    let w: Vec<f64> = (0..=n)
        .map(|i| volume.values[i] - if i < m { source_rate } else { 0.0 })
        .collect();
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut acc = 0.0;
        if i > 0 {
            acc += g[i] * w[0] / 2.0 + g[0] * w[i] / 2.0;
            for j in 1..i {
                acc += g[i - j] * w[j];
            }
        }
        // v + (1−α)·V·step and w differ by the full rate V on active nodes.
        let direct = p.v_rate * (impact_mass[i] - impact_mass[i.saturating_sub(m)]);
        values.push(dt * acc + direct);
    }
    Ok(GridFunction { t0: 0.0, dt, values })
}

/// End-to-end quadrature price path: [`metaorder_volume_oracle`] followed by
/// [`price_integrate`] with the exponential impact kernel.
pub fn metaorder_price_oracle(
    p: &ContinuousParams,
    t_max: f64,
    dt: f64,
) -> Result<GridFunction, ContinuousError> {
    let volume = metaorder_volume_oracle(p, t_max, dt)?;
    price_integrate(|s| (-p.rho * s).exp(), &volume, p)
}
