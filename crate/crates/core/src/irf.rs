//! Impulse responses and expected metaorder trajectories of a calibrated
//! linear model.
//!
//! A metaorder is modelled as a constant signed child-volume rate `δ_v`
//! injected into the volume equation for `T` consecutive trade steps. Two
//! evaluation routes exist and must agree:
//!
//! * [`trajectory_closed`] — matrix-geometric expressions in the companion
//!   form, evaluated with `O(p)` vector propagation per step (the companion
//!   matrix is never materialized and no dense power is ever formed);
//! * [`trajectory_iter`] — direct recursion of the structural equations with
//!   shocks at their zero mean.
//!
//! The closed route requires a stationary system; the iterative route works
//! for any coefficients and is the fallback near the unit root.

use std::io::{self, Write};

use thiserror::Error;

use crate::linmodels::{CompanionError, CompanionSystem, LinearModel};

#[derive(Debug, Error)]
pub enum IrfError {
    #[error(
        "spectral radius {0} is not below one; the closed-form trajectory is undefined — \
         use trajectory_iter instead"
    )]
    NonStationary(f64),
    #[error("the closed-form trajectory requires volume-coupled mode; use trajectory_iter")]
    KappaUnsupported,
    #[error("invalid metaorder spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Singular(#[from] CompanionError),
}

/// Whether the volume equation feeds back during the metaorder.
///
/// * `VolumeCoupled`: the flow equation keeps its fitted lag dynamics, so the
///   metaorder's children excite follow-on flow.
/// * `PriceOnly`: the flow equation is replaced by the bare child rate
///   (`v̄_t = δ_v` while trading, 0 after), isolating the price equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMode {
    VolumeCoupled,
    PriceOnly,
}

impl KappaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            KappaMode::VolumeCoupled => "volume-coupled",
            KappaMode::PriceOnly => "price-only",
        }
    }
}

/// Execution plan of one metaorder in trade time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaorderSpec {
    /// Signed child volume per trade step (`δ_v`), in shares.
    pub child_size: f64,
    /// Number of trade steps the metaorder is active (`T ≥ 1`).
    pub duration: usize,
    /// Last trade step evaluated (`≥ duration`).
    pub horizon: usize,
    pub kappa: KappaMode,
}

impl MetaorderSpec {
    fn validate(&self) -> Result<(), IrfError> {
        if self.duration == 0 {
            return Err(IrfError::InvalidSpec("duration must be at least 1".into()));
        }
        if self.horizon < self.duration {
            return Err(IrfError::InvalidSpec(format!(
                "horizon {} must be at least the duration {}",
                self.horizon, self.duration
            )));
        }
        if !self.child_size.is_finite() {
            return Err(IrfError::InvalidSpec("child size must be finite".into()));
        }
        Ok(())
    }
}

/// Expected price and flow path around a metaorder. `price[0] = 0` is the
/// pre-trade baseline; `price[k]` is the expected cumulative midprice move
/// after `k` trade steps and `volume[k]` the expected signed flow at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<u64>,
    pub price: Vec<f64>,
    pub volume: Vec<f64>,
    pub meta: MetaorderSpec,
}

/// Post-execution summary of a trajectory.
///
/// `peak` is the price at the end of execution, `long_term` the price at the
/// final horizon, and `reversion_ratio = (peak − long_term)/peak` — `None`
/// when the peak is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMetrics {
    pub peak: f64,
    pub long_term: f64,
    pub reversion_ratio: Option<f64>,
}

/// Price response `h ↦ e1'Γ^h e2 · shock` to a one-off volume shock.
/// Entry `h = 0` is the contemporaneous response `b₀ · shock`.
pub fn standard_irf(cs: &CompanionSystem, h_max: usize, shock: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(h_max + 1);
    let mut x = cs.e2();
    let mut y = vec![0.0; cs.dim()];
    out.push(x[0] * shock);
    for _ in 1..=h_max {
        cs.apply(&x, &mut y);
        std::mem::swap(&mut x, &mut y);
        out.push(x[0] * shock);
    }
    out
}

/// Closed-form expected trajectory under volume-coupled dynamics.
///
/// During execution the cumulative price is
/// `δ_v · e1'(I−Γ)^{-1}(k·I − Γ(I−Γ)^{-1}(I−Γ^k))e2`; afterwards the state
/// relaxes as `Γ^k z̃_T`. Both are evaluated with one `(I−Γ)` solve, one
/// transpose solve, and `O(p)` work per step (`O(p·horizon)` total,
/// `O(p)` memory beyond the output).
pub fn trajectory_closed(
    cs: &CompanionSystem,
    spec: &MetaorderSpec,
) -> Result<Trajectory, IrfError> {
    spec.validate()?;
    if spec.kappa != KappaMode::VolumeCoupled {
        return Err(IrfError::KappaUnsupported);
    }
    if !(cs.spectral_radius < 1.0) {
        return Err(IrfError::NonStationary(cs.spectral_radius));
    }
    let n = cs.dim();
    let delta = spec.child_size;
    let t_end = spec.duration;
    let horizon = spec.horizon;

    // g' = e1'(I−Γ)^{-1}; h' = g'Γ; c1 = g'e2.
    let g = cs.solve_i_minus_gamma_transpose(&cs.e1())?;
    let mut h = vec![0.0; n];
    cs.apply_transpose(&g, &mut h);
    let e2 = cs.e2();
    let c1: f64 = dot(&g, &e2);

    let mut price = Vec::with_capacity(horizon + 1);
    let mut volume = Vec::with_capacity(horizon + 1);
    price.push(0.0);
    volume.push(0.0);

    // During execution: u_k = Σ_{j<k} Γ^j e2 (so z̃_k = δ_v u_k).
    let mut u = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for k in 1..=t_end {
        cs.apply(&u, &mut scratch);
        for (ui, (si, ei)) in u.iter_mut().zip(scratch.iter().zip(&e2)) {
            *ui = si + ei;
        }
        price.push(delta * (k as f64 * c1 - dot(&h, &u)));
        volume.push(delta * u[1]);
    }

    // After execution: price(T+k) = price(T) + h'(z̃_T − Γ^k z̃_T).
    let z_t: Vec<f64> = u.iter().map(|ui| delta * ui).collect();
    let h_dot_zt = dot(&h, &z_t);
    let price_t = price[t_end];
    let mut w = z_t;
    for _ in t_end + 1..=horizon {
        cs.apply(&w, &mut scratch);
        std::mem::swap(&mut w, &mut scratch);
        price.push(price_t + (h_dot_zt - dot(&h, &w)));
        volume.push(w[1]);
    }

    Ok(Trajectory {
        times: (0..=horizon as u64).collect(),
        price,
        volume,
        meta: spec.clone(),
    })
}

/// Deterministic-skeleton recursion of the structural equations (shocks at
/// zero mean), `O(p)` memory via ring buffers.
///
/// Volume-coupled mode keeps the full flow dynamics; price-only mode pins
/// `v̄_t = δ_v·1{t ≤ T}`. The price equation always keeps its own lag blocks.
pub fn trajectory_iter(m: &LinearModel, spec: &MetaorderSpec) -> Result<Trajectory, IrfError> {
    spec.validate()?;
    let p = m.p;
    let horizon = spec.horizon;
    let delta = spec.child_size;
    let coupled = spec.kappa == KappaMode::VolumeCoupled;

    let mut dp_hist = Ring::new(p);
    let mut v_hist = Ring::new(p);
    let mut price = Vec::with_capacity(horizon + 1);
    let mut volume = Vec::with_capacity(horizon + 1);
    price.push(0.0);
    volume.push(0.0);

    for t in 1..=horizon {
        let source = if t <= spec.duration { delta } else { 0.0 };
        let mut v_t = source;
        if coupled {
            for i in 1..=p {
                v_t += m.c[i - 1] * dp_hist.lag(i) + m.d[i - 1] * v_hist.lag(i);
            }
        }
        let mut dp_t = m.b[0] * v_t;
        for i in 1..=p {
            dp_t += m.a[i - 1] * dp_hist.lag(i) + m.b[i] * v_hist.lag(i);
        }
        price.push(price[t - 1] + dp_t);
        volume.push(v_t);
        dp_hist.push(dp_t);
        v_hist.push(v_t);
    }

    Ok(Trajectory {
        times: (0..=horizon as u64).collect(),
        price,
        volume,
        meta: spec.clone(),
    })
}

/// Curvature-sign flags along the expected trajectory of a buy metaorder.
///
/// `during[k]` (for `k = 0..=T`) is the sign test `e1'Γ^{k+1}e2 > 0`: true
/// exactly when the second difference of the price path at step `k+1` is
/// positive, i.e. the trajectory bends upward while trading continues.
/// `after[k]` (for `k = 0..horizon−T`) is `e1'Γ^{k+1}(I−Γ^T)e2 < 0`: true
/// exactly when the path bends upward at step `T+k+1`, after execution ends.
pub fn concavity_flags(cs: &CompanionSystem, duration: usize, horizon: usize) -> ConcavityFlags {
    let n = cs.dim();
    let e2 = cs.e2();
    let mut during = Vec::with_capacity(duration + 1);
    let mut x = e2.clone();
    let mut scratch = vec![0.0; n];
    let mut gamma_t_e2 = vec![0.0; n];
    for k in 0..=duration {
        cs.apply(&x, &mut scratch);
        std::mem::swap(&mut x, &mut scratch);
        during.push(x[0] > 0.0);
        if k + 1 == duration {
            gamma_t_e2.copy_from_slice(&x);
        }
    }
    if duration == 0 {
        gamma_t_e2.copy_from_slice(&e2);
    }

    let mut after = Vec::with_capacity(horizon.saturating_sub(duration));
    let mut y: Vec<f64> = e2.iter().zip(&gamma_t_e2).map(|(a, b)| a - b).collect();
    for _ in 0..horizon.saturating_sub(duration) {
        cs.apply(&y, &mut scratch);
        std::mem::swap(&mut y, &mut scratch);
        after.push(y[0] < 0.0);
    }
    ConcavityFlags { during, after }
}

/// See [`concavity_flags`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcavityFlags {
    pub during: Vec<bool>,
    pub after: Vec<bool>,
}

/// Peak/terminal summary of a trajectory (peak = end of execution).
pub fn impact_metrics(traj: &Trajectory) -> ImpactMetrics {
    let peak = traj.price[traj.meta.duration];
    let long_term = traj.price[traj.meta.horizon];
    let reversion_ratio = if peak == 0.0 {
        None
    } else {
        Some((peak - long_term) / peak)
    };
    ImpactMetrics {
        peak,
        long_term,
        reversion_ratio,
    }
}

/// Writes a trajectory as `k,price,volume` CSV with `#`-prefixed metadata
/// lines (caller-supplied key/value pairs first).
pub fn write_trajectory<W: Write>(
    mut w: W,
    traj: &Trajectory,
    metadata: &[(&str, String)],
) -> io::Result<()> {
    for (key, value) in metadata {
        writeln!(w, "# {key}={value}")?;
    }
    writeln!(w, "# delta_v={}", traj.meta.child_size)?;
    writeln!(w, "# duration={}", traj.meta.duration)?;
    writeln!(w, "# kappa={}", traj.meta.kappa.as_str())?;
    writeln!(w, "k,price,volume")?;
    for k in 0..traj.price.len() {
        writeln!(w, "{},{},{}", traj.times[k], traj.price[k], traj.volume[k])?;
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fixed-length ring buffer over the last `p` values, zero-initialized.
struct Ring {
    buf: Vec<f64>,
    next: usize,
}

impl Ring {
    fn new(p: usize) -> Self {
        Ring {
            buf: vec![0.0; p.max(1)],
            next: 0,
        }
    }

    /// Value pushed `i` steps ago (`1 ≤ i ≤ p`); zero before anything was
    /// pushed.
    fn lag(&self, i: usize) -> f64 {
        let n = self.buf.len();
        self.buf[(self.next + n - i) % n]
    }

    fn push(&mut self, v: f64) {
        self.buf[self.next] = v;
        self.next = (self.next + 1) % self.buf.len();
    }
}
