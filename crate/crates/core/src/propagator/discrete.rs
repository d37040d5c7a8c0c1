//! Discrete trade-time analogue of the kernel model, with exponential or
//! power-law kernels, optional per-step noise, Monte Carlo ensembles, and
//! criticality diagnostics.
//!
//! Time advances one trade per step. The metaorder is active on steps
//! `1 ..= T`; step 0 is the rest state. With flow kernel `d` and impact
//! kernel `g`,
//!
//! ```text
//! v_t = α·V·active(t) + λ Σ_{i=1}^{t} d_i v_{t−i} + σ_v ξ_t
//! p_t =                   Σ_{i=1}^{t} g_i [v_{t−i} + (1−α)·V·active(t−i)] + σ_p η_t
//! ```
//!
//! `p_t` is a price *level* (the impact kernel already decays), not a sum of
//! returns. The self-excitation strength is measured by `λ·Σ_{i≥1} d_i`:
//! below 1 the excited flow dies out and impact is transient; at 1 the flow
//! plateaus and impact becomes permanent; above 1 the model explodes and
//! [`simulate`] refuses to run.
//!
//! Exponential kernels use an O(horizon) running recursion; power-law
//! kernels fall back to the direct O(horizon²) convolution, which is fast
//! enough for the horizons this crate targets (tens of thousands of steps).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use super::continuous::{ContinuousError, ContinuousParams};
use super::volterra::GridFunction;
use crate::irf::{ImpactMetrics, KappaMode, MetaorderSpec, Trajectory};
use crate::numeric::{mix_seed, zeta};

/// Tolerance on `λ·Σd − 1` before a parameter set is refused as
/// supercritical; exact criticality is admissible by design.
const SUPERCRITICAL_EPS: f64 = 1e-9;

/// Errors from the discrete kernel model.
#[derive(Debug, Error)]
pub enum DiscreteError {
    /// A scalar parameter violates its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    /// A kernel shape is inadmissible for the slot it is used in.
    #[error("invalid {role} kernel: {msg}")]
    InvalidKernel { role: &'static str, msg: String },
    /// The excited flow would grow without bound: `λ·Σd = {product} > 1`.
    #[error(
        "supercritical excitation: lambda * kernel mass = {product} exceeds 1; \
         the flow equation diverges"
    )]
    Supercritical { product: f64 },
    /// Continuum-limit runs reuse the continuous-model validation.
    #[error(transparent)]
    Continuous(#[from] ContinuousError),
}

/// Memory-kernel shapes available to the discrete model, defined on lags
/// `i ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `k_i = e^{−rate·i}`.
    Exponential { rate: f64 },
    /// `k_i = i^{−exponent}`.
    PowerLaw { exponent: f64 },
}

/// Which equation a kernel feeds; the admissible shapes differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRole {
    /// Flow self-excitation kernel `d`: must have a finite lag sum so the
    /// criticality threshold exists (power laws need exponent > 1).
    Flow,
    /// Price impact kernel `g`: any decaying shape (power laws need
    /// exponent > 0).
    Impact,
}

impl KernelRole {
    fn name(self) -> &'static str {
        match self {
            KernelRole::Flow => "flow",
            KernelRole::Impact => "impact",
        }
    }
}

impl KernelSpec {
    /// Validates the shape for a given role.
    pub fn validate(&self, role: KernelRole) -> Result<(), DiscreteError> {
        let fail = |msg: String| Err(DiscreteError::InvalidKernel { role: role.name(), msg });
        match *self {
            KernelSpec::Exponential { rate } => {
                if !rate.is_finite() || rate <= 0.0 {
                    return fail(format!("exponential rate must be positive, got {rate}"));
                }
            }
            KernelSpec::PowerLaw { exponent } => {
                let min = match role {
                    KernelRole::Flow => 1.0,
                    KernelRole::Impact => 0.0,
                };
                if !exponent.is_finite() || exponent <= min {
                    return fail(format!(
                        "power-law exponent must exceed {min} for the {} kernel, got {exponent}",
                        role.name()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Kernel weights at lags `1 ..= n`.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match *self {
            KernelSpec::Exponential { rate } => {
                (1..=n).map(|i| (-rate * i as f64).exp()).collect()
            }
            KernelSpec::PowerLaw { exponent } => {
                (1..=n).map(|i| (i as f64).powf(-exponent)).collect()
            }
        }
    }

    /// Exact infinite lag sum `Σ_{i≥1} k_i`; requires a summable shape
    /// (validated for the flow role).
    fn infinite_sum(&self) -> f64 {
        match *self {
            KernelSpec::Exponential { rate } => 1.0 / rate.exp_m1(),
            KernelSpec::PowerLaw { exponent } => zeta(exponent),
        }
    }
}

/// Parameters of the discrete kernel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteParams {
    /// Flow self-excitation kernel `d`.
    pub kernel_d: KernelSpec,
    /// Price impact kernel `g`.
    pub kernel_g: KernelSpec,
    /// Excitation strength `λ ≥ 0` multiplying the flow kernel.
    pub lam: f64,
    /// Fraction of the metaorder routed through the flow equation.
    pub alpha: f64,
    /// Metaorder rate `V` per active step (negative for a sell order).
    pub v_rate: f64,
    /// Number of active steps `T ≥ 1` (steps `1 ..= T`).
    pub duration: usize,
    /// Last simulated step (`≥ duration`).
    pub horizon: usize,
    /// Per-step noise standard deviations `(σ_price, σ_volume)`.
    pub noise: (f64, f64),
    /// Seed for the noise stream; the skeleton (`noise = (0, 0)`) is
    /// unaffected by it.
    pub seed: u64,
}

impl DiscreteParams {
    /// Validates parameters, kernels, and the criticality bound.
    pub fn validate(&self) -> Result<(), DiscreteError> {
        let err = |msg: String| Err(DiscreteError::InvalidParams(msg));
        self.kernel_d.validate(KernelRole::Flow)?;
        self.kernel_g.validate(KernelRole::Impact)?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return err(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !self.v_rate.is_finite() || self.v_rate == 0.0 {
            return err(format!("v_rate must be finite and non-zero, got {}", self.v_rate));
        }
        if !self.lam.is_finite() || self.lam < 0.0 {
            return err(format!("lambda must be non-negative, got {}", self.lam));
        }
        if self.duration == 0 {
            return err("duration must be at least one step".into());
        }
        if self.horizon < self.duration {
            return err(format!(
                "horizon {} must reach at least the execution end {}",
                self.horizon, self.duration
            ));
        }
        if !self.noise.0.is_finite() || self.noise.0 < 0.0 || !self.noise.1.is_finite()
            || self.noise.1 < 0.0
        {
            return err(format!("noise standard deviations must be non-negative, got {:?}", self.noise));
        }
        let product = self.lam * self.kernel_d.infinite_sum();
        if product > 1.0 + SUPERCRITICAL_EPS {
            return Err(DiscreteError::Supercritical { product });
        }
        Ok(())
    }
}

/// Largest admissible excitation strength for a flow kernel: the `λ` at
/// which `λ·Σ_{i≥1} d_i = 1` and excited flow stops dying out.
pub fn critical_lambda(kernel: &KernelSpec) -> Result<f64, DiscreteError> {
    kernel.validate(KernelRole::Flow)?;
    Ok(1.0 / kernel.infinite_sum())
}

/// Distance from criticality, `1 − λ·Σ_{i≥1} d_i` (positive when
/// subcritical, zero at the threshold, negative when explosive).
pub fn criticality_margin(p: &DiscreteParams) -> Result<f64, DiscreteError> {
    p.kernel_d.validate(KernelRole::Flow)?;
    if !p.lam.is_finite() || p.lam < 0.0 {
        return Err(DiscreteError::InvalidParams(format!(
            "lambda must be non-negative, got {}",
            p.lam
        )));
    }
    Ok(1.0 - p.lam * p.kernel_d.infinite_sum())
}

/// Running convolution state for one kernel, O(1) per step for exponential
/// kernels and O(t) for power laws.
enum ConvState {
    Exponential { decay: f64, acc: f64 },
    PowerLaw { weights: Vec<f64> },
}

impl ConvState {
    fn new(spec: &KernelSpec, horizon: usize) -> ConvState {
        match *spec {
            KernelSpec::Exponential { rate } => {
                ConvState::Exponential { decay: (-rate).exp(), acc: 0.0 }
            }
            KernelSpec::PowerLaw { exponent } => ConvState::PowerLaw {
                weights: KernelSpec::PowerLaw { exponent }.weights(horizon),
            },
        }
    }

    /// Value of `Σ_{i=1}^{t} k_i · series[t−i]` where `series` currently
    /// holds entries `0 ..= t−1`; must be called once per step in order.
    fn advance(&mut self, series: &[f64]) -> f64 {
        let t = series.len();
        match self {
            ConvState::Exponential { decay, acc } => {
                *acc = *decay * (series[t - 1] + *acc);
                *acc
            }
            ConvState::PowerLaw { weights } => {
                let mut sum = 0.0;
                for i in 1..=t {
                    sum += weights[i - 1] * series[t - i];
                }
                sum
            }
        }
    }
}

/// Simulates one path of the discrete model.
///
/// With `noise = (0, 0)` this is the deterministic skeleton; otherwise both
/// equations receive independent Gaussian shocks drawn from a stream seeded
/// by `seed` (two draws per step, so paths with different noise scales but
/// the same seed share their shocks).
pub fn simulate(p: &DiscreteParams) -> Result<Trajectory, DiscreteError> {
    p.validate()?;
    let n = p.horizon;
    let mut rng = ChaCha12Rng::seed_from_u64(p.seed);
    let mut volume = Vec::with_capacity(n + 1);
    let mut flow_plus_direct = Vec::with_capacity(n + 1);
    let mut price = Vec::with_capacity(n + 1);
    volume.push(0.0);
    flow_plus_direct.push(0.0);
    price.push(0.0);
    let mut flow_conv = ConvState::new(&p.kernel_d, n);
    let mut impact_conv = ConvState::new(&p.kernel_g, n);
    for t in 1..=n {
        let shock_v: f64 = rng.sample(StandardNormal);
        let shock_p: f64 = rng.sample(StandardNormal);
        let active = t <= p.duration;
        let source = if active { p.alpha * p.v_rate } else { 0.0 };
        let excited = p.lam * flow_conv.advance(&volume);
        let v = source + excited + p.noise.1 * shock_v;
        let direct = if active { (1.0 - p.alpha) * p.v_rate } else { 0.0 };
        let level = impact_conv.advance(&flow_plus_direct) + p.noise.0 * shock_p;
        volume.push(v);
        flow_plus_direct.push(v + direct);
        price.push(level);
    }
    Ok(Trajectory {
        times: (0..=n as u64).collect(),
        price,
        volume,
        meta: MetaorderSpec {
            child_size: p.v_rate,
            duration: p.duration,
            horizon: p.horizon,
            kappa: KappaMode::VolumeCoupled,
        },
    })
}

/// Pointwise summary of a Monte Carlo ensemble of noisy paths.
#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    /// Pointwise mean path (price and volume).
    pub mean: Trajectory,
    /// Pointwise standard error of the mean price.
    pub std_err_price: Vec<f64>,
    /// Number of paths averaged.
    pub n_paths: usize,
}

/// Simulates `n_paths` independent noisy paths in parallel (path `i` uses a
/// seed derived from `p.seed` and `i`) and averages them pointwise.
///
/// The reduction order is fixed, so results are bit-identical regardless of
/// thread scheduling.
pub fn simulate_ensemble(p: &DiscreteParams, n_paths: usize) -> Result<EnsembleSummary, DiscreteError> {
    if n_paths < 2 {
        return Err(DiscreteError::InvalidParams(format!(
            "ensemble needs at least two paths, got {n_paths}"
        )));
    }
    p.validate()?;
    let paths: Vec<Trajectory> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut path_params = *p;
            path_params.seed = mix_seed(p.seed, i as u64);
            simulate(&path_params)
        })
        .collect::<Result<_, _>>()?;
    let len = p.horizon + 1;
    let mut price_sum = vec![0.0; len];
    let mut price_sumsq = vec![0.0; len];
    let mut volume_sum = vec![0.0; len];
    for path in &paths {
        for k in 0..len {
            price_sum[k] += path.price[k];
            price_sumsq[k] += path.price[k] * path.price[k];
            volume_sum[k] += path.volume[k];
        }
    }
    let n = n_paths as f64;
    let mut std_err_price = Vec::with_capacity(len);
    for k in 0..len {
        let mean = price_sum[k] / n;
        let var = (price_sumsq[k] / n - mean * mean).max(0.0) * n / (n - 1.0);
        std_err_price.push((var / n).sqrt());
    }
    let mean = Trajectory {
        times: (0..=p.horizon as u64).collect(),
        price: price_sum.iter().map(|s| s / n).collect(),
        volume: volume_sum.iter().map(|s| s / n).collect(),
        meta: paths[0].meta,
    };
    Ok(EnsembleSummary { mean, std_err_price, n_paths })
}

/// Peak/long-term summary of the deterministic skeleton.
pub fn skeleton_metrics(p: &DiscreteParams) -> Result<ImpactMetrics, DiscreteError> {
    let mut quiet = *p;
    quiet.noise = (0.0, 0.0);
    let path = simulate(&quiet)?;
    Ok(crate::irf::impact_metrics(&path))
}

/// Which endpoint of each cell a rectangle-rule discretization samples.
///
/// Both rules are first-order consistent with the continuous-time model and
/// must converge to the same limit; comparing them bounds the discretization
/// ambiguity of the trade-time model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointRule {
    /// Convolutions sample past values only (explicit step).
    Left,
    /// Convolutions include the contemporaneous value (implicit step,
    /// solved in closed form; requires `λ·dt < 1`).
    Right,
}

/// Rectangle-rule discretization of the continuous-time exponential-kernel
/// model with step `dt`, returning `(flow, price)` grids on `[0, t_max]`.
///
/// As `dt → 0` both endpoint rules converge at first order to the closed
/// forms of the continuous model, which is the sense in which the
/// trade-time model has a well-defined continuum limit.
pub fn continuum_discretization(
    cp: &ContinuousParams,
    t_max: f64,
    dt: f64,
    rule: EndpointRule,
) -> Result<(GridFunction, GridFunction), DiscreteError> {
    cp.validate()?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(ContinuousError::InvalidGrid(format!("step must be positive, got {dt}")).into());
    }
    if !t_max.is_finite() || t_max < dt {
        return Err(ContinuousError::InvalidGrid(format!(
            "horizon {t_max} must cover at least one step of size {dt}"
        ))
        .into());
    }
    let m = (cp.duration / dt).round();
    if (m * dt - cp.duration).abs() > 1e-9 * cp.duration.max(1.0) || m < 1.0 {
        return Err(ContinuousError::GridMisaligned { duration: cp.duration, dt }.into());
    }
    let m = m as usize;
    let n = (t_max / dt).round() as usize;
    if rule == EndpointRule::Right && cp.lam * dt >= 1.0 {
        return Err(ContinuousError::InvalidGrid(format!(
            "implicit endpoint rule requires lambda * dt < 1, got {}",
            cp.lam * dt
        ))
        .into());
    }
    let decay_d = (-cp.beta * dt).exp();
    let decay_g = (-cp.rho * dt).exp();
    let mut volume = Vec::with_capacity(n + 1);
    let mut price = Vec::with_capacity(n + 1);
    // Running sums: for Left, S_t = Σ_{i≥1} e^{−β·i·dt} v_{t−i}; for Right,
    // S_t = Σ_{i≥0} e^{−β·i·dt} v_{t−i} with v_0 excluded (its quadrature
    // weight is zero under the right-endpoint rule).
    let mut flow_acc = 0.0;
    let mut impact_acc = 0.0;
    for t in 0..=n {
        let active = t < m;
        let source = if active { cp.alpha * cp.v_rate } else { 0.0 };
        let direct = if active { (1.0 - cp.alpha) * cp.v_rate } else { 0.0 };
        let (v, level) = match rule {
            EndpointRule::Left => {
                let v = if t == 0 { source } else { source + cp.lam * dt * flow_acc };
                let level = if t == 0 { 0.0 } else { dt * impact_acc };
                // Fold the new sample in for the next step.
                flow_acc = decay_d * (v + flow_acc);
                impact_acc = decay_g * (v + direct + impact_acc);
                (v, level)
            }
            EndpointRule::Right => {
                if t == 0 {
                    (source, 0.0)
                } else {
                    let v = (source + cp.lam * dt * decay_d * flow_acc) / (1.0 - cp.lam * dt);
                    flow_acc = v + decay_d * flow_acc;
                    impact_acc = v + direct + decay_g * impact_acc;
                    (v, dt * impact_acc)
                }
            }
        };
        volume.push(v);
        price.push(level);
    }
    // The Right rule folds samples into the accumulators inside the branch
    // above except at t = 0, where v_0 carries no quadrature weight at all.
    Ok((
        GridFunction { t0: 0.0, dt, values: volume },
        GridFunction { t0: 0.0, dt, values: price },
    ))
}

/// Convergence study of the trade-time discretization toward the
/// continuous-time closed forms: for each step size, runs the left-endpoint
/// discretization on `[0, 2T]` and reports the worst absolute error across
/// both the flow and the price grids.
///
/// Step sizes must be strictly decreasing; the expected rectangle-rule
/// behaviour is a halving of the error for each halving of `dt`.
pub fn continuum_convergence(
    cp: &ContinuousParams,
    dt_list: &[f64],
) -> Result<Vec<(f64, f64)>, DiscreteError> {
    if dt_list.is_empty() {
        return Err(DiscreteError::InvalidParams("need at least one step size".into()));
    }
    if dt_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(DiscreteError::InvalidParams(format!(
            "step sizes must be strictly decreasing, got {dt_list:?}"
        )));
    }
    let t_max = 2.0 * cp.duration;
    let mut out = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let (flow, price) = continuum_discretization(cp, t_max, dt, EndpointRule::Left)?;
        let mut worst = 0.0_f64;
        for (i, (v, p)) in flow.values.iter().zip(&price.values).enumerate() {
            let t = dt * i as f64;
            worst = worst
                .max((v - super::continuous::volume_closed(cp, t)?).abs())
                .max((p - super::continuous::price_closed(cp, t)?).abs());
        }
        out.push((dt, worst));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::continuous::{price_closed, volume_closed};

    fn base_params() -> DiscreteParams {
        DiscreteParams {
            kernel_d: KernelSpec::Exponential { rate: 0.5 },
            kernel_g: KernelSpec::Exponential { rate: 0.2 },
            lam: 0.3,
            alpha: 0.6,
            v_rate: 1.0,
            duration: 50,
            horizon: 400,
            noise: (0.0, 0.0),
            seed: 7,
        }
    }

    #[test]
    fn critical_lambda_matches_kernel_mass() {
        let square = critical_lambda(&KernelSpec::PowerLaw { exponent: 2.0 }).unwrap();
        assert!((square - 6.0 / (std::f64::consts::PI * std::f64::consts::PI)).abs() < 1e-9);
        let slow = critical_lambda(&KernelSpec::PowerLaw { exponent: 1.5 }).unwrap();
        assert!((slow - 0.382793).abs() < 5e-6);
        let exp = critical_lambda(&KernelSpec::Exponential { rate: std::f64::consts::LN_2 }).unwrap();
        assert!((exp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn criticality_margin_matches_hand_value() {
        let p = DiscreteParams {
            kernel_d: KernelSpec::PowerLaw { exponent: 1.5 },
            lam: 0.34,
            ..base_params()
        };
        let margin = criticality_margin(&p).unwrap();
        assert!((margin - (1.0 - 0.34 * zeta(1.5))).abs() < 1e-15);
        assert!((margin - 0.1118).abs() < 1e-4);
    }

    #[test]
    fn supercritical_parameters_are_refused() {
        let p = DiscreteParams {
            kernel_d: KernelSpec::PowerLaw { exponent: 2.0 },
            lam: 0.62, // threshold is 6/π² ≈ 0.608
            ..base_params()
        };
        assert!(matches!(simulate(&p), Err(DiscreteError::Supercritical { .. })));
        assert!(criticality_margin(&p).unwrap() < 0.0);
    }

    #[test]
    fn kernel_role_constraints_are_enforced() {
        assert!(KernelSpec::PowerLaw { exponent: 0.9 }.validate(KernelRole::Flow).is_err());
        assert!(KernelSpec::PowerLaw { exponent: 0.9 }.validate(KernelRole::Impact).is_ok());
        assert!(KernelSpec::PowerLaw { exponent: -0.1 }.validate(KernelRole::Impact).is_err());
        assert!(KernelSpec::Exponential { rate: 0.0 }.validate(KernelRole::Flow).is_err());
        let p = DiscreteParams {
            kernel_d: KernelSpec::PowerLaw { exponent: 0.9 },
            ..base_params()
        };
        assert!(matches!(simulate(&p), Err(DiscreteError::InvalidKernel { .. })));
    }

    #[test]
    fn first_steps_match_hand_recursion() {
        let p = DiscreteParams {
            kernel_d: KernelSpec::Exponential { rate: 0.7 },
            kernel_g: KernelSpec::Exponential { rate: 0.4 },
            lam: 0.4,
            alpha: 0.5,
            v_rate: 2.0,
            duration: 5,
            horizon: 6,
            noise: (0.0, 0.0),
            seed: 1,
        };
        let traj = simulate(&p).unwrap();
        let v1 = 1.0; // α·V
        let v2 = 1.0 + 0.4 * (-0.7_f64).exp() * v1;
        assert!((traj.volume[1] - v1).abs() < 1e-15);
        assert!((traj.volume[2] - v2).abs() < 1e-15);
        // p_1 sees only the rest state; p_2 sees x_1 = v_1 + (1−α)V.
        assert_eq!(traj.price[1], 0.0);
        let p2 = (-0.4_f64).exp() * (v1 + 1.0);
        assert!((traj.price[2] - p2).abs() < 1e-15);
    }

    #[test]
    fn power_law_convolution_matches_hand_sum() {
        let p = DiscreteParams {
            kernel_d: KernelSpec::PowerLaw { exponent: 1.5 },
            kernel_g: KernelSpec::PowerLaw { exponent: 0.25 },
            lam: 0.3,
            alpha: 1.0,
            v_rate: 1.0,
            duration: 3,
            horizon: 3,
            noise: (0.0, 0.0),
            seed: 1,
        };
        let traj = simulate(&p).unwrap();
        let v1 = 1.0;
        let v2 = 1.0 + 0.3 * v1;
        let v3 = 1.0 + 0.3 * (v2 + 2.0_f64.powf(-1.5) * v1);
        assert!((traj.volume[3] - v3).abs() < 1e-15);
        let p3 = v2 + 2.0_f64.powf(-0.25) * v1;
        assert!((traj.price[3] - p3).abs() < 1e-15);
    }

    #[test]
    fn same_seed_reproduces_noisy_paths_exactly() {
        let p = DiscreteParams { noise: (0.3, 0.5), ..base_params() };
        let a = simulate(&p).unwrap();
        let b = simulate(&p).unwrap();
        assert_eq!(a.price, b.price);
        assert_eq!(a.volume, b.volume);
        let c = simulate(&DiscreteParams { seed: 8, ..p }).unwrap();
        assert_ne!(a.price, c.price);
    }

    /// With λ = 0 the two source channels add back to the full rate V, so
    /// the price path is independent of how the order is split.
    #[test]
    fn price_is_independent_of_alpha_when_flow_is_inert() {
        let base = DiscreteParams { lam: 0.0, ..base_params() };
        let full_flow = simulate(&DiscreteParams { alpha: 1.0, ..base }).unwrap();
        let full_direct = simulate(&DiscreteParams { alpha: 0.0, ..base }).unwrap();
        let split = simulate(&DiscreteParams { alpha: 0.37, ..base }).unwrap();
        assert_eq!(full_flow.price, full_direct.price);
        assert_eq!(full_flow.price, split.price);
    }

    /// At the critical excitation strength the excited flow never dies out:
    /// impact settles on a permanent plateau. Below threshold the flow
    /// decays and the price gives most of its peak back.
    #[test]
    fn criticality_separates_permanent_from_transient_impact() {
        let critical_rate = 0.5_f64;
        let p = DiscreteParams {
            kernel_d: KernelSpec::Exponential { rate: critical_rate },
            lam: critical_rate.exp_m1(), // λ·Σd exactly 1
            alpha: 1.0,
            ..base_params()
        };
        let traj = simulate(&p).unwrap();
        let metrics = crate::irf::impact_metrics(&traj);
        assert!(metrics.long_term > 0.5 * metrics.peak, "critical impact should persist");
        // The excited flow plateaus rather than decaying.
        assert!(traj.volume[p.horizon] > 0.5 * traj.volume[p.duration]);

        let sub = DiscreteParams { lam: 0.3, ..p };
        let metrics = skeleton_metrics(&sub).unwrap();
        assert!(
            metrics.reversion_ratio.unwrap() > 0.6,
            "subcritical impact should revert, got {:?}",
            metrics.reversion_ratio
        );
    }

    #[test]
    fn ensemble_mean_tracks_the_skeleton() {
        let p = DiscreteParams { noise: (0.4, 0.4), horizon: 100, duration: 20, ..base_params() };
        let summary = simulate_ensemble(&p, 300).unwrap();
        let skeleton = simulate(&DiscreteParams { noise: (0.0, 0.0), ..p }).unwrap();
        for &k in &[10_usize, 50, 100] {
            let gap = (summary.mean.price[k] - skeleton.price[k]).abs();
            assert!(
                gap < 3.0 * summary.std_err_price[k],
                "ensemble mean departs from skeleton at step {k}: gap {gap}, se {}",
                summary.std_err_price[k]
            );
        }
    }

    #[test]
    fn both_endpoint_rules_approach_the_closed_forms() {
        let cp = ContinuousParams {
            alpha: 0.5,
            v_rate: 1.0,
            lam: 0.3,
            beta: 1.0,
            rho: 0.5,
            duration: 5.0,
        };
        let dt = 2e-3_f64;
        let n = (10.0 / dt).round() as usize;
        let flow_ref: Vec<f64> = (0..=n).map(|i| volume_closed(&cp, dt * i as f64).unwrap()).collect();
        let price_ref: Vec<f64> = (0..=n).map(|i| price_closed(&cp, dt * i as f64).unwrap()).collect();
        let flow_scale = flow_ref.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let price_scale = price_ref.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for rule in [EndpointRule::Left, EndpointRule::Right] {
            let (flow, price) = continuum_discretization(&cp, 10.0, dt, rule).unwrap();
            let flow_err: f64 = flow
                .values
                .iter()
                .zip(&flow_ref)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let price_err: f64 = price
                .values
                .iter()
                .zip(&price_ref)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(flow_err / flow_scale < 5e-3, "{rule:?} flow error {flow_err}");
            assert!(price_err / price_scale < 5e-3, "{rule:?} price error {price_err}");
        }
    }

    #[test]
    fn refining_the_grid_shrinks_the_continuum_error_monotonically() {
        let cp = ContinuousParams {
            alpha: 1.0,
            v_rate: 1.0,
            lam: 0.4,
            beta: 0.8,
            rho: 0.5,
            duration: 10.0,
        };
        let report = continuum_convergence(&cp, &[0.1, 0.05, 0.025]).unwrap();
        assert!(report[0].1 > report[1].1 && report[1].1 > report[2].1, "{report:?}");
        assert!(matches!(
            continuum_convergence(&cp, &[0.05, 0.1]),
            Err(DiscreteError::InvalidParams(_))
        ));
    }

    #[test]
    fn continuum_grid_must_align_with_the_execution_end() {
        let cp = ContinuousParams {
            alpha: 0.5,
            v_rate: 1.0,
            lam: 0.3,
            beta: 1.0,
            rho: 0.5,
            duration: 5.0,
        };
        assert!(matches!(
            continuum_discretization(&cp, 10.0, 0.3, EndpointRule::Left),
            Err(DiscreteError::Continuous(ContinuousError::GridMisaligned { .. }))
        ));
    }

    #[test]
    fn invalid_scalars_are_rejected() {
        let p = DiscreteParams { horizon: 10, duration: 20, ..base_params() };
        assert!(matches!(simulate(&p), Err(DiscreteError::InvalidParams(_))));
        let p = DiscreteParams { alpha: -0.1, ..base_params() };
        assert!(matches!(simulate(&p), Err(DiscreteError::InvalidParams(_))));
        let p = DiscreteParams { noise: (-1.0, 0.0), ..base_params() };
        assert!(matches!(simulate(&p), Err(DiscreteError::InvalidParams(_))));
        assert!(matches!(simulate_ensemble(&base_params(), 1), Err(DiscreteError::InvalidParams(_))));
    }
}
