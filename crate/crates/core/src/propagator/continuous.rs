//! Closed-form solutions for the continuous-time model with exponential
//! kernels.
//!
//! The flow and price obey
//!
//! ```text
//! v(t) = α·V·1{0 ≤ t < T}  +  λ ∫₀ᵗ e^{−β(t−τ)} v(τ) dτ
//! p(t) = ∫₀ᵗ e^{−ρ(t−τ)} [ v(τ) + (1−α)·V·1{0 ≤ τ < T} ] dτ
//! ```
//!
//! Because the system is linear and time-invariant, switching the source off
//! at `T` is the superposition of the never-ending solution and a negated
//! copy started at `T`. Every closed form below therefore has the shape
//! `f(t) − θ(t−T)·f(t−T)`, with the step convention `θ(0) = 1` (the source is
//! active on `[0, T)`, so at `t = T` the trader has already stopped and the
//! flow has taken its post-stop value).
//!
//! The decay-rate gap `k = β − λ` controls the regime:
//! * `k > 0` — flow and impact relax; impact decays to zero.
//! * `k = 0` (within [`CRITICAL_BRANCH_EPS`]) — flow grows linearly during
//!   execution and plateaus after; impact tends to the finite level
//!   `α·V·β·T/ρ`.
//! * `k < 0` — the flow equation is explosive and no closed form applies.

use thiserror::Error;

/// Width of the branch switch onto the critical (`β = λ`) closed forms.
pub const CRITICAL_BRANCH_EPS: f64 = 1e-12;

/// Guard width around the removable-looking singularity `ρ = β − λ`, where
/// the two decay channels resonate and the generic price formula loses
/// precision catastrophically.
pub const RESONANCE_EPS: f64 = 1e-9;

/// Errors from the continuous-time closed forms and the quadrature oracle.
#[derive(Debug, Error)]
pub enum ContinuousError {
    /// A parameter violates its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    /// The flow equation diverges exponentially when the kernel decay is
    /// slower than the excitation rate.
    #[error("flow equation is explosive: beta = {beta} < lambda = {lam}")]
    ExplosiveFlow { beta: f64, lam: f64 },
    /// The price-decay rate coincides with the effective flow-decay rate,
    /// so the generic closed form degenerates (0/0).
    #[error(
        "price decay rate rho = {rho} resonates with the flow decay gap beta - lambda \
         (|difference| = {gap:.3e}); perturb rho to evaluate the closed form"
    )]
    ResonantDecay { rho: f64, gap: f64 },
    /// Closed forms are defined for `t ≥ 0` only.
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    /// The quadrature grid must place the execution end `T` exactly on a
    /// node, otherwise the flow discontinuity is smeared and the scheme
    /// drops to first order.
    #[error("duration {duration} is not an integer multiple of the grid step {dt}")]
    GridMisaligned { duration: f64, dt: f64 },
    /// The fixed-point quadrature left the admissible range (supercritical
    /// or badly conditioned input).
    #[error("quadrature solution exceeded 1e12 at t = {t}; system appears divergent")]
    QuadratureDiverged { t: f64 },
    /// A grid argument is structurally unusable (empty, non-positive step,
    /// mismatched origin).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Parameters of the continuous-time execution model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousParams {
    /// Fraction of the metaorder routed through the self-exciting flow
    /// equation; the remaining `1 − α` hits the price directly.
    pub alpha: f64,
    /// Trading rate `V` of the metaorder (volume per unit time; negative
    /// values describe a sell metaorder).
    pub v_rate: f64,
    /// Flow self-excitation strength `λ > 0`.
    pub lam: f64,
    /// Flow kernel decay rate `β > 0`.
    pub beta: f64,
    /// Price impact kernel decay rate `ρ > 0`.
    pub rho: f64,
    /// Execution duration `T > 0`; the source is active on `[0, T)`.
    pub duration: f64,
}

/// Where to expand the price path to second order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionPoint {
    /// Expansion of `p(t)` around `t = 0⁺`.
    Start,
    /// Expansion of `p(T + τ)` around `τ = 0⁺`, in the long-execution limit
    /// (corrections decay like `e^{−kT}` and `e^{−ρT}`). Defined for the
    /// relaxing regime `β > λ` only.
    AfterEnd,
}

impl ContinuousParams {
    /// Checks the static admissibility of the parameters (regime checks such
    /// as `β ≥ λ` are performed by the individual evaluators).
    pub fn validate(&self) -> Result<(), ContinuousError> {
        let err = |msg: String| Err(ContinuousError::InvalidParams(msg));
        if !(0.0..=1.0).contains(&self.alpha) {
            return err(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !self.v_rate.is_finite() || self.v_rate == 0.0 {
            return err(format!("v_rate must be finite and non-zero, got {}", self.v_rate));
        }
        for (name, value) in [("lam", self.lam), ("beta", self.beta), ("rho", self.rho)] {
            if !value.is_finite() || value <= 0.0 {
                return err(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return err(format!("duration must be positive and finite, got {}", self.duration));
        }
        Ok(())
    }

    /// True when the parameters sit on the critical branch `β = λ`.
    pub fn is_critical(&self) -> bool {
        (self.beta - self.lam).abs() <= CRITICAL_BRANCH_EPS
    }

    fn check_regime(&self) -> Result<(), ContinuousError> {
        if !self.is_critical() && self.beta < self.lam {
            return Err(ContinuousError::ExplosiveFlow { beta: self.beta, lam: self.lam });
        }
        Ok(())
    }

    fn check_resonance(&self) -> Result<(), ContinuousError> {
        let gap = (self.rho - (self.beta - self.lam)).abs();
        // The critical branch has its own formulas in which the resonance is
        // genuinely removable, so the guard only applies off-branch.
        if !self.is_critical() && gap <= RESONANCE_EPS {
            return Err(ContinuousError::ResonantDecay { rho: self.rho, gap });
        }
        Ok(())
    }
}

fn check_time(t: f64) -> Result<(), ContinuousError> {
    if !t.is_finite() || t < 0.0 {
        return Err(ContinuousError::NegativeTime(t));
    }
    Ok(())
}

/// Never-stop flow solution (source held on forever), valid on both branches.
fn flow_sustained(p: &ContinuousParams, t: f64) -> f64 {
    let source = p.alpha * p.v_rate;
    if p.is_critical() {
        source * (1.0 + p.beta * t)
    } else {
        let k = p.beta - p.lam;
        let b_ratio = p.beta / k;
        source * (b_ratio + (1.0 - b_ratio) * (-k * t).exp())
    }
}

/// Flow rate `v(t)` of the executed-plus-excited volume.
///
/// Exact for both the relaxing (`β > λ`) and critical (`β = λ`) regimes; the
/// flow drops by exactly `α·V` at `t = T` when the source switches off.
pub fn volume_closed(p: &ContinuousParams, t: f64) -> Result<f64, ContinuousError> {
    p.validate()?;
    p.check_regime()?;
    check_time(t)?;
    let mut v = flow_sustained(p, t);
    if t >= p.duration {
        v -= flow_sustained(p, t - p.duration);
    }
    Ok(v)
}

/// Never-stop price solution (source held on forever), valid on both
/// branches away from the resonance `ρ = β − λ`.
fn price_sustained(p: &ContinuousParams, t: f64) -> f64 {
    let exp_decay = |s: f64| (1.0 - (-p.rho * s).exp()) / p.rho;
    let direct = (1.0 - p.alpha) * p.v_rate * exp_decay(t);
    if p.is_critical() {
        // ∫ e^{−ρ(t−τ)} (1 + βτ) dτ = E(t) + β(ρt + e^{−ρt} − 1)/ρ².
        let ramp = p.beta * (p.rho * t + (-p.rho * t).exp() - 1.0) / (p.rho * p.rho);
        p.alpha * p.v_rate * (exp_decay(t) + ramp) + direct
    } else {
        let k = p.beta - p.lam;
        let b_ratio = p.beta / k;
        let cross = ((-k * t).exp() - (-p.rho * t).exp()) / (p.rho - k);
        p.alpha * p.v_rate * (b_ratio * exp_decay(t) + (1.0 - b_ratio) * cross) + direct
    }
}

/// Price path `p(t)` of the metaorder, exact in both regimes.
pub fn price_closed(p: &ContinuousParams, t: f64) -> Result<f64, ContinuousError> {
    p.validate()?;
    p.check_regime()?;
    p.check_resonance()?;
    check_time(t)?;
    let mut price = price_sustained(p, t);
    if t >= p.duration {
        price -= price_sustained(p, t - p.duration);
    }
    Ok(price)
}

/// Permanent impact level `lim_{t→∞} p(t)`.
///
/// Zero in the relaxing regime; `α·V·β·T/ρ` on the critical branch, where
/// the excited flow never dies out.
pub fn asymptote(p: &ContinuousParams) -> Result<f64, ContinuousError> {
    p.validate()?;
    p.check_regime()?;
    if p.is_critical() {
        Ok(p.alpha * p.v_rate * p.beta * p.duration / p.rho)
    } else {
        Ok(0.0)
    }
}

/// First and second derivatives of the price path at an expansion point.
///
/// * [`ExpansionPoint::Start`] returns `(p'(0⁺), p''(0⁺)) = (V, V(αλ − ρ))`,
///   exact on both branches. The second derivative changes sign at
///   `α = ρ/λ`: below it the path starts concave, above it convex.
/// * [`ExpansionPoint::AfterEnd`] returns the derivatives of `p(T + τ)` at
///   `τ = 0⁺` in the long-execution limit, `(−V, V(ρ − αλ))`; requires the
///   relaxing regime `β > λ` (on the critical branch the flow level at `T`
///   grows with `T` and no `T`-free expansion exists).
pub fn small_time_quadratic(
    p: &ContinuousParams,
    point: ExpansionPoint,
) -> Result<(f64, f64), ContinuousError> {
    p.validate()?;
    p.check_regime()?;
    match point {
        ExpansionPoint::Start => {
            Ok((p.v_rate, p.v_rate * (p.alpha * p.lam - p.rho)))
        }
        ExpansionPoint::AfterEnd => {
            if p.is_critical() {
                return Err(ContinuousError::InvalidParams(
                    "after-end expansion requires beta > lambda; on the critical branch use \
                     post_execution_inertia"
                        .into(),
                ));
            }
            Ok((-p.v_rate, p.v_rate * (p.rho - p.alpha * p.lam)))
        }
    }
}

/// Whether the price keeps rising immediately after execution ends on the
/// critical branch (`β = λ`), in the long-execution limit.
///
/// There `p'(T⁺) = V(αβ − ρ)/ρ`, so the path shows inertia exactly when
/// `α > ρ/β`: enough of the order flowed through the self-exciting channel
/// that the excited volume outweighs the decay of accumulated impact.
pub fn post_execution_inertia(p: &ContinuousParams) -> Result<bool, ContinuousError> {
    p.validate()?;
    if !p.is_critical() {
        return Err(ContinuousError::InvalidParams(format!(
            "inertia criterion applies on the critical branch only (beta = {}, lambda = {})",
            p.beta, p.lam
        )));
    }
    Ok(p.alpha * p.beta > p.rho)
}

/// Price level after the fast (rate-`ρ`) component has relaxed, at time
/// `t ≥ T`.
///
/// In the relaxing regime the slow component is
/// `α·V·(1 − β/k)·(e^{−kt} − e^{−k(t−T)})/(ρ − k)` with `k = β − λ`; on the
/// critical branch the flow plateau makes the level constant and equal to
/// the asymptote `α·V·β·T/ρ`.
pub fn first_relaxation_level(p: &ContinuousParams, t: f64) -> Result<f64, ContinuousError> {
    p.validate()?;
    p.check_regime()?;
    check_time(t)?;
    if t < p.duration {
        return Err(ContinuousError::InvalidParams(format!(
            "relaxation level is defined after execution ends (t = {t} < duration = {})",
            p.duration
        )));
    }
    if p.is_critical() {
        return asymptote(p);
    }
    p.check_resonance()?;
    let k = p.beta - p.lam;
    let b_ratio = p.beta / k;
    let slow = ((-k * t).exp() - (-k * (t - p.duration)).exp()) / (p.rho - k);
    Ok(p.alpha * p.v_rate * (1.0 - b_ratio) * slow)
}

/// Gap between the price peak `p(T)` and the permanent level on the critical
/// branch, in the long-execution limit: `(V/ρ²)(ρ − αβ)`.
///
/// The gap vanishes at `α = ρ/β` — the same threshold as
/// [`post_execution_inertia`] — separating overshooting paths (positive gap,
/// peak above the plateau) from paths that continue climbing after the end.
pub fn peak_gap_critical(p: &ContinuousParams) -> Result<f64, ContinuousError> {
    p.validate()?;
    if !p.is_critical() {
        return Err(ContinuousError::InvalidParams(format!(
            "peak gap formula applies on the critical branch only (beta = {}, lambda = {})",
            p.beta, p.lam
        )));
    }
    Ok(p.v_rate / (p.rho * p.rho) * (p.rho - p.alpha * p.beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relaxing() -> ContinuousParams {
        ContinuousParams {
            alpha: 0.7,
            v_rate: 2.0,
            lam: 0.4,
            beta: 0.8,
            rho: 0.25,
            duration: 10.0,
        }
    }

    fn critical() -> ContinuousParams {
        ContinuousParams {
            alpha: 1.0,
            v_rate: 1.0,
            lam: 1.0,
            beta: 1.0,
            rho: 0.3,
            duration: 50.0,
        }
    }

    #[test]
    fn critical_flow_ramps_linearly_then_plateaus() {
        let p = critical();
        // During execution the excited flow grows linearly: v(2) = 1 + 1·2.
        assert!((volume_closed(&p, 2.0).unwrap() - 3.0).abs() < 1e-12);
        // After execution it plateaus at α·V·β·T = 50.
        assert!((volume_closed(&p, 200.0).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn flow_drops_by_exactly_the_source_rate_at_the_end() {
        let p = relaxing();
        let source = p.alpha * p.v_rate;
        let pre = flow_sustained(&p, p.duration);
        let post = volume_closed(&p, p.duration).unwrap();
        assert!((pre - post - source).abs() < 1e-12);
        // Continuity from the left onto the sustained branch.
        let near = volume_closed(&p, p.duration - 1e-9).unwrap();
        assert!((near - pre).abs() < 1e-6);
    }

    #[test]
    fn relaxing_flow_approaches_amplified_source_level() {
        let mut p = relaxing();
        p.duration = 400.0;
        // Steady state α·V·β/(β−λ): the kernel amplifies the source by β/k.
        let expected = p.alpha * p.v_rate * p.beta / (p.beta - p.lam);
        assert!((volume_closed(&p, 300.0).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn fully_direct_order_gives_pure_exponential_saturation() {
        let p = ContinuousParams {
            alpha: 0.0,
            v_rate: 1.0,
            lam: 0.4,
            beta: 0.8,
            rho: 0.2,
            duration: 400.0,
        };
        let expected = (1.0 - (-0.2_f64 * 200.0).exp()) / 0.2;
        assert!((price_closed(&p, 200.0).unwrap() - expected).abs() < 1e-10);
    }

    /// The price obeys p'(t) = v(t) + (1−α)V·1{t<T} − ρ·p(t); checking the
    /// closed form against this identity via central differences exercises
    /// every branch of both formulas at once.
    #[test]
    fn price_derivative_matches_flow_balance() {
        let h = 1e-6;
        for p in [relaxing(), critical()] {
            for (t, active) in [(3.0, true), (p.duration + 3.0, false)] {
                let deriv = (price_closed(&p, t + h).unwrap() - price_closed(&p, t - h).unwrap())
                    / (2.0 * h);
                let direct = if active { (1.0 - p.alpha) * p.v_rate } else { 0.0 };
                let balance =
                    volume_closed(&p, t).unwrap() + direct - p.rho * price_closed(&p, t).unwrap();
                assert!(
                    (deriv - balance).abs() < 1e-5,
                    "flow balance violated at t = {t}: {deriv} vs {balance}"
                );
            }
        }
    }

    #[test]
    fn critical_asymptote_is_reached() {
        let p = ContinuousParams {
            alpha: 1.0,
            v_rate: 1.0,
            lam: 0.5,
            beta: 0.5,
            rho: 0.3,
            duration: 20.0,
        };
        let level = asymptote(&p).unwrap();
        assert!((level - 100.0 / 3.0).abs() < 1e-10);
        assert!((price_closed(&p, 3000.0).unwrap() - level).abs() < 1e-9);
    }

    #[test]
    fn relaxing_impact_decays_to_zero() {
        let p = relaxing();
        assert_eq!(asymptote(&p).unwrap(), 0.0);
        assert!(price_closed(&p, 500.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn start_expansion_matches_finite_differences() {
        let h = 1e-3;
        for p in [relaxing(), critical()] {
            let (first, second) = small_time_quadratic(&p, ExpansionPoint::Start).unwrap();
            assert_eq!(first, p.v_rate);
            assert_eq!(second, p.v_rate * (p.alpha * p.lam - p.rho));
            let p0 = price_closed(&p, 0.0).unwrap();
            let p1 = price_closed(&p, h).unwrap();
            let p2 = price_closed(&p, 2.0 * h).unwrap();
            assert!(p0.abs() < 1e-15);
            assert!(((p1 - p0) / h - first).abs() < 5e-3 * first.abs().max(1.0));
            let second_diff = (p2 - 2.0 * p1 + p0) / (h * h);
            assert!((second_diff - second).abs() < 5e-2 * second.abs().max(1.0));
        }
    }

    #[test]
    fn after_end_expansion_matches_long_execution_paths() {
        let mut p = relaxing();
        p.duration = 60.0; // k·T = 24, so the T-dependent corrections vanish.
        let (first, second) = small_time_quadratic(&p, ExpansionPoint::AfterEnd).unwrap();
        assert_eq!(first, -p.v_rate);
        assert_eq!(second, p.v_rate * (p.rho - p.alpha * p.lam));
        let h = 1e-3;
        let q = |tau: f64| price_closed(&p, p.duration + tau).unwrap();
        assert!(((q(h) - q(0.0)) / h - first).abs() < 5e-3 * p.v_rate);
        let second_diff = (q(2.0 * h) - 2.0 * q(h) + q(0.0)) / (h * h);
        assert!((second_diff - second).abs() < 5e-2 * second.abs().max(1.0));
    }

    #[test]
    fn after_end_expansion_rejects_critical_branch() {
        assert!(matches!(
            small_time_quadratic(&critical(), ExpansionPoint::AfterEnd),
            Err(ContinuousError::InvalidParams(_))
        ));
    }

    #[test]
    fn peak_gap_matches_long_execution_difference() {
        let p = ContinuousParams {
            alpha: 0.2,
            v_rate: 1.0,
            lam: 0.5,
            beta: 0.5,
            rho: 0.3,
            duration: 200.0,
        };
        let gap = peak_gap_critical(&p).unwrap();
        assert!((gap - 0.2 / 0.09).abs() < 1e-12);
        let peak = price_closed(&p, p.duration).unwrap();
        let level = asymptote(&p).unwrap();
        assert!((peak - level - gap).abs() < 1e-9);
    }

    #[test]
    fn inertia_threshold_separates_rising_from_falling_paths() {
        let mut p = ContinuousParams {
            alpha: 0.9,
            v_rate: 1.0,
            lam: 0.5,
            beta: 0.5,
            rho: 0.3,
            duration: 100.0,
        };
        // ρ/β = 0.6: α = 0.9 keeps climbing, α = 0.2 turns around.
        assert!(post_execution_inertia(&p).unwrap());
        let peak = price_closed(&p, p.duration).unwrap();
        assert!(price_closed(&p, p.duration + 0.5).unwrap() > peak);

        p.alpha = 0.2;
        assert!(!post_execution_inertia(&p).unwrap());
        let peak = price_closed(&p, p.duration).unwrap();
        assert!(price_closed(&p, p.duration + 0.5).unwrap() < peak);
    }

    #[test]
    fn relaxation_level_tracks_price_once_fast_mode_dies() {
        let p = ContinuousParams {
            alpha: 0.7,
            v_rate: 1.0,
            lam: 0.3,
            beta: 0.5,
            rho: 2.0,
            duration: 30.0,
        };
        // At t = T + 8 the fast mode is e^{−16} ≈ 1e-7 of its initial size
        // while the slow mode is still ~0.2 of its own.
        let t = p.duration + 8.0;
        let level = first_relaxation_level(&p, t).unwrap();
        assert!(level > 0.05, "slow component should still be visible, got {level}");
        assert!((price_closed(&p, t).unwrap() - level).abs() < 1e-5);
    }

    #[test]
    fn critical_relaxation_level_is_the_asymptote() {
        let p = critical();
        let t = p.duration + 40.0;
        let level = first_relaxation_level(&p, t).unwrap();
        assert_eq!(level, asymptote(&p).unwrap());
        assert!((price_closed(&p, t).unwrap() - level).abs() < 1e-4);
    }

    #[test]
    fn resonant_decay_is_rejected() {
        let p = ContinuousParams {
            alpha: 0.5,
            v_rate: 1.0,
            lam: 0.3,
            beta: 0.8,
            rho: 0.5, // exactly β − λ
            duration: 10.0,
        };
        assert!(matches!(
            price_closed(&p, 1.0),
            Err(ContinuousError::ResonantDecay { .. })
        ));
        let mut nudged = p;
        nudged.rho = 0.5 + 5e-10; // still inside the guard band
        assert!(matches!(
            price_closed(&nudged, 1.0),
            Err(ContinuousError::ResonantDecay { .. })
        ));
        nudged.rho = 0.5 + 1e-6; // outside the band: evaluates cleanly
        assert!(price_closed(&nudged, 1.0).is_ok());
    }

    #[test]
    fn explosive_flow_is_rejected() {
        let p = ContinuousParams {
            alpha: 0.5,
            v_rate: 1.0,
            lam: 0.9,
            beta: 0.4,
            rho: 0.3,
            duration: 5.0,
        };
        assert!(matches!(
            volume_closed(&p, 1.0),
            Err(ContinuousError::ExplosiveFlow { .. })
        ));
        assert!(matches!(asymptote(&p), Err(ContinuousError::ExplosiveFlow { .. })));
    }

    #[test]
    fn parameter_and_time_validation() {
        let mut p = relaxing();
        p.alpha = 1.2;
        assert!(matches!(volume_closed(&p, 1.0), Err(ContinuousError::InvalidParams(_))));
        let p = relaxing();
        assert!(matches!(price_closed(&p, -0.5), Err(ContinuousError::NegativeTime(_))));
        assert!(matches!(
            first_relaxation_level(&p, 1.0),
            Err(ContinuousError::InvalidParams(_))
        ));
        assert!(matches!(peak_gap_critical(&p), Err(ContinuousError::InvalidParams(_))));
    }
}
