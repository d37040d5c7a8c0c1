//! Kernel-based impact models coupling transient price impact with
//! self-exciting order flow.
//!
//! A metaorder trades at rate `V` for a duration `T`; a fraction `α` of that
//! volume enters the *flow* equation (where it excites follow-on volume
//! through a memory kernel `D`), while the rest hits the price directly. The
//! price integrates all flow through a decaying impact kernel `G`.
//!
//! * [`continuous`] — exact solutions for exponential kernels in continuous
//!   time, plus series expansions and asymptotes;
//! * [`volterra`] — an independent quadrature engine (trapezoidal
//!   Volterra solver + price convolution) used as a numerical oracle;
//! * [`discrete`] — the trade-time analogue with exponential or power-law
//!   kernels, criticality diagnostics, and continuum-limit checks.

pub mod continuous;
pub mod discrete;
pub mod volterra;

pub use continuous::{
    asymptote, first_relaxation_level, peak_gap_critical, post_execution_inertia, price_closed,
    small_time_quadratic, volume_closed, ContinuousError, ContinuousParams, ExpansionPoint,
};
pub use discrete::{
    continuum_convergence, continuum_discretization, critical_lambda, criticality_margin,
    simulate, simulate_ensemble, skeleton_metrics, DiscreteError, DiscreteParams, EndpointRule,
    EnsembleSummary, KernelRole, KernelSpec,
};
pub use volterra::{
    metaorder_price_oracle, metaorder_volume_oracle, price_integrate, volterra_solve, GridFunction,
};
