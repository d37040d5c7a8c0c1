//! Shared helpers for the integration-test targets.

#![allow(dead_code)]

use impactlab::linmodels::{companion, LinearModel, ModelKind};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Largest companion spectral radius accepted by [`random_stable_model`].
/// Keeps horizon-500 trajectories numerically tame.
pub const STABLE_RADIUS_CAP: f64 = 0.95;

/// Draws a random stationary model of the given kind with lag order
/// `1 ..= max_p`. Coefficients decay geometrically in the lag so most draws
/// are stable; unstable draws are rejected and redrawn, which keeps the
/// generator deterministic for a fixed RNG state.
pub fn random_stable_model(rng: &mut ChaCha12Rng, kind: ModelKind, max_p: usize) -> LinearModel {
    loop {
        let p = rng.gen_range(1..=max_p);
        let b0 = rng.gen_range(0.05..1.0);
        let mut b = Vec::with_capacity(p + 1);
        b.push(b0);
        for i in 1..=p {
            b.push(rng.gen_range(-0.5..0.5) * 0.7f64.powi(i as i32 - 1));
        }
        let mut d = Vec::with_capacity(p);
        for i in 1..=p {
            d.push(rng.gen_range(-1.0..1.0) * 0.45 * 0.75f64.powi(i as i32 - 1));
        }
        let m = match kind {
            ModelKind::Tim => LinearModel::tim(b, d),
            ModelKind::Hasbrouck => {
                let mut a = Vec::with_capacity(p);
                let mut c = Vec::with_capacity(p);
                for i in 1..=p {
                    let scale = 0.6f64.powi(i as i32 - 1);
                    a.push(rng.gen_range(-0.3..0.3) * scale);
                    c.push(rng.gen_range(-0.3..0.3) * scale);
                }
                LinearModel::hasbrouck(a, b, c, d)
            }
        };
        if companion(&m).spectral_radius < STABLE_RADIUS_CAP {
            return m;
        }
    }
}

/// Maximum absolute elementwise difference between two equal-length slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Relative gap `|x - y| / max(1, |x|)`, suitable for coefficient checks.
pub fn rel_gap(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(1.0)
}
