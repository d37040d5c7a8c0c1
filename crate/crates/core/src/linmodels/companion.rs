//! Companion-form state-space representation of a fitted linear model.
//!
//! The reduced form of the two-equation lag-`p` system stacks
//! `z_t = (Δp_t, v_t, Δp_{t-1}, v_{t-1}, …)` into a `2p`-vector with
//! `z_t = Γ z_{t-1} + ε_t`. Only the first two rows of `Γ` are dense — the
//! rest shift the state — so `Γ` is stored as those two rows and every
//! product, transpose product, and `(I−Γ)` solve runs in `O(p)` time without
//! materializing the matrix. Selector vectors: `e1` picks the price change,
//! `e2 = (b₀, 1, 0, …)` is the state kick of a unit volume shock.

use thiserror::Error;

use super::LinearModel;

/// Spectral-radius tolerance below one for the stationarity verdict.
pub const STATIONARITY_EPS: f64 = 1e-10;

/// Dimension above which the spectral radius falls back from a dense
/// eigensolve to power iteration (dense is exact and cheap for `2p ≤ 128`).
const DENSE_EIG_MAX_P: usize = 64;

const POWER_ITER_MAX: usize = 10_000;
const POWER_ITER_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CompanionError {
    #[error("(I - Γ) is numerically singular; the system has a unit root")]
    SingularSystem,
}

/// Companion form `z_t = Γ z_{t-1} + ε_t` of a [`LinearModel`].
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    pub p: usize,
    /// First (price-change) row of Γ: entries `(a_i + b₀c_i, b_i + b₀d_i)`.
    dp_row: Vec<f64>,
    /// Second (volume) row of Γ: entries `(c_i, d_i)`.
    v_row: Vec<f64>,
    /// Contemporaneous impact coefficient, the first entry of `e2`.
    pub b0: f64,
    /// Largest eigenvalue modulus of Γ.
    pub spectral_radius: f64,
}

impl CompanionSystem {
    pub fn from_model(m: &LinearModel) -> Self {
        let p = m.p;
        let b0 = m.b[0];
        let mut dp_row = vec![0.0; 2 * p];
        let mut v_row = vec![0.0; 2 * p];
        for j in 0..p {
            dp_row[2 * j] = m.a[j] + b0 * m.c[j];
            dp_row[2 * j + 1] = m.b[j + 1] + b0 * m.d[j];
            v_row[2 * j] = m.c[j];
            v_row[2 * j + 1] = m.d[j];
        }
        let mut cs = CompanionSystem {
            p,
            dp_row,
            v_row,
            b0,
            spectral_radius: 0.0,
        };
        cs.spectral_radius = cs.compute_spectral_radius();
        cs
    }

    /// State dimension `2p`.
    pub fn dim(&self) -> usize {
        2 * self.p
    }

    /// Price-change selector `e1 = (1, 0, …, 0)`.
    pub fn e1(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[0] = 1.0;
        e
    }

    /// Volume-shock kick `e2 = (b₀, 1, 0, …, 0)`.
    pub fn e2(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[0] = self.b0;
        e[1] = 1.0;
        e
    }

    /// Sum of the volume-equation lag coefficients `Σ d_i`.
    pub fn sum_d(&self) -> f64 {
        (0..self.p).map(|j| self.v_row[2 * j + 1]).sum()
    }

    /// `out = Γ x` in `O(p)`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        let mut dp = 0.0;
        let mut v = 0.0;
        for i in 0..n {
            dp += self.dp_row[i] * x[i];
            v += self.v_row[i] * x[i];
        }
        // Shift blocks: block j of the output copies block j-1 of the input.
        for i in (2..n).rev() {
            out[i] = x[i - 2];
        }
        out[0] = dp;
        out[1] = v;
    }

    /// `out = Γᵀ x` in `O(p)`.
    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let shifted = if i + 2 < n { x[i + 2] } else { 0.0 };
            out[i] = self.dp_row[i] * x[0] + self.v_row[i] * x[1] + shifted;
        }
    }

    /// Solves `(I − Γ) x = b` in `O(p)` using the shift structure: the lower
    /// block rows give `x_j = x_0 + Σ_{m≤j} b_m`, and the dense first block
    /// row closes a 2×2 system for `x_0`.
    pub fn solve_i_minus_gamma(&self, b: &[f64]) -> Result<Vec<f64>, CompanionError> {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let p = self.p;

        // M = Σ_j Ã_{j+1} (2×2 lag-matrix sum), r = Σ_j Ã_{j+1} s_j with
        // s_j the prefix sums of the rhs blocks below the first.
        let (mut m00, mut m01, mut m10, mut m11) = (0.0, 0.0, 0.0, 0.0);
        let (mut r0, mut r1) = (0.0, 0.0);
        let (mut s0, mut s1) = (0.0, 0.0);
        for j in 0..p {
            let a00 = self.dp_row[2 * j];
            let a01 = self.dp_row[2 * j + 1];
            let a10 = self.v_row[2 * j];
            let a11 = self.v_row[2 * j + 1];
            m00 += a00;
            m01 += a01;
            m10 += a10;
            m11 += a11;
            r0 += a00 * s0 + a01 * s1;
            r1 += a10 * s0 + a11 * s1;
            if j + 1 < p {
                s0 += b[2 * (j + 1)];
                s1 += b[2 * (j + 1) + 1];
            }
        }

        let (x0, x1) = solve_2x2(
            1.0 - m00,
            -m01,
            -m10,
            1.0 - m11,
            b[0] + r0,
            b[1] + r1,
        )?;

        let mut x = vec![0.0; n];
        x[0] = x0;
        x[1] = x1;
        for j in 1..p {
            x[2 * j] = x[2 * (j - 1)] + b[2 * j];
            x[2 * j + 1] = x[2 * j - 1] + b[2 * j + 1];
        }
        Ok(x)
    }

    /// Solves `(I − Γᵀ) x = b` in `O(p)`. Each entry is affine in
    /// `(x_0, x_1)` via a backward recursion, and rows 0–1 close the 2×2
    /// system.
    pub fn solve_i_minus_gamma_transpose(&self, b: &[f64]) -> Result<Vec<f64>, CompanionError> {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let mut aff = vec![0.0; n]; // constant term
        let mut cx0 = vec![0.0; n]; // coefficient on x_0
        let mut cx1 = vec![0.0; n]; // coefficient on x_1
        for i in (0..n).rev() {
            let (an, b0n, c1n) = if i + 2 < n {
                (aff[i + 2], cx0[i + 2], cx1[i + 2])
            } else {
                (0.0, 0.0, 0.0)
            };
            aff[i] = b[i] + an;
            cx0[i] = self.dp_row[i] + b0n;
            cx1[i] = self.v_row[i] + c1n;
        }
        let (x0, x1) = solve_2x2(
            1.0 - cx0[0],
            -cx1[0],
            -cx0[1],
            1.0 - cx1[1],
            aff[0],
            aff[1],
        )?;
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = aff[i] + cx0[i] * x0 + cx1[i] * x1;
        }
        x[0] = x0;
        x[1] = x1;
        Ok(x)
    }

    /// Materializes Γ densely — intended for small systems and tests.
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut g = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            g[(0, i)] = self.dp_row[i];
            g[(1, i)] = self.v_row[i];
        }
        for i in 2..n {
            g[(i, i - 2)] = 1.0;
        }
        g
    }

    fn compute_spectral_radius(&self) -> f64 {
        if self.p <= DENSE_EIG_MAX_P {
            let eig = self.dense().complex_eigenvalues();
            return eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
        }
        self.power_iteration_radius()
    }

    /// Norm-growth power iteration. The per-step growth of `‖Γ^k x‖` is
    /// averaged over a window so complex-pair oscillation cancels; stops when
    /// consecutive window estimates agree to `POWER_ITER_TOL`.
    fn power_iteration_radius(&self) -> f64 {
        use rand::{Rng, SeedableRng};
        let n = self.dim();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x5eed_cafe);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = l2(&x);
        for xi in x.iter_mut() {
            *xi /= norm;
        }
        let mut y = vec![0.0; n];
        const WINDOW: usize = 64;
        let mut log_growth = std::collections::VecDeque::with_capacity(WINDOW);
        let mut prev_est = f64::NAN;
        for iter in 0..POWER_ITER_MAX {
            self.apply(&x, &mut y);
            let ny = l2(&y);
            if ny < 1e-300 {
                return 0.0; // nilpotent direction: radius numerically zero
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / ny;
            }
            if log_growth.len() == WINDOW {
                log_growth.pop_front();
            }
            log_growth.push_back(ny.ln());
            if log_growth.len() == WINDOW && iter % WINDOW == 0 {
                let est =
                    (log_growth.iter().sum::<f64>() / log_growth.len() as f64).exp();
                if !prev_est.is_nan()
                    && (est - prev_est).abs() <= POWER_ITER_TOL * est.max(1.0)
                {
                    return est;
                }
                prev_est = est;
            }
        }
        let mean = log_growth.iter().sum::<f64>() / log_growth.len().max(1) as f64;
        mean.exp()
    }
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn solve_2x2(
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    r0: f64,
    r1: f64,
) -> Result<(f64, f64), CompanionError> {
    let det = a * d - b * c;
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs()).max(1.0);
    if det.abs() <= 1e-14 * scale * scale {
        return Err(CompanionError::SingularSystem);
    }
    Ok(((r0 * d - r1 * b) / det, (a * r1 - c * r0) / det))
}

/// Stationarity verdict derived from a companion system.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub spectral_radius: f64,
    pub sum_d: f64,
    pub is_stationary: bool,
}

/// Summarizes whether shocks die out: stationary iff the spectral radius is
/// below `1 − 1e-10`.
pub fn stationarity_report(cs: &CompanionSystem) -> StationarityReport {
    StationarityReport {
        spectral_radius: cs.spectral_radius,
        sum_d: cs.sum_d(),
        is_stationary: cs.spectral_radius < 1.0 - STATIONARITY_EPS,
    }
}
