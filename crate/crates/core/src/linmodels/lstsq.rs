//! Streaming least squares via Givens-rotation QR updates.
//!
//! Rows are folded one at a time into an upper-triangular factor `R` and the
//! rotated target `Q'y`, so memory stays `O(k²)` in the regressor count `k`
//! regardless of sample size, and the solve never forms `(X'X)^{-1}`
//! explicitly — important because lag orders in the thousands make the design
//! matrix badly conditioned.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LstsqError {
    #[error("rank-deficient design: column {column} is numerically dependent")]
    RankDeficient { column: usize },
    #[error("need more rows than the {cols} regressors, got {rows}")]
    Underdetermined { rows: usize, cols: usize },
}

/// Incremental QR accumulator for one least-squares equation.
pub struct StreamingLstsq {
    k: usize,
    /// Upper-triangular factor, row-major `k×k` (lower part unused).
    r: Vec<f64>,
    /// First `k` entries of the rotated target.
    qty: Vec<f64>,
    /// Sum of squared rotated-away target components (the residual RSS).
    rss: f64,
    rows: usize,
    /// Per-column sum of squares of the raw inputs, for rank tolerance.
    col_sumsq: Vec<f64>,
}

/// Solution of a streamed least-squares problem.
pub struct LstsqSolution {
    pub beta: Vec<f64>,
    /// OLS standard errors (degree-of-freedom corrected).
    pub std_err: Vec<f64>,
    /// Residual variance `RSS / (rows − cols)`.
    pub resid_var: f64,
    pub rows: usize,
}

impl StreamingLstsq {
    pub fn new(k: usize) -> Self {
        StreamingLstsq {
            k,
            r: vec![0.0; k * k],
            qty: vec![0.0; k],
            rss: 0.0,
            rows: 0,
            col_sumsq: vec![0.0; k],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Folds one observation row into the factorization. `x` is consumed as
    /// scratch space.
    pub fn push_row(&mut self, x: &mut [f64], mut y: f64) {
        debug_assert_eq!(x.len(), self.k);
        for (j, &xj) in x.iter().enumerate() {
            self.col_sumsq[j] += xj * xj;
        }
        for j in 0..self.k {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let rjj = self.r[j * self.k + j];
            let h = rjj.hypot(xj);
            let (c, s) = (rjj / h, xj / h);
            self.r[j * self.k + j] = h;
            let row = &mut self.r[j * self.k..(j + 1) * self.k];
            for l in j + 1..self.k {
                let rl = row[l];
                let xl = x[l];
                row[l] = c * rl + s * xl;
                x[l] = -s * rl + c * xl;
            }
            let q = self.qty[j];
            self.qty[j] = c * q + s * y;
            y = -s * q + c * y;
        }
        self.rss += y * y;
        self.rows += 1;
    }

    /// Back-substitutes for the coefficient vector and its standard errors.
    pub fn solve(&self) -> Result<LstsqSolution, LstsqError> {
        let k = self.k;
        if self.rows <= k {
            return Err(LstsqError::Underdetermined {
                rows: self.rows,
                cols: k,
            });
        }
        // Rank check: a pivot tiny relative to its column's scale means the
        // column is (numerically) a linear combination of earlier ones.
        for j in 0..k {
            let pivot = self.r[j * k + j].abs();
            let scale = self.col_sumsq[j].sqrt().max(f64::MIN_POSITIVE);
            if pivot <= 1e-10 * scale {
                return Err(LstsqError::RankDeficient { column: j });
            }
        }

        let mut beta = vec![0.0; k];
        for j in (0..k).rev() {
            let mut acc = self.qty[j];
            for l in j + 1..k {
                acc -= self.r[j * k + l] * beta[l];
            }
            beta[j] = acc / self.r[j * k + j];
        }

        let resid_var = self.rss / (self.rows - k) as f64;

        // Var(β_j) = σ² ‖R^{-T} e_j‖²; forward-substitute on Rᵀ per column.
        let mut std_err = vec![0.0; k];
        let mut w = vec![0.0; k];
        for j in 0..k {
            for wi in w.iter_mut() {
                *wi = 0.0;
            }
            // Solve Rᵀ w = e_j; Rᵀ is lower triangular, so w[i] = 0 for i < j.
            w[j] = 1.0 / self.r[j * k + j];
            for i in j + 1..k {
                let mut acc = 0.0;
                for l in j..i {
                    acc -= self.r[l * k + i] * w[l];
                }
                w[i] = acc / self.r[i * k + i];
            }
            let norm_sq: f64 = w[j..].iter().map(|&wi| wi * wi).sum();
            std_err[j] = (resid_var * norm_sq).sqrt();
        }

        Ok(LstsqSolution {
            beta,
            std_err,
            resid_var,
            rows: self.rows,
        })
    }
}
