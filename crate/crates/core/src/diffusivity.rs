//! Long-memory diagnostics for order flow and the diffusivity of the
//! resulting price.
//!
//! Order-flow signs are persistent: metaorder splitting produces a sign
//! autocorrelation decaying like `k^{−γ}` with `γ < 1`. A price that
//! responds to such flow through a decaying lag kernel `g_ℓ = ℓ^{−δ}`
//! (applied in *level* form, `p_t = Σ_{ℓ≥1} g_ℓ · flow_{t−ℓ}`) is diffusive
//! — increment variance growing linearly in the horizon — only when the
//! kernel decay balances the flow memory at `δ = (1 − γ)/2`. A flat kernel
//! (`δ = 0`, the price simply accumulates flow) turns the same flow into a
//! superdiffusive price with variance exponent `2 − γ`.
//!
//! The module provides the flow generator (metaorder signs, optionally
//! passed through a short-memory autoregressive volume filter), the
//! estimators (autocorrelation decay, Welch spectra, increment-variance
//! scaling), and a combined report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::marketdata::{synth_lmf_orderflow, LmfFlowParams, MarketDataError};
use crate::numeric::{fft_convolve, line_fit, power_spectrum};

/// Errors from the flow diagnostics.
#[derive(Debug, Error)]
pub enum DiffusivityError {
    /// A scalar parameter violates its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    /// The autoregressive filter has unit or larger total weight, so its
    /// output variance diverges.
    #[error("unstable flow filter: coefficient sum {sum} must stay below 1")]
    UnstableFilter { sum: f64 },
    /// Too few observations for the requested estimate.
    #[error("series of length {len} is too short; need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    /// A constant series has no autocorrelation.
    #[error("series is constant; autocorrelation is undefined")]
    ConstantSeries,
    /// Log-log decay fits need strictly positive autocorrelations.
    #[error("autocorrelation is non-positive at lag {lag}; no power-law decay to fit")]
    NonpositiveAcf { lag: usize },
    /// The variance-scaling window list is unusable.
    #[error("invalid window list: {0}")]
    InvalidWindows(String),
    /// Errors from the synthetic metaorder flow generator.
    #[error(transparent)]
    Flow(#[from] MarketDataError),
}

/// Where the raw flow signs come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowSource {
    /// Independent fair-coin signs (no memory).
    Iid,
    /// Signs from concurrent metaorders with power-law sizes: tail exponent
    /// `a` gives sign memory `γ = a − 1`.
    LongMemory { tail_exponent: f64, n_metaorders: usize },
}

/// Parameters of the stationary-flow generator.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryFlowParams {
    /// Sign source.
    pub source: FlowSource,
    /// Non-negative autoregressive volume-filter coefficients `d_i` with
    /// `Σ d_i < 1`; empty for unfiltered signs.
    pub ar_coefficients: Vec<f64>,
    /// Number of steps to generate.
    pub length: usize,
    /// Seed for the sign stream.
    pub seed: u64,
}

/// A generated flow series, before and after the volume filter.
#[derive(Debug, Clone)]
pub struct StationaryFlow {
    /// Raw signs.
    pub raw: Vec<f64>,
    /// Filter output `w_t = raw_t + Σ d_i w_{t−i}` (equal to `raw` when no
    /// coefficients are given).
    pub filtered: Vec<f64>,
}

/// Low-frequency variance amplification of the autoregressive filter,
/// `1 / (1 − Σ d_i)²`.
pub fn ar_amplification(coefficients: &[f64]) -> Result<f64, DiffusivityError> {
    let sum: f64 = coefficients.iter().sum();
    validate_filter(coefficients)?;
    Ok(1.0 / ((1.0 - sum) * (1.0 - sum)))
}

fn validate_filter(coefficients: &[f64]) -> Result<(), DiffusivityError> {
    if coefficients.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(DiffusivityError::InvalidParams(
            "filter coefficients must be non-negative and finite".into(),
        ));
    }
    let sum: f64 = coefficients.iter().sum();
    if sum >= 1.0 {
        return Err(DiffusivityError::UnstableFilter { sum });
    }
    Ok(())
}

/// Generates a stationary flow series: signs from the chosen source, passed
/// through the autoregressive volume filter.
pub fn simulate_stationary_flow(p: &StationaryFlowParams) -> Result<StationaryFlow, DiffusivityError> {
    validate_filter(&p.ar_coefficients)?;
    if p.length < 16 {
        return Err(DiffusivityError::SeriesTooShort { len: p.length, needed: 16 });
    }
    let raw: Vec<f64> = match p.source {
        FlowSource::Iid => {
            let mut rng = ChaCha12Rng::seed_from_u64(p.seed);
            (0..p.length).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
        }
        FlowSource::LongMemory { tail_exponent, n_metaorders } => {
            let series = synth_lmf_orderflow(&LmfFlowParams {
                n_metaorders,
                tail_exponent,
                horizon: p.length,
                child_size: 1,
                seed: p.seed,
            })?;
            series.ticks.iter().map(|t| t.direction as f64).collect()
        }
    };
    let filtered = if p.ar_coefficients.is_empty() {
        raw.clone()
    } else {
        let q = p.ar_coefficients.len();
        let mut w = Vec::with_capacity(raw.len());
        for (t, &x) in raw.iter().enumerate() {
            let mut value = x;
            for (i, d) in p.ar_coefficients.iter().enumerate().take(t.min(q)) {
                value += d * w[t - 1 - i];
            }
            w.push(value);
        }
        w
    };
    Ok(StationaryFlow { raw, filtered })
}

/// Sample autocorrelation at lags `0 ..= max_lag`, normalized so the zero
/// lag is 1, with the variance-stable `1/n` (biased) covariance estimator.
///
/// Requires `len > 4·max_lag` so the largest lags still average over most
/// of the sample.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>, DiffusivityError> {
    if max_lag == 0 {
        return Err(DiffusivityError::InvalidParams("max_lag must be at least 1".into()));
    }
    let n = series.len();
    if n <= 4 * max_lag {
        return Err(DiffusivityError::SeriesTooShort { len: n, needed: 4 * max_lag });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return Err(DiffusivityError::ConstantSeries);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let cov = centered[k..]
            .iter()
            .zip(&centered[..n - k])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        out.push(cov / var);
    }
    Ok(out)
}

/// A fitted scaling exponent with its regression standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    /// Point estimate.
    pub value: f64,
    /// Standard error of the log-log regression slope.
    pub std_err: f64,
}

/// Estimates the autocorrelation decay exponent `γ` (from `r_k ~ k^{−γ}`)
/// by a log-log fit over lags `lag_lo ..= lag_hi`.
pub fn long_memory_exponent(
    series: &[f64],
    lag_lo: usize,
    lag_hi: usize,
) -> Result<ExponentFit, DiffusivityError> {
    if lag_lo < 1 || lag_hi <= lag_lo {
        return Err(DiffusivityError::InvalidParams(format!(
            "need 1 <= lag_lo < lag_hi, got [{lag_lo}, {lag_hi}]"
        )));
    }
    let r = acf(series, lag_hi)?;
    let mut log_k = Vec::with_capacity(lag_hi - lag_lo + 1);
    let mut log_r = Vec::with_capacity(lag_hi - lag_lo + 1);
    for k in lag_lo..=lag_hi {
        if r[k] <= 0.0 {
            return Err(DiffusivityError::NonpositiveAcf { lag: k });
        }
        log_k.push((k as f64).ln());
        log_r.push(r[k].ln());
    }
    let (slope, _, std_err) = line_fit(&log_k, &log_r);
    Ok(ExponentFit { value: -slope, std_err })
}

/// Welch spectral comparison of a raw flow and its filtered version.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    /// Log-log slope of the filtered spectrum over the lowest clean decade
    /// of frequencies (`≈ γ − 1` for long-memory flow, `≈ 0` for short
    /// memory).
    pub slope: f64,
    /// Mean low-frequency ratio of filtered to raw spectral density; for an
    /// autoregressive filter this estimates [`ar_amplification`].
    pub amplification: f64,
}

/// Welch periodogram: 8 segments at 50% overlap, mean-removed and
/// cosine-tapered, averaged. Returns one-sided densities for bins
/// `1 ..= L/2` of the segment length `L`.
fn welch_spectrum(series: &[f64]) -> Result<Vec<f64>, DiffusivityError> {
    let n = series.len();
    // 8 segments at 50% overlap cover 4.5 segment lengths.
    let seg = (n as f64 / 4.5).floor() as usize;
    if seg < 64 {
        return Err(DiffusivityError::SeriesTooShort { len: n, needed: 64 * 9 / 2 });
    }
    let hop = seg / 2;
    let taper: Vec<f64> = (0..seg)
        .map(|j| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / (seg - 1) as f64).cos()))
        .collect();
    let taper_power: f64 = taper.iter().map(|w| w * w).sum();
    let mut mean_spectrum = vec![0.0; seg / 2 + 1];
    let mut count = 0.0;
    let mut start = 0;
    while start + seg <= n {
        let window = &series[start..start + seg];
        let mean = window.iter().sum::<f64>() / seg as f64;
        let tapered: Vec<f64> =
            window.iter().zip(&taper).map(|(x, w)| (x - mean) * w).collect();
        for (acc, value) in mean_spectrum.iter_mut().zip(power_spectrum(&tapered)) {
            *acc += value / taper_power;
        }
        count += 1.0;
        start += hop;
    }
    for value in &mut mean_spectrum {
        *value /= count;
    }
    Ok(mean_spectrum)
}

/// Compares the spectra of a raw sign series and its filtered version:
/// low-frequency log-log slope of the filtered spectrum, and the measured
/// filter amplification.
pub fn spectral_check(raw: &[f64], filtered: &[f64]) -> Result<SpectralReport, DiffusivityError> {
    if raw.len() != filtered.len() {
        return Err(DiffusivityError::InvalidParams(format!(
            "raw and filtered series differ in length: {} vs {}",
            raw.len(),
            filtered.len()
        )));
    }
    let spectrum_raw = welch_spectrum(raw)?;
    let spectrum_filtered = welch_spectrum(filtered)?;
    let seg_half = spectrum_raw.len() - 1;
    // Lowest clean decade: skip bin 1 (worst leakage), use bins 2..=20.
    let (lo, hi) = (2_usize, 20_usize.min(seg_half));
    let mut log_freq = Vec::new();
    let mut log_density = Vec::new();
    let mut ratio_sum = 0.0;
    for j in lo..=hi {
        log_freq.push((j as f64).ln());
        log_density.push(spectrum_filtered[j].max(f64::MIN_POSITIVE).ln());
        ratio_sum += spectrum_filtered[j] / spectrum_raw[j];
    }
    let (slope, _, _) = line_fit(&log_freq, &log_density);
    Ok(SpectralReport { slope, amplification: ratio_sum / (hi - lo + 1) as f64 })
}

/// Variance of price increments over a set of horizons, for a price that
/// responds to the flow through the level-form lag kernel `g_ℓ = ℓ^{−δ}`.
/// Returns the log-log scaling exponent (2 = ballistic, 1 = diffusive).
///
/// The price is built by FFT convolution; increments start after a burn-in
/// of one largest window so the kernel start-up transient is excluded.
pub fn price_variance_scaling(
    flow: &[f64],
    delta: f64,
    windows: &[usize],
) -> Result<ExponentFit, DiffusivityError> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(DiffusivityError::InvalidParams(format!(
            "kernel exponent must be non-negative, got {delta}"
        )));
    }
    if windows.len() < 3 {
        return Err(DiffusivityError::InvalidWindows(
            "need at least three window sizes for a scaling fit".into(),
        ));
    }
    if windows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiffusivityError::InvalidWindows("windows must be strictly increasing".into()));
    }
    if windows[0] == 0 {
        return Err(DiffusivityError::InvalidWindows("windows must be positive".into()));
    }
    let n = flow.len();
    let largest = *windows.last().unwrap();
    if n < 4 * largest + largest {
        return Err(DiffusivityError::SeriesTooShort { len: n, needed: 5 * largest });
    }
    // Level-form price: p_t = Σ_{ℓ=1}^{t} ℓ^{−δ} flow_{t−ℓ}.
    let mut kernel = Vec::with_capacity(n);
    kernel.push(0.0);
    for lag in 1..n {
        kernel.push((lag as f64).powf(-delta));
    }
    let price = fft_convolve(&kernel, flow);
    let burn = largest;
    let mut log_window = Vec::with_capacity(windows.len());
    let mut log_var = Vec::with_capacity(windows.len());
    for &window in windows {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0.0;
        for t in burn..n - window {
            let increment = price[t + window] - price[t];
            sum += increment;
            sumsq += increment * increment;
            count += 1.0;
        }
        let mean = sum / count;
        let var = sumsq / count - mean * mean;
        if var <= 0.0 {
            return Err(DiffusivityError::ConstantSeries);
        }
        log_window.push((window as f64).ln());
        log_var.push(var.ln());
    }
    let (slope, _, std_err) = line_fit(&log_window, &log_var);
    Ok(ExponentFit { value: slope, std_err })
}

/// Combined long-memory and diffusivity diagnostic for a generated flow.
#[derive(Debug, Clone)]
pub struct LongMemoryReport {
    /// Sign-memory exponent `γ` fitted from the filtered flow.
    pub gamma: ExponentFit,
    /// Low-frequency spectral slope of the filtered flow.
    pub spectral_slope: f64,
    /// Measured filter amplification (low-frequency spectral ratio).
    pub amplification: f64,
    /// Price increment-variance scaling exponent for the given kernel.
    pub variance_exponent: ExponentFit,
}

/// Runs the full diagnostic: autocorrelation decay over
/// `acf_range = (lag_lo, lag_hi)`, spectral comparison of raw vs filtered
/// flow, and increment-variance scaling of the level-form price with kernel
/// exponent `delta` over the given windows.
pub fn long_memory_report(
    flow: &StationaryFlow,
    delta: f64,
    acf_range: (usize, usize),
    windows: &[usize],
) -> Result<LongMemoryReport, DiffusivityError> {
    let gamma = long_memory_exponent(&flow.filtered, acf_range.0, acf_range.1)?;
    let spectral = spectral_check(&flow.raw, &flow.filtered)?;
    let variance_exponent = price_variance_scaling(&flow.filtered, delta, windows)?;
    Ok(LongMemoryReport {
        gamma,
        spectral_slope: spectral.slope,
        amplification: spectral.amplification,
        variance_exponent,
    })
}

/// Geometrically spaced window sizes for variance-scaling fits (deduplicated
/// after rounding).
pub fn log_spaced_windows(lo: usize, hi: usize, count: usize) -> Result<Vec<usize>, DiffusivityError> {
    if lo == 0 || hi <= lo || count < 3 {
        return Err(DiffusivityError::InvalidWindows(format!(
            "need 0 < lo < hi and at least three points, got [{lo}, {hi}] x {count}"
        )));
    }
    let ratio = (hi as f64 / lo as f64).powf(1.0 / (count - 1) as f64);
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let value = (lo as f64 * ratio.powi(i as i32)).round() as usize;
        if out.last() != Some(&value) {
            out.push(value);
        }
    }
    Ok(out)
}
