//! Small numerical utilities shared across modules.

use rustfft::{num_complex::Complex, FftPlanner};

/// SplitMix64 step, used to derive independent RNG streams from a master
/// seed (e.g. one stream per Monte Carlo path or per sweep cell).
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Ordinary least-squares line fit `y ≈ intercept + slope·x`.
///
/// Returns `(slope, intercept, slope_std_err)`. The standard error uses the
/// usual homoskedastic estimate with `n − 2` degrees of freedom (0 when
/// `n ≤ 2`).
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len(), "line_fit: mismatched lengths");
    let n = x.len() as f64;
    assert!(x.len() >= 2, "line_fit: need at least two points");
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&xi, &yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut rss = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - intercept - slope * xi;
        rss += r * r;
    }
    let se = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}

/// Riemann zeta function ζ(s) for real s > 1.
///
/// Direct summation over the first `N` terms plus an Euler–Maclaurin tail,
/// accurate to well below 1e-12 for s ≥ 1.1.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta: requires s > 1");
    let n = 100_000u64;
    let mut sum = 0.0;
    for i in 1..n {
        sum += (i as f64).powf(-s);
    }
    let nf = n as f64;
    // tail: ∫_N^∞ x^-s dx + f(N)/2 - f'(N)/12 + f'''(N)/720
    let f_n = nf.powf(-s);
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * f_n + s * f_n / nf / 12.0
        - s * (s + 1.0) * (s + 2.0) * f_n / (nf * nf * nf) / 720.0;
    sum
}

/// Linear convolution of two real sequences via FFT.
///
/// Returns a vector of length `a.len() + b.len() - 1`.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);

    let mut fa: Vec<Complex<f64>> = a
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut fb: Vec<Complex<f64>> = b
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(out_len);
    fa.iter().map(|c| c.re * scale).collect()
}

/// Real-input discrete Fourier transform returning the one-sided power
/// spectrum `|X_j|²` for `j = 0..n/2`.
pub fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf.iter().take(n / 2 + 1).map(|c| c.norm_sqr()).collect()
}
