//! Real periodic sequences on uniform grids through the complex FFT.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub(crate) fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse transform, returning the real part scaled by `1/n`.
pub(crate) fn inverse(mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let scale = 1.0 / n as f64;
    spectrum.into_iter().map(|c| c.re * scale).collect()
}

/// Signed frequency of FFT bin `m` on an `n`-point grid. The Nyquist bin maps to `+n/2`.
pub(crate) fn frequency(m: usize, n: usize) -> f64 {
    if m <= n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    }
}

/// Applies a per-frequency multiplier `g(k)` to a real sequence.
pub(crate) fn filter(values: &[f64], g: impl Fn(f64) -> Complex64) -> Vec<f64> {
    let n = values.len();
    let mut spec = forward(values);
    for (m, c) in spec.iter_mut().enumerate() {
        *c *= g(frequency(m, n));
    }
    inverse(spec)
}
