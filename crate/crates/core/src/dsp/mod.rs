//! Preprocessing primitives for raw PPG signals.
//!
//! The standard chain is: [`design_cheby2_lowpass`] + [`filter_zero_phase`]
//! for denoising, [`moving_average`] smoothing, [`detrend_cma`] for baseline
//! removal, [`demodulate`] to divide out respiration-induced amplitude
//! modulation, and [`zscore`] normalization. All operations are pure,
//! deterministic and length-preserving.

mod design;
mod filtfilt;

pub use design::{design_cheby2_lowpass, Biquad, FilterSpec, IirCoefficients};
pub use filtfilt::filter_zero_phase;

use rustfft::{num_complex::Complex64, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("filter design error: {0}")]
    Design(String),
    #[error("signal too short: need more than {min} samples, got {got}")]
    Length { min: usize, got: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("demodulation failed: smoothed envelope at or below floor at sample {index}")]
    Demod { index: usize },
    #[error("normalization failed: input has zero variance")]
    Normalization,
}

pub type Result<T> = std::result::Result<T, DspError>;

/// Centered moving average. Windows are clipped at the signal edges, so the
/// first and last samples average over fewer points (down to `window/2 + 1`).
///
/// `window` must be odd and `1 <= window <= x.len()`.
pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(DspError::Argument(format!(
            "moving average window must be odd, got {window}"
        )));
    }
    if window < 1 || window > x.len() {
        return Err(DspError::Argument(format!(
            "moving average window {window} out of range for signal of length {}",
            x.len()
        )));
    }
    let n = x.len();
    let half = window / 2;
    let mut cumsum = Vec::with_capacity(n + 1);
    cumsum.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        cumsum.push(acc);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        out.push((cumsum[hi + 1] - cumsum[lo]) / (hi + 1 - lo) as f64);
    }
    Ok(out)
}

/// Remove the baseline wander by subtracting a centred moving average.
pub fn detrend_cma(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window >= x.len() {
        return Err(DspError::Argument(format!(
            "detrend window {window} must be shorter than the signal ({})",
            x.len()
        )));
    }
    let trend = moving_average(x, window)?;
    Ok(x.iter().zip(&trend).map(|(v, t)| v - t).collect())
}

/// Instantaneous amplitude |x + j·H(x)| via the frequency-domain analytic
/// signal: zero the negative-frequency bins, double the positive ones, keep
/// DC and Nyquist.
pub fn analytic_envelope(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 16 {
        return Err(DspError::Length { min: 16, got: n });
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);

    // DC (and the Nyquist bin for even n) stay as-is; strictly positive
    // frequencies double; negative frequencies vanish.
    let half = n / 2;
    let last_positive = if n % 2 == 0 { half - 1 } else { half };
    for bin in buf.iter_mut().take(last_positive + 1).skip(1) {
        *bin *= 2.0;
    }
    for bin in buf.iter_mut().skip(half + 1) {
        *bin = Complex64::new(0.0, 0.0);
    }

    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.iter().map(|c| (c * scale).norm()).collect())
}

/// Divide the detrended signal by its CMA-smoothed analytic envelope.
///
/// `floor_frac` guards the division: every smoothed envelope sample must stay
/// strictly above `floor_frac * max|x|`, otherwise the first offending sample
/// is reported. The pipeline default is [`demodulate`] with `1e-6`.
pub fn demodulate_with_floor(
    x: &[f64],
    smooth_window: usize,
    floor_frac: f64,
) -> Result<Vec<f64>> {
    let env = analytic_envelope(x)?;
    let smoothed = moving_average(&env, smooth_window)?;
    let max_abs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = floor_frac * max_abs;
    if let Some(index) = smoothed.iter().position(|&e| e <= floor) {
        return Err(DspError::Demod { index });
    }
    Ok(x.iter().zip(&smoothed).map(|(v, e)| v / e).collect())
}

/// [`demodulate_with_floor`] with the default envelope floor of
/// `1e-6 * max|x|`.
pub fn demodulate(x: &[f64], smooth_window: usize) -> Result<Vec<f64>> {
    demodulate_with_floor(x, smooth_window, 1e-6)
}

/// Standardize to zero mean, unit population (1/N) standard deviation.
pub fn zscore(x: &[f64]) -> Result<Vec<f64>> {
    let (mean, std) = mean_std(x);
    if std == 0.0 {
        return Err(DspError::Normalization);
    }
    Ok(x.iter().map(|v| (v - mean) / std).collect())
}

/// Mean and population standard deviation (two-pass).
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
