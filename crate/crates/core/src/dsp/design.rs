//! Chebyshev type-II (inverse Chebyshev) lowpass design.
//!
//! Classic analog-prototype route: place the equiripple-stopband prototype
//! poles/zeros in the s-plane, lowpass-scale them to the prewarped stopband
//! edge, map to the z-plane with the bilinear transform, and emit cascaded
//! second-order sections. The stopband sits at exactly `-atten_db` at the
//! edge and at or below it everywhere past the edge; the DC gain is exactly
//! one by construction.

use super::{DspError, Result};
use rustfft::num_complex::Complex64;

/// Design request for the lowpass denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    /// Filter order (number of analog poles).
    pub order: usize,
    /// Stopband edge in Hz: the response is at least `atten_db` down from
    /// this frequency up to Nyquist.
    pub stopband_hz: f64,
    /// Minimum stopband attenuation in dB.
    pub atten_db: f64,
    /// Sample rate of the signal the filter will run on, in Hz.
    pub fs: f64,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(DspError::Design("filter order must be at least 1".into()));
        }
        if !(self.fs > 0.0) {
            return Err(DspError::Design(format!("sample rate must be positive, got {}", self.fs)));
        }
        if !(self.stopband_hz > 0.0 && self.stopband_hz < self.fs / 2.0) {
            return Err(DspError::Design(format!(
                "stopband edge must satisfy 0 < f < fs/2 (fs/2 = {}), got {}",
                self.fs / 2.0,
                self.stopband_hz
            )));
        }
        if !(self.atten_db > 0.0) {
            return Err(DspError::Design(format!(
                "stopband attenuation must be positive, got {} dB",
                self.atten_db
            )));
        }
        Ok(())
    }
}

/// One second-order section. `b` is the numerator, `a` the denominator with
/// `a[0] == 1`. First-order (real-pole) sections set the quadratic terms to
/// zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Transfer function value at `z = e^{jw}`.
    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = 1.0 + self.a[1] * z1 + self.a[2] * z2;
        num / den
    }

    /// Magnitudes of the section poles.
    fn pole_magnitudes(&self) -> Vec<f64> {
        quadratic_root_magnitudes(self.a)
    }
}

/// Digital IIR filter as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct IirCoefficients {
    pub sections: Vec<Biquad>,
}

impl IirCoefficients {
    /// Complex frequency response at `f_hz` for a signal sampled at `fs`.
    pub fn response(&self, f_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * f_hz / fs;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(w))
    }

    /// Magnitude response in dB at `f_hz`.
    pub fn gain_db(&self, f_hz: f64, fs: f64) -> f64 {
        20.0 * self.response(f_hz, fs).norm().log10()
    }

    /// Pole magnitudes of every section; all must be `< 1` for stability.
    pub fn pole_magnitudes(&self) -> Vec<f64> {
        self.sections.iter().flat_map(|s| s.pole_magnitudes()).collect()
    }

    /// Sum of section orders (2 per complex pair, 1 per real pole).
    pub fn order(&self) -> usize {
        self.sections
            .iter()
            .map(|s| if s.a[2] != 0.0 || s.b[2] != 0.0 { 2 } else { 1 })
            .sum()
    }
}

fn quadratic_root_magnitudes(c: [f64; 3]) -> Vec<f64> {
    // roots of z^2 + c1 z + c2 (c0 assumed 1); degenerate to linear when c2 == 0
    let (c1, c2) = (c[1], c[2]);
    if c2 == 0.0 {
        if c1 == 0.0 {
            return vec![];
        }
        return vec![c1.abs()]; // root at -c1
    }
    let disc = c1 * c1 - 4.0 * c2;
    if disc >= 0.0 {
        let s = disc.sqrt();
        vec![((-c1 + s) / 2.0).abs(), ((-c1 - s) / 2.0).abs()]
    } else {
        // complex pair: |root|^2 == product of roots == c2
        let m = c2.sqrt();
        vec![m, m]
    }
}

/// Design a digital Chebyshev type-II lowpass filter.
pub fn design_cheby2_lowpass(spec: &FilterSpec) -> Result<IirCoefficients> {
    spec.validate()?;
    let n = spec.order;

    // Analog prototype with unit stopband edge.
    let (mut zeros, mut poles, mut gain) = cheb2_prototype(n, spec.atten_db);

    // Prewarp the stopband edge and lowpass-scale. The bilinear transform
    // below uses the normalized design rate fs_d = 2.
    let wn = spec.stopband_hz / (spec.fs / 2.0);
    let fs_d = 2.0;
    let warped = 2.0 * fs_d * (std::f64::consts::PI * wn / fs_d).tan();
    for z in &mut zeros {
        *z *= warped;
    }
    for p in &mut poles {
        *p *= warped;
    }
    let degree = poles.len() - zeros.len();
    gain *= warped.powi(degree as i32);

    // Bilinear transform s -> 2 fs_d (z-1)/(z+1).
    let fs2 = 2.0 * fs_d;
    let num: Complex64 = zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = poles.iter().map(|p| fs2 - p).product();
    let k_z = gain * (num / den).re;
    let mut z_d: Vec<Complex64> = zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
    let p_d: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    z_d.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(degree));

    let coeffs = zpk_to_sos(&z_d, &p_d, k_z)?;
    for (i, m) in coeffs.pole_magnitudes().into_iter().enumerate() {
        if m >= 1.0 {
            return Err(DspError::Design(format!(
                "designed filter is unstable: pole {i} has magnitude {m}"
            )));
        }
    }
    Ok(coeffs)
}

/// Analog Chebyshev-II prototype: zeros, poles, gain for a unit stopband
/// edge and the requested stopband ripple.
fn cheb2_prototype(n: usize, rs_db: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let de = 1.0 / (10f64.powf(0.1 * rs_db) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n as f64;

    // odd integers -n+1, -n+3, ..., n-1
    let m_all: Vec<i64> = (0..n).map(|i| -(n as i64) + 1 + 2 * i as i64).collect();

    // Purely imaginary zeros; an odd-order prototype skips m == 0 (its zero
    // sits at infinity).
    let zeros: Vec<Complex64> = m_all
        .iter()
        .filter(|&&m| m != 0)
        .map(|&m| {
            let theta = m as f64 * std::f64::consts::PI / (2.0 * n as f64);
            Complex64::new(0.0, 1.0 / theta.sin())
        })
        .collect();

    // Stopband poles: unit-circle Butterworth angles stretched onto the
    // sinh/cosh ellipse, then inverted.
    let poles: Vec<Complex64> = m_all
        .iter()
        .map(|&m| {
            let theta = m as f64 * std::f64::consts::PI / (2.0 * n as f64);
            let butter = -Complex64::from_polar(1.0, theta);
            let stretched = Complex64::new(mu.sinh() * butter.re, mu.cosh() * butter.im);
            stretched.inv()
        })
        .collect();

    let num: Complex64 = poles.iter().map(|p| -p).product();
    let den: Complex64 = zeros.iter().map(|z| -z).product();
    let k = (num / den).re;
    (zeros, poles, k)
}

/// Group conjugate pairs into biquads, pairing each pole pair with its
/// nearest zero pair. The overall gain lands on the first section; sections
/// are ordered with the best-damped poles first.
fn zpk_to_sos(zeros: &[Complex64], poles: &[Complex64], k: f64) -> Result<IirCoefficients> {
    let (mut zero_pairs, zero_reals) = conjugate_pairs(zeros)?;
    let (pole_pairs, pole_reals) = conjugate_pairs(poles)?;
    if zeros.len() != poles.len() {
        return Err(DspError::Design(format!(
            "zero/pole count mismatch after bilinear transform: {} vs {}",
            zeros.len(),
            poles.len()
        )));
    }

    let mut sections = Vec::new();

    // real pole(s) pair with real zero(s); the lowpass route produces at most
    // one of each (odd order)
    let mut zero_reals = zero_reals;
    for p in pole_reals {
        let z = zero_reals.pop().ok_or_else(|| {
            DspError::Design("unpaired real pole in section assembly".into())
        })?;
        sections.push(Biquad {
            b: [1.0, -z, 0.0],
            a: [1.0, -p, 0.0],
        });
    }

    // complex pairs: hardest-to-damp poles grab the nearest zeros first
    let mut pole_pairs = pole_pairs;
    pole_pairs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    for p in pole_pairs {
        let (idx, _) = zero_pairs
            .iter()
            .enumerate()
            .min_by(|(_, za), (_, zb)| (*za - p).norm().total_cmp(&(*zb - p).norm()))
            .ok_or_else(|| DspError::Design("unpaired complex pole in section assembly".into()))?;
        let z = zero_pairs.swap_remove(idx);
        sections.push(Biquad {
            b: [1.0, -2.0 * z.re, z.norm_sqr()],
            a: [1.0, -2.0 * p.re, p.norm_sqr()],
        });
    }

    // execute well-damped sections first
    sections.reverse();
    if let Some(first) = sections.first_mut() {
        for b in &mut first.b {
            *b *= k;
        }
    }
    Ok(IirCoefficients { sections })
}

/// Split a conjugate-closed root set into (one representative per complex
/// pair, real roots).
fn conjugate_pairs(roots: &[Complex64]) -> Result<(Vec<Complex64>, Vec<f64>)> {
    const IM_TOL: f64 = 1e-10;
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    let mut used = vec![false; roots.len()];
    for (i, r) in roots.iter().enumerate() {
        if used[i] {
            continue;
        }
        if r.im.abs() <= IM_TOL * r.norm().max(1.0) {
            reals.push(r.re);
            used[i] = true;
            continue;
        }
        // find the closest conjugate among the remaining roots
        let mut best: Option<(usize, f64)> = None;
        for (j, s) in roots.iter().enumerate().skip(i + 1) {
            if used[j] {
                continue;
            }
            let d = (s - r.conj()).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.ok_or_else(|| {
            DspError::Design("root set is not closed under conjugation".into())
        })?;
        if d > 1e-6 * r.norm().max(1.0) {
            return Err(DspError::Design(format!(
                "root {r} has no conjugate partner (nearest at distance {d})"
            )));
        }
        used[i] = true;
        used[j] = true;
        // average the pair for a symmetric representative
        let rep = Complex64::new((r.re + roots[j].re) / 2.0, (r.im.abs() + roots[j].im.abs()) / 2.0);
        pairs.push(rep);
    }
    Ok((pairs, reals))
}
