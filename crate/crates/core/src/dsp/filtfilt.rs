//! Zero-phase (forward-backward) application of a section cascade.
//!
//! Fiducial timing must not shift during denoising, so the filter runs once
//! forward and once backward. Edge transients are controlled the usual way:
//! odd-symmetric extension at both ends plus steady-state initial conditions
//! scaled to the first sample each section sees.

use super::design::{Biquad, IirCoefficients};
use super::{DspError, Result};

/// Apply `c` forward and backward over `x`. Output length equals input
/// length; the effective attenuation is squared and the phase is zero.
///
/// Requires `x.len() > 3 * c.order()`.
pub fn filter_zero_phase(x: &[f64], c: &IirCoefficients) -> Result<Vec<f64>> {
    let order = c.order();
    if x.len() <= 3 * order {
        return Err(DspError::Length {
            min: 3 * order + 1,
            got: x.len(),
        });
    }
    let padlen = (3 * (2 * c.sections.len() + 1)).min(x.len() - 1);

    let mut buf = odd_extend(x, padlen);
    run_cascade(&mut buf, c);
    buf.reverse();
    run_cascade(&mut buf, c);
    buf.reverse();

    Ok(buf[padlen..padlen + x.len()].to_vec())
}

fn odd_extend(x: &[f64], padlen: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * padlen);
    for j in (1..=padlen).rev() {
        out.push(2.0 * x[0] - x[j]);
    }
    out.extend_from_slice(x);
    for j in 1..=padlen {
        out.push(2.0 * x[n - 1] - x[n - 1 - j]);
    }
    out
}

fn run_cascade(buf: &mut [f64], c: &IirCoefficients) {
    for section in &c.sections {
        let (zi1, zi2) = steady_state_zi(section);
        let scale = buf[0];
        let mut s1 = zi1 * scale;
        let mut s2 = zi2 * scale;
        let [b0, b1, b2] = section.b;
        let [_, a1, a2] = section.a;
        for v in buf.iter_mut() {
            let x = *v;
            let y = b0 * x + s1;
            s1 = b1 * x - a1 * y + s2;
            s2 = b2 * x - a2 * y;
            *v = y;
        }
    }
}

/// Direct-form-II-transposed state that makes the section respond to a unit
/// step with its steady-state output from sample zero.
fn steady_state_zi(s: &Biquad) -> (f64, f64) {
    let y_ss = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
    let s2 = s.b[2] - s.a[2] * y_ss;
    let s1 = s.b[1] - s.a[1] * y_ss + s2;
    (s1, s2)
}
