//! Derivative waveforms and derivative-marker fiducial detection.
//!
//! The four derivatives (VPG, APG, JPG, SPG — velocity through snap of the
//! blood volume change) are each computed from the previous waveform by a
//! smoothed central difference: plain cascaded differences would amplify
//! noise as omega^4 by the fourth stage. Detection walks the zero crossings
//! and extrema of the stack:
//!
//! * `u` — global VPG maximum (steepest upstroke),
//! * `O` — last rising VPG zero crossing before `u`, else beat start,
//! * `S` — first falling VPG zero crossing after `u`,
//! * `v` — global VPG minimum after `S`; `w` — first VPG local max after `v`,
//! * `a` — APG maximum before `u`; `b` — APG minimum after `a`;
//!   `c`,`d`,`e` — subsequent alternating APG extrema,
//! * `N` — APG local maximum after `S` nearest `w`, JPG-assisted fallback,
//!   accepted only if the waveform rises again afterwards,
//! * `D` — first falling VPG zero crossing after `N`.
//!
//! Points that cannot be located are flagged absent, never fabricated; only
//! an undetectable `S` makes a beat unusable.

use crate::beats::BeatTemplate;
use crate::dsp;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FiducialError {
    #[error("beat unusable: {0}")]
    Undetectable(String),
}

pub type Result<T> = std::result::Result<T, FiducialError>;

/// PPG plus its first four derivative waveforms, all of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeStack {
    pub ppg: Vec<f64>,
    pub vpg: Vec<f64>,
    pub apg: Vec<f64>,
    pub jpg: Vec<f64>,
    pub spg: Vec<f64>,
    /// Sample rate the derivatives were scaled by (per-second units).
    pub fs_equiv: f64,
}

impl DerivativeStack {
    pub fn len(&self) -> usize {
        self.ppg.len()
    }
    pub fn is_empty(&self) -> bool {
        self.ppg.is_empty()
    }
    pub fn waveform(&self, which: Waveform) -> &[f64] {
        match which {
            Waveform::Ppg => &self.ppg,
            Waveform::Vpg => &self.vpg,
            Waveform::Apg => &self.apg,
            Waveform::Jpg => &self.jpg,
            Waveform::Spg => &self.spg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Waveform {
    Ppg,
    Vpg,
    Apg,
    Jpg,
    Spg,
}

/// Compute the derivative stack of a beat template.
pub fn derivatives(template: &BeatTemplate) -> DerivativeStack {
    let fs = template.fs_equiv;
    let ppg = template.samples.clone();
    let vpg = smoothed_derivative(&ppg, fs);
    let apg = smoothed_derivative(&vpg, fs);
    let jpg = smoothed_derivative(&apg, fs);
    let spg = smoothed_derivative(&jpg, fs);
    DerivativeStack {
        ppg,
        vpg,
        apg,
        jpg,
        spg,
        fs_equiv: fs,
    }
}

/// Central difference (one-sided at the ends) scaled to per-second units,
/// then 5-point moving-average smoothing.
fn smoothed_derivative(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i == 0 {
            (x[1] - x[0]) * fs
        } else if i == n - 1 {
            (x[n - 1] - x[n - 2]) * fs
        } else {
            (x[i + 1] - x[i - 1]) * fs / 2.0
        };
        d.push(v);
    }
    dsp::moving_average(&d, 5.min(n | 1)).expect("window is odd and in range")
}

/// Sign-change direction of a zero crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// + to - (a maximum of the integral waveform).
    Falling,
    /// - to + (a minimum of the integral waveform).
    Rising,
}

/// A candidate inflection marker: a zero crossing of one derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub index: usize,
    pub waveform: Waveform,
    pub direction: Crossing,
}

/// All zero crossings of each derivative waveform, in index order. The index
/// reported is the bracket sample nearest zero; touching zero without a sign
/// change is not a crossing.
pub fn detect_inflection_markers(stack: &DerivativeStack) -> Vec<Marker> {
    let mut markers = Vec::new();
    for wf in [Waveform::Vpg, Waveform::Apg, Waveform::Jpg, Waveform::Spg] {
        let d = stack.waveform(wf);
        let mut last_nonzero: Option<(usize, f64)> = None;
        for (i, &v) in d.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if let Some((j, prev)) = last_nonzero {
                if (prev > 0.0) != (v > 0.0) {
                    let index = (j..=i)
                        .min_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()))
                        .expect("non-empty bracket");
                    markers.push(Marker {
                        index,
                        waveform: wf,
                        direction: if v < 0.0 { Crossing::Falling } else { Crossing::Rising },
                    });
                }
            }
            last_nonzero = Some((i, v));
        }
    }
    markers.sort_by_key(|m| m.index);
    markers
}

/// One detected landmark: beat-relative index plus waveform value there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub idx: usize,
    pub val: f64,
}

/// The full fiducial read-out of one beat. Optional points were searched for
/// but not found; mandatory points are always present in a usable beat.
#[derive(Debug, Clone, PartialEq)]
pub struct FiducialSet {
    /// Onset (PPG).
    pub o: Point,
    /// Systolic peak (PPG).
    pub s: Point,
    /// Dicrotic notch (PPG).
    pub n: Option<Point>,
    /// Diastolic peak (PPG).
    pub d: Option<Point>,
    /// Max upslope (VPG maximum).
    pub u: Point,
    /// VPG minimum after S.
    pub v: Point,
    /// First VPG local max after v.
    pub w: Option<Point>,
    /// Early systolic APG maximum.
    pub a: Point,
    /// APG minimum after a.
    pub b: Point,
    /// Alternating APG extrema after b.
    pub c: Option<Point>,
    pub d_wave: Option<Point>,
    pub e: Option<Point>,
}

impl FiducialSet {
    /// Detected/absent flags in catalog order (O,S,N,D,u,v,w,a,b,c,d,e).
    pub fn flags(&self) -> [(&'static str, bool); 12] {
        [
            ("O", true),
            ("S", true),
            ("N", self.n.is_some()),
            ("D", self.d.is_some()),
            ("u", true),
            ("v", true),
            ("w", self.w.is_some()),
            ("a", true),
            ("b", true),
            ("c", self.c.is_some()),
            ("d", self.d_wave.is_some()),
            ("e", self.e.is_some()),
        ]
    }
}

fn zero_cross_index(d: &[f64], i: usize) -> usize {
    if d[i].abs() <= d[i + 1].abs() {
        i
    } else {
        i + 1
    }
}

/// First falling zero crossing of `d` strictly inside `(from, to)`.
fn falling_cross_after(d: &[f64], from: usize, to: usize) -> Option<usize> {
    (from..to.min(d.len() - 1).max(from))
        .find(|&i| d[i] >= 0.0 && d[i + 1] < 0.0)
        .map(|i| zero_cross_index(d, i))
}

fn local_maxima(d: &[f64], from: usize, to: usize) -> Vec<usize> {
    let hi = to.min(d.len().saturating_sub(1));
    let lo = from.max(1);
    (lo..hi)
        .filter(|&i| d[i] >= d[i - 1] && d[i] > d[i + 1])
        .collect()
}

fn local_minima(d: &[f64], from: usize, to: usize) -> Vec<usize> {
    let hi = to.min(d.len().saturating_sub(1));
    let lo = from.max(1);
    (lo..hi)
        .filter(|&i| d[i] <= d[i - 1] && d[i] < d[i + 1])
        .collect()
}

fn argmax_range(d: &[f64], lo: usize, hi: usize) -> usize {
    (lo..hi).fold(lo, |best, i| if d[i] > d[best] { i } else { best })
}

fn argmin_range(d: &[f64], lo: usize, hi: usize) -> usize {
    (lo..hi).fold(lo, |best, i| if d[i] < d[best] { i } else { best })
}

/// Detect the fiducial set of a beat.
pub fn detect_fiducials(stack: &DerivativeStack) -> Result<FiducialSet> {
    let n = stack.len();
    if n < 16 {
        return Err(FiducialError::Undetectable(format!("beat of {n} samples")));
    }
    let (ppg, vpg, apg, jpg) = (&stack.ppg, &stack.vpg, &stack.apg, &stack.jpg);

    // u: global VPG max
    let u = argmax_range(vpg, 0, n);
    if u == 0 || vpg[u] <= 0.0 {
        return Err(FiducialError::Undetectable(
            "no rising edge: VPG max at beat start or non-positive".into(),
        ));
    }

    // O: last rising VPG zero crossing before u, else beat start
    let o = (0..u)
        .rev()
        .find(|&i| vpg[i] <= 0.0 && vpg[i + 1] > 0.0)
        .map(|i| zero_cross_index(vpg, i))
        .unwrap_or(0);

    // S: first falling VPG zero crossing after u
    let s = falling_cross_after(vpg, u, n - 1)
        .ok_or_else(|| FiducialError::Undetectable("no systolic peak after max upslope".into()))?;

    // v: global VPG min after S; w: first VPG local max after v
    if s + 1 >= n {
        return Err(FiducialError::Undetectable("systolic peak at beat end".into()));
    }
    let v = argmin_range(vpg, s, n);
    let w = local_maxima(vpg, v + 1, n).into_iter().next();

    // a: APG max before u; b: APG min after a
    let a = argmax_range(apg, 0, u.max(1));
    let b = argmin_range(apg, (a + 1).min(n - 1), n);

    // c, d, e: alternating APG extrema after b
    let c = local_maxima(apg, b + 1, n).into_iter().next();
    let d_wave = c.and_then(|ci| local_minima(apg, ci + 1, n).into_iter().next());
    let e = d_wave.and_then(|di| local_maxima(apg, di + 1, n).into_iter().next());

    // N: APG local max in the post-systolic window nearest w (JPG falling
    // zero crossings as fallback), accepted only when the PPG rises again
    // afterwards — otherwise a notchless decay would fake a notch.
    let search_from = s + 1;
    let mut notch_candidates = local_maxima(apg, search_from, n);
    if notch_candidates.is_empty() {
        notch_candidates = (search_from..n - 1)
            .filter(|&i| jpg[i] >= 0.0 && jpg[i + 1] < 0.0)
            .map(|i| zero_cross_index(jpg, i))
            .collect();
    }
    // a genuine post-notch rise must clear a sliver of the upstroke slope,
    // otherwise averaging-residue wiggles in the tail fake a reflected wave
    let rise_floor = 1e-3 * vpg[u];
    let rises_after = |idx: usize| (idx + 1..n).any(|i| vpg[i] > rise_floor);
    let notch = match w {
        Some(wi) => notch_candidates
            .iter()
            .copied()
            .min_by_key(|&i| (i as i64 - wi as i64).unsigned_abs()),
        None => notch_candidates.first().copied(),
    }
    .filter(|&i| rises_after(i))
    .map(|i| {
        // the curvature peak leads the actual minimum slightly; snap to the
        // rising VPG zero crossing (the PPG local min) when one is nearby
        let radius = n / 20;
        let lo = i.saturating_sub(radius).max(s + 1);
        let hi = (i + radius).min(n - 1);
        (lo..hi)
            .filter(|&j| vpg[j] <= 0.0 && vpg[j + 1] > 0.0)
            .map(|j| zero_cross_index(vpg, j))
            .min_by_key(|&j| (j as i64 - i as i64).unsigned_abs())
            .unwrap_or(i)
    });

    // D: first falling VPG zero crossing after N, or a plain PPG local max;
    // the N -> D rise must be more than averaging residue
    let amp = ppg[s] - ppg[o];
    let dia = notch.and_then(|ni| {
        falling_cross_after(vpg, ni + 1, n - 1)
            .or_else(|| local_maxima(ppg, ni + 1, n).into_iter().next())
            .filter(|&di| ppg[di] - ppg[ni] >= 1e-3 * amp)
    });

    let point = |idx: usize, wave: &[f64]| Point {
        idx,
        val: wave[idx],
    };
    Ok(FiducialSet {
        o: point(o, ppg),
        s: point(s, ppg),
        n: notch.map(|i| point(i, ppg)),
        d: dia.map(|i| point(i, ppg)),
        u: point(u, vpg),
        v: point(v, vpg),
        w: w.map(|i| point(i, vpg)),
        a: point(a, apg),
        b: point(b, apg),
        c: c.map(|i| point(i, apg)),
        d_wave: d_wave.map(|i| point(i, apg)),
        e: e.map(|i| point(i, apg)),
    })
}

/// Ordering invariants of a detected set; used by tests and the acceptance
/// suite.
pub fn check_ordering(f: &FiducialSet, len: usize) -> std::result::Result<(), String> {
    let err = |msg: String| -> std::result::Result<(), String> { Err(msg) };
    if !(f.o.idx < f.u.idx) {
        return err(format!("O {} !< u {}", f.o.idx, f.u.idx));
    }
    if !(f.u.idx < f.s.idx) {
        return err(format!("u {} !< S {}", f.u.idx, f.s.idx));
    }
    if !(f.a.idx < f.b.idx) {
        return err(format!("a {} !< b {}", f.a.idx, f.b.idx));
    }
    if !(f.o.idx <= f.a.idx && f.a.idx < f.u.idx) {
        return err(format!("a {} outside [O {}, u {})", f.a.idx, f.o.idx, f.u.idx));
    }
    if !(f.a.idx < f.s.idx) {
        return err(format!("a {} !< S {}", f.a.idx, f.s.idx));
    }
    if let (Some(nt), Some(d)) = (&f.n, &f.d) {
        if !(f.s.idx < nt.idx && nt.idx < d.idx && d.idx <= len - 1) {
            return err(format!(
                "S {} < N {} < D {} <= {} violated",
                f.s.idx,
                nt.idx,
                d.idx,
                len - 1
            ));
        }
    }
    let mut apg_chain = vec![f.a.idx, f.b.idx];
    for p in [&f.c, &f.d_wave, &f.e].into_iter().flatten() {
        apg_chain.push(p.idx);
    }
    if !apg_chain.windows(2).all(|w| w[0] < w[1]) {
        return err(format!("APG chain not increasing: {apg_chain:?}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_beat, BeatModel, Gaussian};
    use std::f64::consts::PI;

    fn template_from(samples: Vec<f64>, duration_s: f64) -> BeatTemplate {
        let fs_equiv = samples.len() as f64 / duration_s;
        BeatTemplate {
            samples,
            n_beats_averaged: 100,
            fs_equiv,
        }
    }

    fn two_gaussian(reflected_amp: f64) -> BeatModel {
        BeatModel {
            systolic: Gaussian { amp: 1.0, center_s: 0.15, width_s: 0.05 },
            reflected: (reflected_amp > 0.0).then_some(Gaussian {
                amp: reflected_amp,
                center_s: 0.40,
                width_s: 0.06,
            }),
            notch_depth: if reflected_amp > 0.0 { 0.15 } else { 0.0 },
            beat_period_s: 0.8,
            jitter_sigma_s: 0.0,
        }
    }

    #[test]
    fn vpg_of_sine_matches_analytic_derivative() {
        let l = 400;
        let samples: Vec<f64> = (0..l).map(|i| (2.0 * PI * i as f64 / l as f64).sin()).collect();
        // one period over 1 s -> fs_equiv = L
        let stack = derivatives(&template_from(samples, 1.0));
        for i in 10..l - 10 {
            let t = i as f64 / l as f64;
            let expect = 2.0 * PI * (2.0 * PI * t).cos();
            let got = stack.vpg[i];
            assert!(
                (got - expect).abs() <= 0.01 * 2.0 * PI,
                "vpg[{i}] = {got}, expected {expect}"
            );
        }
    }

    #[test]
    fn derivatives_of_constant_are_zero() {
        let stack = derivatives(&template_from(vec![2.0; 256], 1.0));
        for wf in [&stack.vpg, &stack.apg, &stack.jpg, &stack.spg] {
            for v in wf {
                assert!(v.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn cubic_gives_constant_jerk_and_zero_snap() {
        let l = 400;
        let c3 = 0.7;
        let samples: Vec<f64> = (0..l)
            .map(|i| {
                let t = i as f64 / l as f64;
                c3 * t * t * t - 0.2 * t * t + 0.1 * t + 3.0
            })
            .collect();
        let stack = derivatives(&template_from(samples, 1.0));
        for i in 20..l - 20 {
            assert!(
                (stack.jpg[i] - 6.0 * c3).abs() <= 0.01 * 6.0 * c3,
                "jpg[{i}] = {}",
                stack.jpg[i]
            );
            assert!(stack.spg[i].abs() <= 0.5, "spg[{i}] = {}", stack.spg[i]);
        }
    }

    #[test]
    fn sine_markers_sit_at_ppg_extrema() {
        let l = 400;
        let samples: Vec<f64> = (0..l)
            .map(|i| (2.0 * PI * i as f64 / l as f64).sin())
            .collect();
        let stack = derivatives(&template_from(samples, 1.0));
        let markers = detect_inflection_markers(&stack);
        let vpg_marks: Vec<&Marker> = markers
            .iter()
            .filter(|m| m.waveform == Waveform::Vpg)
            .collect();
        // sine max at L/4, min at 3L/4
        assert!(vpg_marks
            .iter()
            .any(|m| m.direction == Crossing::Falling && (m.index as i64 - 100).abs() <= 3));
        assert!(vpg_marks
            .iter()
            .any(|m| m.direction == Crossing::Rising && (m.index as i64 - 300).abs() <= 3));
    }

    #[test]
    fn marker_set_contains_true_systolic_index() {
        let model = two_gaussian(0.35);
        let (wave, truth) = gen_beat(&model, 400).unwrap();
        let stack = derivatives(&template_from(wave, 0.8));
        let markers = detect_inflection_markers(&stack);
        let s_true = truth.systolic.index(400, 0.8) as i64;
        assert!(
            markers.iter().any(|m| m.waveform == Waveform::Vpg
                && m.direction == Crossing::Falling
                && (m.index as i64 - s_true).abs() <= 2),
            "no VPG falling marker within 2 samples of {s_true}"
        );
    }

    #[test]
    fn monotone_ramp_has_no_vpg_markers() {
        let samples: Vec<f64> = (0..128).map(|i| i as f64 * 0.01).collect();
        let stack = derivatives(&template_from(samples, 1.0));
        let count = detect_inflection_markers(&stack)
            .iter()
            .filter(|m| m.waveform == Waveform::Vpg)
            .count();
        assert_eq!(count, 0);
    }

    #[test]
    fn two_gaussian_beat_fiducials_match_the_oracle() {
        let model = two_gaussian(0.35);
        let (wave, truth) = gen_beat(&model, 400).unwrap();
        let stack = derivatives(&template_from(wave, 0.8));
        let f = detect_fiducials(&stack).unwrap();
        let ms_per_sample = 0.8 / 400.0 * 1000.0;
        let to_ms = |idx: usize, t_true: f64| (idx as f64 * 0.8 / 400.0 - t_true).abs() * 1000.0;

        assert!(
            to_ms(f.s.idx, truth.systolic.t) <= 10.0,
            "S off by {} ms",
            to_ms(f.s.idx, truth.systolic.t)
        );
        let n_det = f.n.expect("notch detected");
        assert!(
            to_ms(n_det.idx, truth.notch.unwrap().t) <= 15.0,
            "N off by {} ms",
            to_ms(n_det.idx, truth.notch.unwrap().t)
        );
        let d_det = f.d.expect("diastolic detected");
        assert!(
            to_ms(d_det.idx, truth.diastolic.unwrap().t) <= 15.0,
            "D off by {} ms",
            to_ms(d_det.idx, truth.diastolic.unwrap().t)
        );
        assert!(ms_per_sample < 10.0, "test resolution sanity");
        check_ordering(&f, 400).unwrap();
    }

    #[test]
    fn beat_without_reflection_flags_notch_and_diastolic_absent() {
        let model = two_gaussian(0.0);
        let (wave, _) = gen_beat(&model, 400).unwrap();
        let stack = derivatives(&template_from(wave, 0.8));
        let f = detect_fiducials(&stack).unwrap();
        assert!(f.n.is_none(), "N fabricated at {:?}", f.n);
        assert!(f.d.is_none(), "D fabricated at {:?}", f.d);
        // mandatory family present by type; sanity-check their ordering
        check_ordering(&f, 400).unwrap();
    }

    #[test]
    fn ordering_invariants_hold_across_random_generator_beats() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let mut checked = 0;
        for _ in 0..100 {
            let period = rng.gen_range(0.55..1.1);
            let model = BeatModel {
                systolic: Gaussian {
                    amp: 1.0,
                    center_s: rng.gen_range(0.13..0.19) * period,
                    width_s: rng.gen_range(0.04..0.09) * period,
                },
                reflected: Some(Gaussian {
                    amp: rng.gen_range(0.05..0.6),
                    center_s: rng.gen_range(0.33..0.55) * period,
                    width_s: rng.gen_range(0.05..0.1) * period,
                }),
                notch_depth: rng.gen_range(0.01..0.4),
                beat_period_s: period,
                jitter_sigma_s: 0.0,
            };
            let (wave, _) = gen_beat(&model, 400).unwrap();
            let stack = derivatives(&template_from(wave, period));
            let f = detect_fiducials(&stack).unwrap();
            check_ordering(&f, 400).unwrap();
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn vpg_at_systolic_brackets_zero() {
        let model = two_gaussian(0.35);
        let (wave, _) = gen_beat(&model, 400).unwrap();
        let stack = derivatives(&template_from(wave, 0.8));
        let f = detect_fiducials(&stack).unwrap();
        let s = f.s.idx;
        let gap = (stack.vpg[s + 1] - stack.vpg[s])
            .abs()
            .min((stack.vpg[s] - stack.vpg[s - 1]).abs());
        assert!(
            stack.vpg[s].abs() <= gap,
            "vpg[S] = {} exceeds bracket {gap}",
            stack.vpg[s]
        );
    }

    #[test]
    fn amplitude_scaling_scales_values_keeps_indices() {
        let model = two_gaussian(0.35);
        let (wave, _) = gen_beat(&model, 400).unwrap();
        let k = 3.7;
        let scaled: Vec<f64> = wave.iter().map(|v| v * k).collect();
        let f1 = detect_fiducials(&derivatives(&template_from(wave, 0.8))).unwrap();
        let f2 = detect_fiducials(&derivatives(&template_from(scaled, 0.8))).unwrap();
        assert_eq!(f1.o.idx, f2.o.idx);
        assert_eq!(f1.s.idx, f2.s.idx);
        assert_eq!(f1.u.idx, f2.u.idx);
        assert_eq!(f1.v.idx, f2.v.idx);
        assert_eq!(f1.a.idx, f2.a.idx);
        assert_eq!(f1.b.idx, f2.b.idx);
        assert_eq!(f1.n.map(|p| p.idx), f2.n.map(|p| p.idx));
        assert_eq!(f1.d.map(|p| p.idx), f2.d.map(|p| p.idx));
        for (p1, p2) in [(f1.s, f2.s), (f1.u, f2.u), (f1.v, f2.v), (f1.a, f2.a), (f1.b, f2.b)] {
            assert!(
                (p2.val - k * p1.val).abs() <= 1e-9 * k * p1.val.abs().max(1.0),
                "value did not scale: {} vs {}",
                p2.val,
                k * p1.val
            );
        }
    }

    #[test]
    fn circular_shift_shifts_indices() {
        let model = two_gaussian(0.35);
        let (wave, _) = gen_beat(&model, 400).unwrap();
        let f0 = detect_fiducials(&derivatives(&template_from(wave.clone(), 0.8))).unwrap();
        for shift in [5usize, 12, 20] {
            let mut shifted = wave.clone();
            shifted.rotate_right(shift);
            let f = detect_fiducials(&derivatives(&template_from(shifted, 0.8))).unwrap();
            assert_eq!(f.s.idx, f0.s.idx + shift, "S under shift {shift}");
            assert_eq!(f.u.idx, f0.u.idx + shift, "u under shift {shift}");
            assert_eq!(
                f.n.map(|p| p.idx),
                f0.n.map(|p| p.idx + shift),
                "N under shift {shift}"
            );
        }
    }

    #[test]
    fn flat_beat_is_undetectable() {
        let stack = derivatives(&template_from(vec![1.0; 400], 0.8));
        assert!(detect_fiducials(&stack).is_err());
    }
}

