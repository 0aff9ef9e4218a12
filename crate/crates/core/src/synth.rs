//! Synthetic cohort generator with closed-form ground truth.
//!
//! Beats are sums of Gaussians (systolic wave, optional reflected wave, a
//! notch carve-out between them), so every fiducial of the continuous model
//! can be located by dense scanning plus parabolic refinement — completely
//! independently of the detector in [`crate::fiducials`]. Recordings are
//! jittered beat trains with respiration modulation, baseline drift and iid
//! Gaussian noise; cohorts add an age-dependent morphology law on top.
//!
//! Everything is deterministic under the seed, with per-subject streams
//! derived as `seed + subject_index`.

use crate::io::{Gender, RawRecording, SubjectMeta};
use rand::distributions::{Bernoulli, Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// One Gaussian component of a beat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub amp: f64,
    pub center_s: f64,
    pub width_s: f64,
}

impl Gaussian {
    fn value(&self, t: f64) -> f64 {
        let u = (t - self.center_s) / self.width_s;
        self.amp * (-0.5 * u * u).exp()
    }
    fn d1(&self, t: f64) -> f64 {
        let u = (t - self.center_s) / self.width_s;
        -self.amp * u / self.width_s * (-0.5 * u * u).exp()
    }
    fn d2(&self, t: f64) -> f64 {
        let u = (t - self.center_s) / self.width_s;
        self.amp * (u * u - 1.0) / (self.width_s * self.width_s) * (-0.5 * u * u).exp()
    }
}

/// Closed-form single-beat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatModel {
    pub systolic: Gaussian,
    pub reflected: Option<Gaussian>,
    /// Depth of the notch carve-out between the two waves, as a fraction of
    /// the systolic amplitude. Ignored without a reflected wave.
    pub notch_depth: f64,
    pub beat_period_s: f64,
    /// Per-beat period jitter (standard deviation, seconds).
    pub jitter_sigma_s: f64,
}

impl BeatModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.systolic.amp > 0.0) {
            return Err(SynthError::Argument(format!(
                "systolic amplitude must be positive, got {}",
                self.systolic.amp
            )));
        }
        if !(self.beat_period_s > 0.0) {
            return Err(SynthError::Argument("beat period must be positive".into()));
        }
        let t = self.beat_period_s;
        if !(self.systolic.center_s > 0.0 && self.systolic.center_s < t) {
            return Err(SynthError::Argument("systolic center outside the beat".into()));
        }
        if let Some(r) = &self.reflected {
            if !(r.amp > 0.0) {
                return Err(SynthError::Argument(format!(
                    "reflected amplitude must be positive, got {}",
                    r.amp
                )));
            }
            if !(r.center_s > self.systolic.center_s && r.center_s < t) {
                return Err(SynthError::Argument(
                    "reflected center must lie after the systolic center, inside the beat".into(),
                ));
            }
        }
        if !(self.notch_depth >= 0.0) {
            return Err(SynthError::Argument("notch depth must be non-negative".into()));
        }
        Ok(())
    }

    fn notch(&self) -> Option<Gaussian> {
        let r = self.reflected.as_ref()?;
        if self.notch_depth == 0.0 {
            return None;
        }
        Some(Gaussian {
            amp: self.notch_depth * self.systolic.amp,
            center_s: 0.5 * (self.systolic.center_s + r.center_s),
            width_s: (r.center_s - self.systolic.center_s) / 6.0,
        })
    }

    /// Continuous beat value at `t` seconds into the beat.
    pub fn value(&self, t: f64) -> f64 {
        let mut v = self.systolic.value(t);
        if let Some(r) = &self.reflected {
            v += r.value(t);
        }
        if let Some(n) = self.notch() {
            v -= n.value(t);
        }
        v
    }

    fn d1(&self, t: f64) -> f64 {
        let mut v = self.systolic.d1(t);
        if let Some(r) = &self.reflected {
            v += r.d1(t);
        }
        if let Some(n) = self.notch() {
            v -= n.d1(t);
        }
        v
    }

    fn d2(&self, t: f64) -> f64 {
        let mut v = self.systolic.d2(t);
        if let Some(r) = &self.reflected {
            v += r.d2(t);
        }
        if let Some(n) = self.notch() {
            v -= n.d2(t);
        }
        v
    }
}

/// A ground-truth landmark on the continuous model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruePoint {
    /// Seconds into the beat.
    pub t: f64,
    pub val: f64,
}

impl TruePoint {
    /// Nearest sample index for a beat resampled to `len` points.
    pub fn index(&self, len: usize, period_s: f64) -> usize {
        ((self.t / period_s * len as f64).round() as usize).min(len - 1)
    }
}

/// Ground-truth fiducials of one beat, computed by dense scan + parabolic
/// refinement on the closed-form model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueFiducials {
    pub onset: TruePoint,
    pub systolic: TruePoint,
    pub notch: Option<TruePoint>,
    pub diastolic: Option<TruePoint>,
    pub vpg_u: TruePoint,
    pub vpg_v: TruePoint,
    pub vpg_w: Option<TruePoint>,
    pub apg_a: TruePoint,
    pub apg_b: TruePoint,
}

const ORACLE_OVERSAMPLE: usize = 10;

/// Sample one beat to `len` points and return it with its oracle fiducials.
pub fn gen_beat(model: &BeatModel, len: usize) -> Result<(Vec<f64>, TrueFiducials)> {
    model.validate()?;
    if len < 16 {
        return Err(SynthError::Argument(format!("beat length {len} too small")));
    }
    let period = model.beat_period_s;
    let samples: Vec<f64> = (0..len)
        .map(|i| model.value(i as f64 * period / len as f64))
        .collect();
    let truth = true_fiducials(model, len * ORACLE_OVERSAMPLE)?;
    Ok((samples, truth))
}

fn true_fiducials(model: &BeatModel, grid_n: usize) -> Result<TrueFiducials> {
    let period = model.beat_period_s;
    let dt = period / grid_n as f64;
    let ts: Vec<f64> = (0..grid_n).map(|i| i as f64 * dt).collect();
    let f: Vec<f64> = ts.iter().map(|&t| model.value(t)).collect();
    let f1: Vec<f64> = ts.iter().map(|&t| model.d1(t)).collect();
    let f2: Vec<f64> = ts.iter().map(|&t| model.d2(t)).collect();

    let refine_max = |g: &dyn Fn(f64) -> f64, i: usize| -> f64 {
        if i == 0 || i == grid_n - 1 {
            return ts[i];
        }
        let (ym, y0, yp) = (g(ts[i] - dt), g(ts[i]), g(ts[i] + dt));
        let denom = ym - 2.0 * y0 + yp;
        if denom.abs() < 1e-300 {
            return ts[i];
        }
        ts[i] + 0.5 * dt * (ym - yp) / denom
    };

    let argmax = |v: &[f64], lo: usize, hi: usize| -> usize {
        (lo..hi).fold(lo, |best, i| if v[i] > v[best] { i } else { best })
    };
    let argmin = |v: &[f64], lo: usize, hi: usize| -> usize {
        (lo..hi).fold(lo, |best, i| if v[i] < v[best] { i } else { best })
    };

    let fv = |t: f64| model.value(t);
    let f1v = |t: f64| model.d1(t);
    let f2v = |t: f64| model.d2(t);

    let s_i = argmax(&f, 0, grid_n);
    let s_t = refine_max(&fv, s_i);
    let o_i = argmin(&f, 0, s_i.max(1));
    let o_t = ts[o_i];
    let u_i = argmax(&f1, o_i, s_i.max(o_i + 1));
    let u_t = refine_max(&f1v, u_i);
    let v_i = argmin(&f1, s_i, grid_n);
    let v_t = refine_max(&f1v, v_i);
    let a_i = argmax(&f2, o_i, u_i.max(o_i + 1));
    let a_t = refine_max(&f2v, a_i);
    let b_i = argmin(&f2, a_i + 1, grid_n);
    let b_t = refine_max(&f2v, b_i);

    // first interior local minimum of f after S, then the local maximum after it
    let mut notch = None;
    let mut diastolic = None;
    for i in (s_i + 1)..grid_n.saturating_sub(1) {
        if f[i] <= f[i - 1] && f[i] < f[i + 1] {
            let t = refine_max(&fv, i);
            notch = Some(TruePoint { t, val: model.value(t) });
            for j in (i + 1)..grid_n.saturating_sub(1) {
                if f[j] >= f[j - 1] && f[j] > f[j + 1] {
                    let td = refine_max(&fv, j);
                    diastolic = Some(TruePoint {
                        t: td,
                        val: model.value(td),
                    });
                    break;
                }
            }
            break;
        }
    }

    // first local maximum of f' after v
    let mut vpg_w = None;
    for i in (v_i + 1)..grid_n.saturating_sub(1) {
        if f1[i] >= f1[i - 1] && f1[i] > f1[i + 1] {
            let t = refine_max(&f1v, i);
            vpg_w = Some(TruePoint { t, val: model.d1(t) });
            break;
        }
    }

    Ok(TrueFiducials {
        onset: TruePoint { t: o_t, val: fv(o_t) },
        systolic: TruePoint { t: s_t, val: fv(s_t) },
        notch,
        diastolic,
        vpg_u: TruePoint { t: u_t, val: f1v(u_t) },
        vpg_v: TruePoint { t: v_t, val: f1v(v_t) },
        vpg_w,
        apg_a: TruePoint { t: a_t, val: f2v(a_t) },
        apg_b: TruePoint { t: b_t, val: f2v(b_t) },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Respiration {
    pub rate_hz: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub rate_hz: f64,
    pub amp: f64,
}

/// What the generator knows that the pipeline has to re-derive.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingTruth {
    /// Sample index of each beat start.
    pub onsets: Vec<usize>,
    /// Realized period of each beat, seconds.
    pub beat_periods_s: Vec<f64>,
    /// Respiration modulator per sample.
    pub envelope: Vec<f64>,
}

/// Generate a full recording: jittered beat train x respiration modulator
/// + baseline drift + iid Gaussian noise.
#[allow(clippy::too_many_arguments)]
pub fn gen_recording(
    model: &BeatModel,
    meta: &SubjectMeta,
    duration_s: f64,
    fs: f64,
    respiration: Respiration,
    drift: Drift,
    noise_sigma: f64,
    seed: u64,
) -> Result<(RawRecording, RecordingTruth)> {
    model.validate()?;
    if !(duration_s >= 10.0) {
        return Err(SynthError::Argument(format!(
            "duration must be at least 10 s, got {duration_s}"
        )));
    }
    let n = (duration_s * fs).round() as usize;

    let mut jitter_rng = ChaCha12Rng::seed_from_u64(seed);
    jitter_rng.set_stream(1);
    let mut noise_rng = ChaCha12Rng::seed_from_u64(seed);
    noise_rng.set_stream(2);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");

    // lay out jittered beats until the recording is covered
    let mut onsets = Vec::new();
    let mut periods = Vec::new();
    let mut start = 0usize;
    while start < n {
        let z: f64 = jitter.sample(&mut jitter_rng);
        let period = (model.beat_period_s + model.jitter_sigma_s * z).clamp(0.3, 2.0);
        onsets.push(start);
        periods.push(period);
        start += (period * fs).round().max(1.0) as usize;
    }

    let mut clean = vec![0.0; n];
    for (k, &onset) in onsets.iter().enumerate() {
        let len = (periods[k] * fs).round() as usize;
        let scale = model.beat_period_s / periods[k];
        for i in 0..len {
            let idx = onset + i;
            if idx >= n {
                break;
            }
            clean[idx] = model.value(i as f64 / fs * scale);
        }
    }

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(n);
    let mut envelope = Vec::with_capacity(n);
    for (i, &v) in clean.iter().enumerate() {
        let t = i as f64 / fs;
        let m =
            1.0 + respiration.depth * (2.0 * std::f64::consts::PI * respiration.rate_hz * t).sin();
        let d = drift.amp * (2.0 * std::f64::consts::PI * drift.rate_hz * t).sin();
        let e = if noise_sigma > 0.0 {
            noise_sigma * noise.sample(&mut noise_rng)
        } else {
            0.0
        };
        envelope.push(m);
        samples.push(v * m + d + e);
    }

    Ok((
        RawRecording {
            meta: meta.clone(),
            fs,
            duration_s: n as f64 / fs,
            samples,
        },
        RecordingTruth {
            onsets,
            beat_periods_s: periods,
            envelope,
        },
    ))
}

/// Age-morphology coupling of the synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeLaw {
    pub hr_base_bpm: f64,
    pub hr_slope_bpm_per_yr: f64,
    pub hr_scatter_bpm: f64,
    pub refl_amp_base: f64,
    pub refl_amp_slope_per_yr: f64,
    pub refl_amp_scatter: f64,
    pub refl_center_base_frac: f64,
    pub refl_center_slope_per_yr: f64,
    pub refl_center_scatter: f64,
    pub notch_base: f64,
    pub notch_slope_per_yr: f64,
    pub notch_bump: f64,
    pub notch_bump_center_yr: f64,
    pub notch_bump_width_yr: f64,
    pub notch_scatter: f64,
    pub sys_width_base_frac: f64,
    pub sys_width_slope_per_yr: f64,
    pub sys_width_scatter: f64,
    pub jitter_frac: f64,
}

impl AgeLaw {
    /// All age couplings removed; scatter stays. Used by the no-signal null
    /// check.
    pub fn without_age_coupling(mut self) -> Self {
        self.hr_slope_bpm_per_yr = 0.0;
        self.refl_amp_slope_per_yr = 0.0;
        self.refl_center_slope_per_yr = 0.0;
        self.notch_slope_per_yr = 0.0;
        self.notch_bump = 0.0;
        self.sys_width_slope_per_yr = 0.0;
        self
    }
}

/// Cohort generation parameters; `cohort_default.toml` is the pinned default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub age_min: f64,
    pub age_max: f64,
    pub duration_s: f64,
    pub fs: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub respiration: Respiration,
    pub drift: Drift,
    pub age_law: AgeLaw,
}

impl Default for CohortSpec {
    fn default() -> Self {
        toml::from_str(include_str!("../cohort_default.toml"))
            .expect("bundled cohort_default.toml parses")
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 1 {
            return Err(SynthError::Argument("cohort needs at least one subject".into()));
        }
        if !(self.age_min > 0.0 && self.age_max > self.age_min) {
            return Err(SynthError::Argument(format!(
                "bad age range [{}, {}]",
                self.age_min, self.age_max
            )));
        }
        Ok(())
    }
}

/// One generated subject.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSubject {
    pub recording: RawRecording,
    pub truth: RecordingTruth,
    pub model: BeatModel,
}

/// Generate the cohort: uniform ages, morphology from the age law,
/// demographics sampled consistently.
pub fn gen_cohort(spec: &CohortSpec) -> Result<Vec<CohortSubject>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.n_subjects);
    for i in 0..spec.n_subjects {
        out.push(gen_subject(spec, i)?);
    }
    Ok(out)
}

fn gen_subject(spec: &CohortSpec, index: usize) -> Result<CohortSubject> {
    let law = &spec.age_law;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed.wrapping_add(index as u64));

    let age = Uniform::new(spec.age_min, spec.age_max).sample(&mut rng);
    let norm = |rng: &mut ChaCha12Rng, sigma: f64| -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("sigma > 0").sample(rng)
        } else {
            0.0
        }
    };

    let hr = (law.hr_base_bpm + law.hr_slope_bpm_per_yr * age + norm(&mut rng, law.hr_scatter_bpm))
        .clamp(50.0, 115.0);
    let period = 60.0 / hr;

    let refl_amp = (law.refl_amp_base
        + law.refl_amp_slope_per_yr * age
        + norm(&mut rng, law.refl_amp_scatter))
    .clamp(0.03, 0.65);
    let refl_center = (law.refl_center_base_frac
        + law.refl_center_slope_per_yr * age
        + norm(&mut rng, law.refl_center_scatter))
    .clamp(0.30, 0.62);
    let du = (age - law.notch_bump_center_yr) / law.notch_bump_width_yr;
    let notch = (law.notch_base
        + law.notch_slope_per_yr * age
        + law.notch_bump * (-0.5 * du * du).exp()
        + norm(&mut rng, law.notch_scatter))
    .clamp(0.01, 0.45);
    let sys_width = (law.sys_width_base_frac
        + law.sys_width_slope_per_yr * age
        + norm(&mut rng, law.sys_width_scatter))
    .clamp(0.035, 0.10);
    let sys_center = (0.16 + norm(&mut rng, 0.006)).clamp(0.12, 0.20);
    let refl_width = (0.075 + norm(&mut rng, 0.006)).clamp(0.05, 0.10);

    let model = BeatModel {
        systolic: Gaussian {
            amp: 1.0,
            center_s: sys_center * period,
            width_s: sys_width * period,
        },
        reflected: Some(Gaussian {
            amp: refl_amp,
            center_s: refl_center * period,
            width_s: refl_width * period,
        }),
        notch_depth: notch,
        beat_period_s: period,
        jitter_sigma_s: law.jitter_frac * period,
    };

    let gender = if Bernoulli::new(0.637).unwrap().sample(&mut rng) {
        Gender::Male
    } else {
        Gender::Female
    };
    let height = (96.0
        + 72.0 * (age / 14.0).min(1.0)
        + if gender == Gender::Male { 6.0 } else { 0.0 }
        + norm(&mut rng, 9.0))
    .clamp(70.0, 210.0);
    let weight = (15.0
        + 50.0 * (age / 16.0).min(1.0)
        + if gender == Gender::Male { 6.0 } else { 0.0 }
        + norm(&mut rng, 9.0))
    .clamp(10.0, 140.0);
    let smoker = age >= 18.0 && Bernoulli::new(0.22).unwrap().sample(&mut rng);
    let family_history_cvd = Bernoulli::new(0.25).unwrap().sample(&mut rng);
    let spo2 = (98.2 - 0.01 * age + norm(&mut rng, 0.7)).clamp(90.0, 100.0);

    let meta = SubjectMeta {
        subject_id: format!("s{index:03}"),
        age,
        gender,
        height,
        weight,
        family_history_cvd,
        smoker,
        heart_rate: hr,
        spo2,
    };

    let rec_seed: u64 = rng.gen();
    let (recording, truth) = gen_recording(
        &model,
        &meta,
        spec.duration_s,
        spec.fs,
        spec.respiration,
        spec.drift,
        spec.noise_sigma,
        rec_seed,
    )?;
    Ok(CohortSubject {
        recording,
        truth,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_gaussian_model() -> BeatModel {
        BeatModel {
            systolic: Gaussian {
                amp: 1.0,
                center_s: 0.15,
                width_s: 0.05,
            },
            reflected: Some(Gaussian {
                amp: 0.35,
                center_s: 0.40,
                width_s: 0.06,
            }),
            notch_depth: 0.15,
            beat_period_s: 0.8,
            jitter_sigma_s: 0.0,
        }
    }

    #[test]
    fn single_gaussian_systolic_index_is_exact() {
        let model = BeatModel {
            systolic: Gaussian {
                amp: 1.0,
                center_s: 0.3 * 0.8,
                width_s: 0.05 * 0.8,
            },
            reflected: None,
            notch_depth: 0.0,
            beat_period_s: 0.8,
            jitter_sigma_s: 0.0,
        };
        let (wave, truth) = gen_beat(&model, 400).unwrap();
        assert_eq!(wave.len(), 400);
        assert_eq!(truth.systolic.index(400, 0.8), (0.3f64 * 400.0).round() as usize);
        assert!(truth.notch.is_none());
        assert!(truth.diastolic.is_none());
    }

    #[test]
    fn two_gaussian_notch_matches_brute_force_scan() {
        let model = two_gaussian_model();
        let (_, truth) = gen_beat(&model, 400).unwrap();
        // independent coarse oracle: straight argmin between the two centers
        let mut best = (0.0, f64::INFINITY);
        let n = 40_000;
        for i in 0..n {
            let t = 0.15 + (0.40 - 0.15) * i as f64 / n as f64;
            let v = model.value(t);
            if v < best.1 {
                best = (t, v);
            }
        }
        let nt = truth.notch.expect("notch present");
        assert!(
            (nt.t - best.0).abs() < 1e-3,
            "oracle notch {} vs scan {}",
            nt.t,
            best.0
        );
        let d = truth.diastolic.expect("diastolic present");
        assert!(d.t > nt.t && d.t < 0.8);
        // ordering of the always-present points
        assert!(truth.onset.t <= truth.apg_a.t);
        assert!(truth.apg_a.t < truth.vpg_u.t);
        assert!(truth.vpg_u.t < truth.systolic.t);
        assert!(truth.systolic.t < truth.vpg_v.t);
    }

    #[test]
    fn zero_amplitude_model_is_rejected() {
        let mut model = two_gaussian_model();
        model.systolic.amp = 0.0;
        assert!(matches!(gen_beat(&model, 400), Err(SynthError::Argument(_))));
    }

    #[test]
    fn recording_sample_count_matches_duration() {
        let model = two_gaussian_model();
        let meta = placeholder_meta();
        let (rec, truth) = gen_recording(
            &model,
            &meta,
            120.0,
            400.0,
            Respiration { rate_hz: 0.25, depth: 0.3 },
            Drift { rate_hz: 0.02, amp: 0.4 },
            0.02,
            9,
        )
        .unwrap();
        assert_eq!(rec.samples.len(), 48_000);
        assert!(truth.onsets.len() > 100, "{} beats", truth.onsets.len());
        assert_eq!(truth.envelope.len(), 48_000);
    }

    #[test]
    fn zero_noise_recording_equals_clean_model() {
        let model = two_gaussian_model();
        let meta = placeholder_meta();
        let resp = Respiration { rate_hz: 0.25, depth: 0.3 };
        let drift = Drift { rate_hz: 0.02, amp: 0.4 };
        let (rec, truth) = gen_recording(&model, &meta, 20.0, 400.0, resp, drift, 0.0, 5).unwrap();

        // reconstruct from the returned ground truth
        let fs = 400.0;
        let n = rec.samples.len();
        let mut clean = vec![0.0; n];
        for (k, &onset) in truth.onsets.iter().enumerate() {
            let len = (truth.beat_periods_s[k] * fs).round() as usize;
            let scale = model.beat_period_s / truth.beat_periods_s[k];
            for i in 0..len {
                if onset + i >= n {
                    break;
                }
                clean[onset + i] = model.value(i as f64 / fs * scale);
            }
        }
        for (i, s) in rec.samples.iter().enumerate() {
            let t = i as f64 / fs;
            let expect = clean[i] * truth.envelope[i]
                + drift.amp * (2.0 * std::f64::consts::PI * drift.rate_hz * t).sin();
            assert!(
                (s - expect).abs() < 1e-12,
                "sample {i}: {s} vs reconstructed {expect}"
            );
        }
    }

    #[test]
    fn default_cohort_has_179_subjects_and_is_reproducible() {
        let mut spec = CohortSpec::default();
        spec.duration_s = 12.0; // keep the test quick; determinism is the point
        let a = gen_cohort(&spec).unwrap();
        let b = gen_cohort(&spec).unwrap();
        assert_eq!(a.len(), 179);
        assert_eq!(a, b);
        for s in &a {
            assert!(s.recording.meta.validate().is_ok());
            assert!(s.recording.meta.age >= 3.0 && s.recording.meta.age <= 65.0);
        }
    }

    #[test]
    fn reflected_ratio_increases_with_age_by_rank_correlation() {
        let mut spec = CohortSpec::default();
        spec.duration_s = 12.0;
        spec.n_subjects = 150;
        let cohort = gen_cohort(&spec).unwrap();
        // use the oracle values directly: (D - O) / (S - O) on the clean model
        let mut pairs = Vec::new();
        for s in &cohort {
            let (_, truth) = gen_beat(&s.model, 400).unwrap();
            if let Some(d) = truth.diastolic {
                let ratio = (d.val - truth.onset.val) / (truth.systolic.val - truth.onset.val);
                pairs.push((s.recording.meta.age, ratio));
            }
        }
        assert!(pairs.len() > 100, "most subjects should have a diastolic peak");
        let rho = spearman(&pairs);
        assert!(rho > 0.8, "rank correlation {rho}");
    }

    fn spearman(pairs: &[(f64, f64)]) -> f64 {
        let n = pairs.len();
        let rank = |key: &dyn Fn(&(f64, f64)) -> f64| -> Vec<f64> {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| key(&pairs[a]).total_cmp(&key(&pairs[b])));
            let mut r = vec![0.0; n];
            for (rank_pos, &i) in idx.iter().enumerate() {
                r[i] = rank_pos as f64;
            }
            r
        };
        let ra = rank(&|p: &(f64, f64)| p.0);
        let rb = rank(&|p: &(f64, f64)| p.1);
        let mean = (n as f64 - 1.0) / 2.0;
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for i in 0..n {
            num += (ra[i] - mean) * (rb[i] - mean);
            da += (ra[i] - mean).powi(2);
            db += (rb[i] - mean).powi(2);
        }
        num / (da.sqrt() * db.sqrt())
    }

    fn placeholder_meta() -> SubjectMeta {
        SubjectMeta {
            subject_id: "t".into(),
            age: 30.0,
            gender: Gender::Female,
            height: 165.0,
            weight: 60.0,
            family_history_cvd: false,
            smoker: false,
            heart_rate: 75.0,
            spo2: 98.0,
        }
    }
}
