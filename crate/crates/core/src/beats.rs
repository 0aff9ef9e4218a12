//! Beat onset detection, segmentation to a canonical length, quality
//! rejection and template averaging.
//!
//! The onset detector is reference-free: it peak-picks the first derivative
//! with an adaptive threshold (half the rolling 75th percentile of upslope
//! maxima over a 10 s neighbourhood) and walks each accepted upslope back to
//! the preceding local minimum. Beats are time-normalized to a canonical
//! length by linear interpolation, gated on duration and on correlation
//! against the median beat, then averaged pointwise.

use crate::dsp;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BeatsError {
    #[error("beat quality too low: {0}")]
    Quality(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, BeatsError>;

/// Canonical number of samples per time-normalized beat.
pub const DEFAULT_BEAT_LEN: usize = 400;
/// Minimum surviving beats for a usable template.
pub const MIN_BEATS: usize = 10;
/// Correlation gate against the median beat.
pub const DEFAULT_CORR_GATE: f64 = 0.8;

const MIN_BEAT_S: f64 = 0.3;
const MAX_BEAT_S: f64 = 2.0;

/// One segmented, time-normalized beat.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSegment {
    pub samples: Vec<f64>,
    pub source_onset_idx: usize,
    /// Real duration before resampling, seconds.
    pub duration_s: f64,
}

/// Averaged single-beat waveform for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatTemplate {
    pub samples: Vec<f64>,
    pub n_beats_averaged: usize,
    /// Equivalent sample rate of the time-normalized beat:
    /// `len / mean beat duration`.
    pub fs_equiv: f64,
}

impl BeatTemplate {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs_equiv
    }
}

/// Inter-beat and amplitude statistics over the retained segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    pub ibi_mean_s: f64,
    pub ibi_std_s: f64,
    /// Population std of per-beat peak-to-peak amplitude.
    pub amp_std: f64,
}

/// Detect beat onsets on a preprocessed signal.
///
/// Returns strictly increasing sample indices, one per detected beat. Slices
/// implying out-of-range durations are dealt with at segmentation.
pub fn detect_onsets(x: &[f64], fs: f64) -> Result<Vec<usize>> {
    if x.len() < 3 {
        return Err(BeatsError::Quality("signal too short".into()));
    }
    // first derivative (upslope detector)
    let vpg: Vec<f64> = (0..x.len())
        .map(|i| {
            if i == 0 {
                x[1] - x[0]
            } else if i == x.len() - 1 {
                x[i] - x[i - 1]
            } else {
                (x[i + 1] - x[i - 1]) / 2.0
            }
        })
        .collect();

    // candidate upslope peaks: positive local maxima of the derivative
    let mut candidates: Vec<usize> = Vec::new();
    for i in 1..vpg.len() - 1 {
        if vpg[i] > 0.0 && vpg[i] > vpg[i - 1] && vpg[i] >= vpg[i + 1] {
            candidates.push(i);
        }
    }
    if candidates.is_empty() {
        return Err(BeatsError::Quality("no upslope events found".into()));
    }

    // adaptive gate: half the 75th percentile of candidate peak heights
    // within +-5 s of each candidate
    let half_window = (5.0 * fs) as usize;
    let mut kept: Vec<usize> = Vec::new();
    for (ci, &i) in candidates.iter().enumerate() {
        let lo = i.saturating_sub(half_window);
        let hi = i + half_window;
        let mut neighborhood: Vec<f64> = Vec::new();
        // candidates are sorted, walk outward from ci
        for &j in candidates[..ci].iter().rev() {
            if j < lo {
                break;
            }
            neighborhood.push(vpg[j]);
        }
        for &j in &candidates[ci..] {
            if j > hi {
                break;
            }
            neighborhood.push(vpg[j]);
        }
        neighborhood.sort_by(|a, b| a.total_cmp(b));
        let p75 = neighborhood[((neighborhood.len() * 3) / 4).min(neighborhood.len() - 1)];
        if vpg[i] >= 0.5 * p75 {
            kept.push(i);
        }
    }

    // refractory period: within 0.3 s keep the taller upslope
    let refractory = (MIN_BEAT_S * fs) as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for &i in &kept {
        match peaks.last() {
            Some(&last) if i - last < refractory => {
                if vpg[i] > vpg[last] {
                    *peaks.last_mut().unwrap() = i;
                }
            }
            _ => peaks.push(i),
        }
    }

    // secondary-upslope suppression: a strong diastolic rise can clear the
    // threshold on slow beats; prune any peak closer than 0.55x the median
    // interval to its neighbour, keeping the taller one
    loop {
        if peaks.len() < 3 {
            break;
        }
        let mut intervals: Vec<usize> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
        intervals.sort_unstable();
        let median = intervals[intervals.len() / 2];
        let limit = (0.55 * median as f64) as usize;
        let mut pruned = false;
        let mut next: Vec<usize> = Vec::with_capacity(peaks.len());
        for &p in &peaks {
            match next.last() {
                Some(&last) if p - last < limit => {
                    pruned = true;
                    if vpg[p] > vpg[last] {
                        *next.last_mut().unwrap() = p;
                    }
                }
                _ => next.push(p),
            }
        }
        peaks = next;
        if !pruned {
            break;
        }
    }

    // walk each upslope peak back to the preceding local minimum
    let mut onsets: Vec<usize> = Vec::new();
    for &p in &peaks {
        let mut j = p;
        while j > 0 && x[j - 1] <= x[j] {
            j -= 1;
        }
        if onsets.last() != Some(&j) {
            onsets.push(j);
        }
    }
    onsets.dedup();

    if onsets.len() < MIN_BEATS {
        return Err(BeatsError::Quality(format!(
            "only {} beats detected, need at least {MIN_BEATS}",
            onsets.len()
        )));
    }
    Ok(onsets)
}

/// Slice inter-onset beats, gate on duration, and linearly resample each to
/// exactly `beat_len` samples. Returns the segments plus the number of
/// dropped (out-of-range) slices.
pub fn segment_and_resample(
    x: &[f64],
    onsets: &[usize],
    fs: f64,
    beat_len: usize,
) -> Result<(Vec<BeatSegment>, usize)> {
    if onsets.len() < 2 {
        return Err(BeatsError::Argument("need at least two onsets".into()));
    }
    if beat_len < 2 {
        return Err(BeatsError::Argument("beat length must be at least 2".into()));
    }
    let mut segments = Vec::new();
    let mut dropped = 0usize;
    for w in onsets.windows(2) {
        let (a, b) = (w[0], w[1]);
        let duration_s = (b - a) as f64 / fs;
        if !(MIN_BEAT_S..=MAX_BEAT_S).contains(&duration_s) || b > x.len() {
            dropped += 1;
            continue;
        }
        segments.push(BeatSegment {
            samples: resample_linear(&x[a..b], beat_len),
            source_onset_idx: a,
            duration_s,
        });
    }
    Ok((segments, dropped))
}

/// Endpoint-preserving linear resampling to `out_len` points.
pub fn resample_linear(x: &[f64], out_len: usize) -> Vec<f64> {
    let n = x.len();
    if n == out_len {
        return x.to_vec();
    }
    let step = (n - 1) as f64 / (out_len - 1) as f64;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let lo = pos.floor() as usize;
            if lo >= n - 1 {
                x[n - 1]
            } else {
                let frac = pos - lo as f64;
                x[lo] * (1.0 - frac) + x[lo + 1] * frac
            }
        })
        .collect()
}

/// Reject outlier beats (correlation < `corr_gate` against the median beat)
/// and average the survivors pointwise.
pub fn average_template(
    segments: &[BeatSegment],
    corr_gate: f64,
    min_beats: usize,
) -> Result<(BeatTemplate, SegmentStats)> {
    if segments.is_empty() {
        return Err(BeatsError::Quality("no segments to average".into()));
    }
    let len = segments[0].samples.len();
    if segments.iter().any(|s| s.samples.len() != len) {
        return Err(BeatsError::Argument("segments differ in length".into()));
    }

    // pointwise median beat as the robust reference
    let mut median = vec![0.0; len];
    let mut column = vec![0.0; segments.len()];
    for (i, m) in median.iter_mut().enumerate() {
        for (k, s) in segments.iter().enumerate() {
            column[k] = s.samples[i];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        *m = if column.len() % 2 == 1 {
            column[column.len() / 2]
        } else {
            0.5 * (column[column.len() / 2 - 1] + column[column.len() / 2])
        };
    }

    let mut retained: Vec<&BeatSegment> = segments
        .iter()
        .filter(|s| pearson(&s.samples, &median) >= corr_gate)
        .collect();
    if retained.len() < min_beats {
        return Err(BeatsError::Quality(format!(
            "{} beats survive the correlation gate, need at least {min_beats}",
            retained.len()
        )));
    }
    // canonical accumulation order: float sums must not depend on the order
    // the caller delivered the segments in
    retained.sort_by_key(|s| s.source_onset_idx);

    let mut samples = vec![0.0; len];
    for s in &retained {
        for (acc, v) in samples.iter_mut().zip(&s.samples) {
            *acc += v;
        }
    }
    let count = retained.len() as f64;
    for v in &mut samples {
        *v /= count;
    }

    let durations: Vec<f64> = retained.iter().map(|s| s.duration_s).collect();
    let (ibi_mean_s, ibi_std_s) = dsp::mean_std(&durations);
    let amps: Vec<f64> = retained
        .iter()
        .map(|s| {
            let max = s.samples.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let min = s.samples.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            max - min
        })
        .collect();
    let (_, amp_std) = dsp::mean_std(&amps);

    Ok((
        BeatTemplate {
            samples,
            n_beats_averaged: retained.len(),
            fs_equiv: len as f64 / ibi_mean_s,
        },
        SegmentStats {
            ibi_mean_s,
            ibi_std_s,
            amp_std,
        },
    ))
}

/// Pearson correlation coefficient; 0 for degenerate inputs.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_recording, BeatModel, Drift, Gaussian, Respiration};
    use rand::{Rng, SeedableRng};

    fn model(period: f64) -> BeatModel {
        BeatModel {
            systolic: Gaussian { amp: 1.0, center_s: 0.16 * period, width_s: 0.055 * period },
            reflected: Some(Gaussian {
                amp: 0.3,
                center_s: 0.42 * period,
                width_s: 0.075 * period,
            }),
            notch_depth: 0.15,
            beat_period_s: period,
            jitter_sigma_s: 0.0,
        }
    }

    fn meta() -> crate::io::SubjectMeta {
        crate::io::SubjectMeta {
            subject_id: "b".into(),
            age: 25.0,
            gender: crate::io::Gender::Male,
            height: 175.0,
            weight: 70.0,
            family_history_cvd: false,
            smoker: false,
            heart_rate: 75.0,
            spo2: 98.0,
        }
    }

    fn quiet() -> (Respiration, Drift) {
        (
            Respiration { rate_hz: 0.25, depth: 0.0 },
            Drift { rate_hz: 0.02, amp: 0.0 },
        )
    }

    #[test]
    fn onset_count_and_intervals_on_identical_beats() {
        let (resp, drift) = quiet();
        let (rec, truth) =
            gen_recording(&model(0.8), &meta(), 120.0, 400.0, resp, drift, 0.0, 3).unwrap();
        let onsets = detect_onsets(&rec.samples, rec.fs).unwrap();
        let expected = truth.onsets.len();
        assert!(
            onsets.len() >= expected - 1 && onsets.len() <= expected,
            "detected {} of {expected} beats",
            onsets.len()
        );
        for w in onsets.windows(2) {
            let interval = (w[1] - w[0]) as f64 / rec.fs;
            assert!((interval - 0.8).abs() <= 1.0 / rec.fs + 1e-9, "interval {interval}");
        }
    }

    #[test]
    fn constant_signal_has_no_beats() {
        assert!(matches!(
            detect_onsets(&vec![1.0; 4000], 400.0),
            Err(BeatsError::Quality(_))
        ));
    }

    #[test]
    fn pause_produces_no_spurious_onsets_and_long_gap_is_dropped() {
        let (resp, drift) = quiet();
        let (rec, truth) =
            gen_recording(&model(0.8), &meta(), 60.0, 400.0, resp, drift, 0.0, 3).unwrap();
        let fs = rec.fs;
        let mut x = rec.samples.clone();
        // silence a 3 s stretch starting at a beat boundary
        let pause_start = truth.onsets[30];
        let pause_len = (3.0 * fs) as usize;
        for v in &mut x[pause_start..pause_start + pause_len] {
            *v = 0.0;
        }
        let onsets = detect_onsets(&x, fs).unwrap();
        // every detected onset must sit near a true onset outside the pause
        for &o in &onsets {
            let near_true = truth
                .onsets
                .iter()
                .any(|&t| (o as i64 - t as i64).unsigned_abs() <= 8);
            let in_pause = o > pause_start + 8 && o < pause_start + pause_len;
            assert!(near_true, "onset {o} does not match any true onset");
            assert!(!in_pause, "onset {o} inside the silenced stretch");
        }
        // segmentation drops the pause-spanning slice
        let (segments, dropped) = segment_and_resample(&x, &onsets, fs, 400).unwrap();
        assert!(dropped >= 1, "the 3 s slice should be dropped");
        for s in &segments {
            assert!(s.duration_s <= 2.0);
        }
    }

    #[test]
    fn segment_counts_on_75_bpm_train() {
        let (resp, drift) = quiet();
        let (rec, _) = gen_recording(&model(0.8), &meta(), 120.0, 400.0, resp, drift, 0.0, 7).unwrap();
        let onsets = detect_onsets(&rec.samples, rec.fs).unwrap();
        let (segments, dropped) = segment_and_resample(&rec.samples, &onsets, rec.fs, 400).unwrap();
        assert_eq!(dropped, 0);
        assert!(
            (147..=150).contains(&segments.len()),
            "{} segments",
            segments.len()
        );
        for s in &segments {
            assert_eq!(s.samples.len(), 400);
        }
    }

    #[test]
    fn resample_identity_when_lengths_match() {
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.05).sin()).collect();
        let y = resample_linear(&x, 400);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn resample_preserves_extrema_within_one_percent() {
        let (wave, _) = crate::synth::gen_beat(&model(0.8), 333).unwrap();
        let y = resample_linear(&wave, 400);
        let max_x = wave.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let max_y = y.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let amp = max_x - wave.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        assert!((max_x - max_y).abs() <= 0.01 * amp);
    }

    #[test]
    fn too_short_slice_is_dropped() {
        let x = vec![0.0; 4000];
        let onsets = vec![0usize, 100, 500]; // 0.25 s then 1.0 s at 400 Hz
        let (segments, dropped) = segment_and_resample(&x, &onsets, 400.0, 400).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(segments.len(), 1);
    }

    #[test]
    fn averaging_identical_segments_returns_the_segment() {
        let (wave, _) = crate::synth::gen_beat(&model(0.8), 400).unwrap();
        let segments: Vec<BeatSegment> = (0..20)
            .map(|k| BeatSegment {
                samples: wave.clone(),
                source_onset_idx: k * 320,
                duration_s: 0.8,
            })
            .collect();
        let (template, stats) = average_template(&segments, 0.8, 10).unwrap();
        assert_eq!(template.n_beats_averaged, 20);
        for (a, b) in template.samples.iter().zip(&wave) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!((stats.ibi_mean_s - 0.8).abs() < 1e-12);
        assert!(stats.ibi_std_s.abs() < 1e-12);
        assert!((template.fs_equiv - 500.0).abs() < 1e-9);
    }

    #[test]
    fn averaging_reduces_noise_like_sqrt_n() {
        let (clean, _) = crate::synth::gen_beat(&model(0.8), 400).unwrap();
        let sigma = 0.1;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
        let segments: Vec<BeatSegment> = (0..100)
            .map(|k| BeatSegment {
                samples: clean
                    .iter()
                    .map(|&v| v + rand_distr::Distribution::sample(&normal, &mut rng))
                    .collect(),
                source_onset_idx: k * 320,
                duration_s: 0.8,
            })
            .collect();
        let (template, _) = average_template(&segments, 0.8, 10).unwrap();
        assert_eq!(template.n_beats_averaged, 100);
        let rmse = (template
            .samples
            .iter()
            .zip(&clean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 400.0)
            .sqrt();
        assert!(
            rmse <= 1.3 * sigma / 100f64.sqrt(),
            "rmse {rmse} vs bound {}",
            1.3 * sigma / 10.0
        );
        // variance reduction within a factor 1.5 of sigma^2 / n
        let var = rmse * rmse;
        assert!(var <= 1.5 * sigma * sigma / 100.0);
    }

    #[test]
    fn inverted_beats_are_rejected_by_the_correlation_gate() {
        let (clean, _) = crate::synth::gen_beat(&model(0.8), 400).unwrap();
        let mut segments: Vec<BeatSegment> = (0..95)
            .map(|k| BeatSegment {
                samples: clean.clone(),
                source_onset_idx: k * 320,
                duration_s: 0.8,
            })
            .collect();
        for k in 0..5 {
            segments.push(BeatSegment {
                samples: clean.iter().map(|v| -v).collect(),
                source_onset_idx: (95 + k) * 320,
                duration_s: 0.8,
            });
        }
        let (template, _) = average_template(&segments, 0.8, 10).unwrap();
        assert_eq!(template.n_beats_averaged, 95);
    }

    #[test]
    fn template_is_invariant_to_segment_order() {
        let (clean, _) = crate::synth::gen_beat(&model(0.8), 400).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 0.05).unwrap();
        let mut segments: Vec<BeatSegment> = (0..40)
            .map(|k| BeatSegment {
                samples: clean
                    .iter()
                    .map(|&v| v + rand_distr::Distribution::sample(&normal, &mut rng))
                    .collect(),
                source_onset_idx: k * 320,
                duration_s: 0.78 + 0.001 * k as f64,
            })
            .collect();
        let (t1, s1) = average_template(&segments, 0.8, 10).unwrap();
        // shuffle
        for i in (1..segments.len()).rev() {
            let j = rng.gen_range(0..=i);
            segments.swap(i, j);
        }
        let (t2, s2) = average_template(&segments, 0.8, 10).unwrap();
        assert_eq!(t1.samples, t2.samples);
        assert_eq!(t1.n_beats_averaged, t2.n_beats_averaged);
        assert_eq!(s1, s2);
    }

    #[test]
    fn fewer_than_min_beats_is_a_quality_error() {
        let (clean, _) = crate::synth::gen_beat(&model(0.8), 400).unwrap();
        let segments: Vec<BeatSegment> = (0..5)
            .map(|k| BeatSegment {
                samples: clean.clone(),
                source_onset_idx: k * 320,
                duration_s: 0.8,
            })
            .collect();
        assert!(matches!(
            average_template(&segments, 0.8, 10),
            Err(BeatsError::Quality(_))
        ));
    }
}
