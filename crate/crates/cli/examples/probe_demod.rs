//! Stage-by-stage beat-peak CV through the preprocessing chain.
use ppgmorph_core::dsp;
use ppgmorph_core::io::{Gender, SubjectMeta};
use ppgmorph_core::synth::*;

fn main() {
    let fs = 400.0;
    let model = BeatModel {
        systolic: Gaussian { amp: 1.0, center_s: 0.128, width_s: 0.044 },
        reflected: Some(Gaussian { amp: 0.3, center_s: 0.336, width_s: 0.06 }),
        notch_depth: 0.22,
        beat_period_s: 0.8,
        jitter_sigma_s: 0.016,
    };
    let meta = SubjectMeta {
        subject_id: "p".into(), age: 30.0, gender: Gender::Female, height: 165.0,
        weight: 60.0, family_history_cvd: false, smoker: false, heart_rate: 75.0, spo2: 98.0,
    };
    let (rec, truth) = gen_recording(
        &model, &meta, 60.0, fs,
        Respiration { rate_hz: 0.25, depth: 0.3 },
        Drift { rate_hz: 0.02, amp: 0.4 },
        0.0, 11,
    ).unwrap();

    let spec = dsp::FilterSpec { order: 4, stopband_hz: 10.0, atten_db: 40.0, fs };
    let coeffs = dsp::design_cheby2_lowpass(&spec).unwrap();
    let filtered = dsp::filter_zero_phase(&rec.samples, &coeffs).unwrap();
    let ma = dsp::moving_average(&filtered, 5).unwrap();
    let det = dsp::detrend_cma(&ma, (4.0 * fs) as usize | 1).unwrap();
    let dem = dsp::demodulate(&det, (1.0 * fs) as usize | 1).unwrap();

    let (_, bt) = gen_beat(&model, 400).unwrap();
    let peak_cv = |x: &[f64], name: &str| {
        let mut peaks = Vec::new();
        for (k, &onset) in truth.onsets.iter().enumerate() {
            let scale = truth.beat_periods_s[k] / model.beat_period_s;
            let idx = onset + (bt.systolic.t * scale * fs).round() as usize;
            if idx > 2400 && idx + 2400 < x.len() {
                let lo = idx - 8;
                let hi = idx + 8;
                peaks.push(x[lo..hi].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)));
            }
        }
        let (mean, std) = dsp::mean_std(&peaks);
        println!("{name:10} n={} mean={mean:+.4} std={std:.4} cv={:.4}", peaks.len(), std / mean.abs());
        peaks
    };
    peak_cv(&rec.samples, "raw");
    peak_cv(&filtered, "filtered");
    peak_cv(&ma, "ma");
    peak_cv(&det, "detrended");
    let p = peak_cv(&dem, "demod");
    // where are the outliers?
    let (mean, _) = dsp::mean_std(&p);
    for (i, v) in p.iter().enumerate() {
        if (v - mean).abs() > 0.08 * mean.abs() {
            println!("  outlier beat {i}: {v:.4} vs mean {mean:.4}");
        }
    }
}
