//! The 60-entry feature catalog, per-subject extraction, Pearson ranking and
//! Gaussian augmentation.
//!
//! The catalog is normative: 53 waveform features (indices 0..=52) plus 7
//! demographics (53..=59), in the order of [`CATALOG`]. Changing names or
//! order is a breaking change for every stored feature matrix —
//! `features.toml` at the crate root documents the mapping and must stay in
//! sync (enforced by a test).
//!
//! Absent-fiducial substitution rule: features whose defining point was not
//! detected are value-substituted, never NaN — amplitude/value/ratio-like
//! entries drop to `0.0`, time-like entries saturate to the beat duration.
//! The subject's age is the label and is never a feature.

use crate::beats::{BeatTemplate, SegmentStats};
use crate::fiducials::{DerivativeStack, FiducialSet, Point};
use crate::io::{Dataset, DatasetRow, Gender, SubjectMeta};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeaturesError {
    #[error("feature extraction failed: {0}")]
    Feature(String),
    #[error("ranking failed: {0}")]
    Rank(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, FeaturesError>;

/// Canonical feature names, catalog order.
pub const CATALOG: [&str; 60] = [
    "beat_duration_s",
    "amp_sys",
    "amp_notch",
    "amp_dia",
    "ratio_notch_sys",
    "ratio_dia_sys",
    "t_sys",
    "t_notch",
    "t_dia",
    "dt_notch_sys",
    "dt_dia_sys",
    "dt_dia_notch",
    "crest_time_frac",
    "width_sys_25",
    "width_sys_50",
    "width_sys_75",
    "width_dia_25",
    "width_dia_50",
    "width_dia_75",
    "width_ratio_25",
    "width_ratio_50",
    "width_ratio_75",
    "area_pulse",
    "area_sys",
    "area_dia",
    "area_ipa_ratio",
    "vpg_u_val",
    "vpg_u_time",
    "vpg_v_val",
    "vpg_v_time",
    "vpg_w_val",
    "vpg_w_time",
    "vpg_u_over_v",
    "apg_a_val",
    "apg_b_val",
    "apg_c_val",
    "apg_d_val",
    "apg_e_val",
    "apg_b_over_a",
    "apg_c_over_a",
    "apg_d_over_a",
    "apg_e_over_a",
    "aging_index",
    "apg_a_time",
    "apg_b_time",
    "apg_c_time",
    "apg_d_time",
    "apg_e_time",
    "jpg_max_val",
    "spg_max_val",
    "ibi_mean_s",
    "ibi_std_s",
    "beat_amp_std",
    "gender",
    "height",
    "weight",
    "family_history_cvd",
    "smoker",
    "heart_rate",
    "spo2",
];

/// Number of waveform-derived features; the rest are demographics.
pub const N_SIGNAL_FEATURES: usize = 53;

/// Integer-coded demographic columns that Gaussian augmentation must not
/// perturb.
pub const CATEGORICAL_FEATURES: [&str; 3] = ["gender", "family_history_cvd", "smoker"];

pub fn catalog_names() -> Vec<String> {
    CATALOG.iter().map(|s| s.to_string()).collect()
}

/// One subject's feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub subject_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        CATALOG.iter().position(|&n| n == name).map(|i| self.values[i])
    }
}

/// Extract all 60 catalog entries for one subject.
pub fn extract_features(
    template: &BeatTemplate,
    stack: &DerivativeStack,
    fids: &FiducialSet,
    stats: &SegmentStats,
    meta: &SubjectMeta,
) -> Result<FeatureVector> {
    let len = template.samples.len();
    let fs = template.fs_equiv;
    let duration = template.duration_s();
    let ppg = &stack.ppg;

    let o = fids.o;
    let s = fids.s;
    let amp_sys = s.val - o.val;
    if !(amp_sys > 0.0) {
        return Err(FeaturesError::Feature(format!(
            "degenerate beat: systolic amplitude {amp_sys}"
        )));
    }

    // seconds from onset for a detected point; beat duration when absent
    let time_of = |p: &Point| (p.idx as f64 - o.idx as f64) / fs;
    let opt_time = |p: &Option<Point>| p.as_ref().map(|p| time_of(p)).unwrap_or(duration);
    let opt_amp = |p: &Option<Point>| p.as_ref().map(|p| p.val - o.val).unwrap_or(0.0);
    let opt_val = |p: &Option<Point>| p.as_ref().map(|p| p.val).unwrap_or(0.0);

    let amp_notch = opt_amp(&fids.n);
    let amp_dia = opt_amp(&fids.d);
    let t_sys = time_of(&s);
    let t_notch = opt_time(&fids.n);
    let t_dia = opt_time(&fids.d);

    // pulse widths at fractional systolic height
    let level = |frac: f64| o.val + frac * amp_sys;
    let rising_cross = |lvl: f64| -> f64 {
        let mut cross = o.idx as f64;
        for i in o.idx..s.idx {
            if ppg[i] <= lvl && ppg[i + 1] > lvl {
                let frac = (lvl - ppg[i]) / (ppg[i + 1] - ppg[i]);
                cross = i as f64 + frac;
            }
        }
        cross
    };
    let falling_cross = |lvl: f64| -> f64 {
        for i in s.idx..len - 1 {
            if ppg[i] >= lvl && ppg[i + 1] < lvl {
                let frac = (ppg[i] - lvl) / (ppg[i] - ppg[i + 1]);
                return i as f64 + frac;
            }
        }
        (len - 1) as f64
    };
    let width_pair = |frac: f64| -> (f64, f64) {
        let lvl = level(frac);
        let sys_w = (s.idx as f64 - rising_cross(lvl)) / fs;
        let dia_w = (falling_cross(lvl) - s.idx as f64) / fs;
        (sys_w, dia_w)
    };
    let (ws25, wd25) = width_pair(0.25);
    let (ws50, wd50) = width_pair(0.50);
    let (ws75, wd75) = width_pair(0.75);
    let ratio = |num: f64, den: f64| if den != 0.0 { num / den } else { 0.0 };

    // areas above the onset level, in value-seconds
    let dt = 1.0 / fs;
    let area = |from: usize, to: usize| -> f64 {
        ppg[from..to].iter().map(|v| (v - o.val) * dt).sum::<f64>()
    };
    let area_pulse = area(o.idx, len);
    let (area_sys, area_dia) = match &fids.n {
        Some(nt) => (area(o.idx, nt.idx), area(nt.idx, len)),
        None => (0.0, 0.0),
    };

    let u = fids.u;
    let v = fids.v;
    let a = fids.a;
    let b = fids.b;
    let over_a = |p: &Option<Point>| match p {
        Some(p) if a.val != 0.0 => p.val / a.val,
        _ => 0.0,
    };
    let aging_index = match (&fids.c, &fids.d_wave, &fids.e) {
        (Some(c), Some(d), Some(e)) if a.val != 0.0 => (b.val - c.val - d.val - e.val) / a.val,
        _ => 0.0,
    };

    let max_of = |wf: &[f64]| wf.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));

    let values = vec![
        duration,
        amp_sys,
        amp_notch,
        amp_dia,
        ratio(amp_notch, amp_sys),
        ratio(amp_dia, amp_sys),
        t_sys,
        t_notch,
        t_dia,
        t_notch - t_sys,
        t_dia - t_sys,
        t_dia - t_notch,
        t_sys / duration,
        ws25,
        ws50,
        ws75,
        wd25,
        wd50,
        wd75,
        ratio(wd25, ws25),
        ratio(wd50, ws50),
        ratio(wd75, ws75),
        area_pulse,
        area_sys,
        area_dia,
        ratio(area_dia, area_sys),
        u.val,
        time_of(&u),
        v.val,
        time_of(&v),
        opt_val(&fids.w),
        opt_time(&fids.w),
        if v.val != 0.0 { u.val / v.val.abs() } else { 0.0 },
        a.val,
        b.val,
        opt_val(&fids.c),
        opt_val(&fids.d_wave),
        opt_val(&fids.e),
        ratio(b.val, a.val),
        over_a(&fids.c),
        over_a(&fids.d_wave),
        over_a(&fids.e),
        aging_index,
        time_of(&a),
        time_of(&b),
        opt_time(&fids.c),
        opt_time(&fids.d_wave),
        opt_time(&fids.e),
        max_of(&stack.jpg),
        max_of(&stack.spg),
        stats.ibi_mean_s,
        stats.ibi_std_s,
        stats.amp_std,
        if meta.gender == Gender::Male { 1.0 } else { 0.0 },
        meta.height,
        meta.weight,
        if meta.family_history_cvd { 1.0 } else { 0.0 },
        if meta.smoker { 1.0 } else { 0.0 },
        meta.heart_rate,
        meta.spo2,
    ];
    debug_assert_eq!(values.len(), CATALOG.len());
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(FeaturesError::Feature(format!(
            "non-finite feature {} = {}",
            CATALOG[bad], values[bad]
        )));
    }
    Ok(FeatureVector {
        subject_id: meta.subject_id.clone(),
        values,
    })
}

/// Ranking result: the kept names in descending-|r| order plus the scores of
/// every original feature.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeatureSet {
    pub kept_names: Vec<String>,
    pub kept_indices: Vec<usize>,
    /// |Pearson r| per original feature, catalog order.
    pub scores: Vec<f64>,
}

/// Rank features by |Pearson r| against the age label and keep the top `k`.
/// Constant features score 0; ties break toward the lower catalog index.
pub fn pearson_rank(ds: &Dataset, k: usize) -> Result<RankedFeatureSet> {
    if ds.n() < 3 {
        return Err(FeaturesError::Rank(format!(
            "need at least 3 rows, got {}",
            ds.n()
        )));
    }
    let labels: Vec<f64> = ds.rows.iter().map(|r| r.label).collect();
    let (label_mean, label_std) = crate::dsp::mean_std(&labels);
    if label_std == 0.0 {
        return Err(FeaturesError::Rank("labels are constant".into()));
    }
    let n = ds.n() as f64;
    let n_feat = ds.feature_names.len();
    let mut scores = Vec::with_capacity(n_feat);
    for j in 0..n_feat {
        let col = ds.column(j);
        let (mean, std) = crate::dsp::mean_std(&col);
        if std == 0.0 {
            scores.push(0.0);
            continue;
        }
        let cov = col
            .iter()
            .zip(&labels)
            .map(|(x, y)| (x - mean) * (y - label_mean))
            .sum::<f64>()
            / n;
        scores.push((cov / (std * label_std)).abs());
    }

    let mut order: Vec<usize> = (0..n_feat).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let kept_indices: Vec<usize> = order.into_iter().take(k.min(n_feat)).collect();
    let kept_names = kept_indices
        .iter()
        .map(|&i| ds.feature_names[i].clone())
        .collect();
    Ok(RankedFeatureSet {
        kept_names,
        kept_indices,
        scores,
    })
}

/// Gaussian noise augmentation: the originals plus `factor - 1` noisy copies
/// of each row. Noise is `N(0, (sigma_frac * per-feature std)^2)`; labels and
/// integer-coded categorical columns pass through untouched.
pub fn augment_gaussian(ds: &Dataset, factor: usize, sigma_frac: f64, seed: u64) -> Result<Dataset> {
    if factor < 1 {
        return Err(FeaturesError::Argument("factor must be at least 1".into()));
    }
    if ds.n() == 0 {
        return Err(FeaturesError::Argument("dataset is empty".into()));
    }
    let n_feat = ds.feature_names.len();
    let sigmas: Vec<f64> = (0..n_feat)
        .map(|j| {
            let (_, std) = crate::dsp::mean_std(&ds.column(j));
            sigma_frac * std
        })
        .collect();
    let frozen: Vec<bool> = ds
        .feature_names
        .iter()
        .map(|n| CATEGORICAL_FEATURES.contains(&n.as_str()))
        .collect();

    let mut out = Dataset::new(ds.feature_names.clone());
    out.rows.extend(ds.rows.iter().cloned());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for _copy in 1..factor {
        for row in &ds.rows {
            let values = row
                .values
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    if frozen[j] || sigmas[j] == 0.0 {
                        v
                    } else {
                        v + sigmas[j] * unit.sample(&mut rng)
                    }
                })
                .collect();
            out.rows.push(DatasetRow {
                subject_id: row.subject_id.clone(),
                values,
                label: row.label,
            });
        }
    }
    Ok(out)
}
