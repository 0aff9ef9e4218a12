//! Per-subject processing stages and the on-disk formats the stage
//! subcommands exchange.

use crate::config::PipelineConfig;
use anyhow::{Context, Result};
use ppgmorph_core::beats::{self, BeatTemplate, SegmentStats};
use ppgmorph_core::dsp;
use ppgmorph_core::features::{self, FeatureVector};
use ppgmorph_core::fiducials::{self, DerivativeStack, FiducialSet};
use ppgmorph_core::io::{RawRecording, SubjectMeta};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn odd_window(seconds: f64, fs: f64) -> usize {
    let w = (seconds * fs).round() as usize;
    w | 1
}

/// Full preprocessing chain: Chebyshev-II denoise (zero phase), moving
/// average, CMA detrend, envelope demodulation, z-score.
pub fn preprocess(rec: &RawRecording, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let spec = dsp::FilterSpec {
        order: cfg.filter.order,
        stopband_hz: cfg.filter.stopband_hz,
        atten_db: cfg.filter.atten_db,
        fs: rec.fs,
    };
    let coeffs = dsp::design_cheby2_lowpass(&spec).context("filter design")?;
    let denoised = dsp::filter_zero_phase(&rec.samples, &coeffs).context("zero-phase filter")?;
    let smoothed = dsp::moving_average(&denoised, cfg.ma.window).context("moving average")?;
    let detrended =
        dsp::detrend_cma(&smoothed, odd_window(cfg.detrend.window_s, rec.fs)).context("detrend")?;
    let demodulated = dsp::demodulate(&detrended, odd_window(cfg.envelope.window_s, rec.fs))
        .context("demodulation")?;
    let normalized = dsp::zscore(&demodulated).context("z-score")?;
    Ok(normalized)
}

/// Everything one subject contributes downstream of preprocessing.
#[derive(Debug, Clone)]
pub struct SubjectOutput {
    pub template: BeatTemplate,
    pub stats: SegmentStats,
    pub stack: DerivativeStack,
    pub fiducials: FiducialSet,
    pub features: FeatureVector,
    pub dropped_beats: usize,
}

/// Run one subject end to end: preprocess, segment, average, detect, extract.
pub fn process_subject(rec: &RawRecording, cfg: &PipelineConfig) -> Result<SubjectOutput> {
    let x = preprocess(rec, cfg)?;
    let onsets = beats::detect_onsets(&x, rec.fs).context("onset detection")?;
    let (segments, dropped_beats) =
        beats::segment_and_resample(&x, &onsets, rec.fs, cfg.beats.beat_len)
            .context("segmentation")?;
    let (template, stats) =
        beats::average_template(&segments, cfg.beats.corr_gate, cfg.beats.min_beats)
            .context("template averaging")?;
    let stack = fiducials::derivatives(&template);
    let fids = fiducials::detect_fiducials(&stack).context("fiducial detection")?;
    let fv = features::extract_features(&template, &stack, &fids, &stats, &rec.meta)
        .context("feature extraction")?;
    Ok(SubjectOutput {
        template,
        stats,
        stack,
        fiducials: fids,
        features: fv,
        dropped_beats,
    })
}

/// Sidecar stored next to a `<id>.template.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateSidecar {
    pub meta: SubjectMeta,
    pub n_beats_averaged: usize,
    pub fs_equiv: f64,
    pub ibi_mean_s: f64,
    pub ibi_std_s: f64,
    pub amp_std: f64,
    pub dropped_beats: usize,
}

/// Write `<stem>.template.csv` (one sample per line) + `<stem>.template.json`.
pub fn save_template(
    out: &SubjectOutput,
    meta: &SubjectMeta,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    let mut body = String::new();
    for v in &out.template.samples {
        body.push_str(&ppgmorph_core::io::fmt_f64(*v));
        body.push('\n');
    }
    std::fs::write(dir.join(format!("{stem}.template.csv")), body)?;
    let sidecar = TemplateSidecar {
        meta: meta.clone(),
        n_beats_averaged: out.template.n_beats_averaged,
        fs_equiv: out.template.fs_equiv,
        ibi_mean_s: out.stats.ibi_mean_s,
        ibi_std_s: out.stats.ibi_std_s,
        amp_std: out.stats.amp_std,
        dropped_beats: out.dropped_beats,
    };
    std::fs::write(
        dir.join(format!("{stem}.template.json")),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

/// Load a template + sidecar pair written by [`save_template`].
pub fn load_template(csv_path: &Path) -> Result<(BeatTemplate, SegmentStats, SubjectMeta, usize)> {
    let text = std::fs::read_to_string(csv_path)?;
    let samples: Vec<f64> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("bad template sample {l:?} in {}", csv_path.display()))
        })
        .collect::<Result<_>>()?;
    let sidecar_path = csv_path.with_extension("json");
    let sidecar: TemplateSidecar =
        serde_json::from_str(&std::fs::read_to_string(&sidecar_path).with_context(|| {
            format!("template sidecar missing: {}", sidecar_path.display())
        })?)?;
    let template = BeatTemplate {
        samples,
        n_beats_averaged: sidecar.n_beats_averaged,
        fs_equiv: sidecar.fs_equiv,
    };
    let stats = SegmentStats {
        ibi_mean_s: sidecar.ibi_mean_s,
        ibi_std_s: sidecar.ibi_std_s,
        amp_std: sidecar.amp_std,
    };
    Ok((template, stats, sidecar.meta, sidecar.dropped_beats))
}

/// JSON payload of the `fiducials` subcommand.
pub fn fiducials_json(fids: &FiducialSet) -> serde_json::Value {
    let point = |p: &ppgmorph_core::fiducials::Point| {
        serde_json::json!({ "idx": p.idx, "val": p.val })
    };
    let opt = |p: &Option<ppgmorph_core::fiducials::Point>| match p {
        Some(p) => point(p),
        None => serde_json::Value::Null,
    };
    let flags: serde_json::Map<String, serde_json::Value> = fids
        .flags()
        .into_iter()
        .map(|(name, present)| (name.to_string(), serde_json::Value::Bool(present)))
        .collect();
    serde_json::json!({
        "O": point(&fids.o),
        "S": point(&fids.s),
        "N": opt(&fids.n),
        "D": opt(&fids.d),
        "u": point(&fids.u),
        "v": point(&fids.v),
        "w": opt(&fids.w),
        "a": point(&fids.a),
        "b": point(&fids.b),
        "c": opt(&fids.c),
        "d_wave": opt(&fids.d_wave),
        "e": opt(&fids.e),
        "flags": flags,
    })
}
