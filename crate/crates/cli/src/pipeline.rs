//! End-to-end pipeline: acquire (synthetic or files) -> preprocess -> beats
//! -> fiducials -> features -> rank -> augment -> split -> train -> evaluate,
//! then emit the report artifacts and the run manifest.
//!
//! Every piece of randomness derives from the single manifest seed, stage
//! boundaries are timed, and `metrics.json` is byte-stable across reruns of
//! the same manifest inputs.

use crate::config::{PipelineConfig, StageSeed};
use crate::plot::{self, Curve};
use crate::stages::{self, SubjectOutput};
use anyhow::{bail, Context, Result};
use ppgmorph_core::features;
use ppgmorph_core::io::{self, Dataset, DatasetRow, RawRecording};
use ppgmorph_core::learn::{
    self, History, LearnData, Metrics, ModelConfig, ModelKind, Task, TrainedModel,
};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Per-model result of one task.
#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub model: String,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub mae: Option<f64>,
    pub confusion: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub models: Vec<ModelReport>,
}

/// Contents of `metrics.json`. Field and task order are fixed so identical
/// runs serialize to identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub n_subjects: usize,
    pub n_rows_augmented: usize,
    pub tasks: Vec<TaskReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub input: String,
    pub config: PipelineConfig,
    pub subjects_processed: usize,
    pub subjects_skipped: Vec<String>,
    pub kept_features: Vec<String>,
    pub stage_timings_ms: Vec<(String, u128)>,
    pub metrics_summary: Vec<(String, String, String, f64)>,
    pub artifacts: Vec<String>,
    pub complete: bool,
}

pub struct PipelineOutcome {
    pub metrics: MetricsReport,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

struct TaskRun {
    task: Task,
    models: Vec<(ModelKind, TrainedModel, History, Metrics)>,
    /// (true age, prediction) pairs on the test fold, regression only.
    scatter: Vec<(String, Vec<(f64, f64)>)>,
}

fn model_config(cfg: &PipelineConfig, kind: ModelKind, task: Task, input_dim: usize) -> ModelConfig {
    let (lr, seed_slot) = match kind {
        ModelKind::Ffnn => (cfg.train.lr_ffnn, StageSeed::ModelFfnn),
        ModelKind::Cnn => (cfg.train.lr_cnn, StageSeed::ModelCnn),
        ModelKind::Logistic => (cfg.train.lr_linear, StageSeed::ModelLogistic),
        ModelKind::Linear => (cfg.train.lr_linear, StageSeed::ModelLinear),
    };
    ModelConfig {
        kind,
        task,
        input_dim,
        learning_rate: lr,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        l1: cfg.train.l1,
        l2: cfg.train.l2,
        dropout_rate: cfg.train.dropout,
        seed: cfg.seed_for(seed_slot),
    }
}

/// Load every `<stem>.csv` + `<stem>.json` recording pair under `dir`.
pub fn load_recordings(dir: &Path) -> Result<Vec<RawRecording>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && !p
                    .file_name()
                    .is_some_and(|n| n.to_string_lossy().ends_with(".template.csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no recording CSVs in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| io::load_recording(p).with_context(|| p.display().to_string()))
        .collect()
}

/// Run the configured worker pool over the subjects.
fn process_all(
    recordings: &[RawRecording],
    cfg: &PipelineConfig,
) -> (Vec<(usize, SubjectOutput)>, Vec<String>) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .expect("worker pool");
    let results: Vec<(usize, Result<SubjectOutput>)> = pool.install(|| {
        use rayon::prelude::*;
        recordings
            .par_iter()
            .enumerate()
            .map(|(i, rec)| (i, stages::process_subject(rec, cfg)))
            .collect()
    });
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (i, res) in results {
        match res {
            Ok(out) => ok.push((i, out)),
            Err(e) => {
                log::warn!("subject {} skipped: {e:#}", recordings[i].meta.subject_id);
                skipped.push(format!("{}: {e:#}", recordings[i].meta.subject_id));
            }
        }
    }
    ok.sort_by_key(|(i, _)| *i);
    (ok, skipped)
}

/// Assemble the 60-feature dataset from the processed subjects.
fn assemble_dataset(outputs: &[(usize, SubjectOutput)], recordings: &[RawRecording]) -> Dataset {
    let mut ds = Dataset::new(features::catalog_names());
    for (i, out) in outputs {
        ds.rows.push(DatasetRow {
            subject_id: out.features.subject_id.clone(),
            values: out.features.values.clone(),
            label: recordings[*i].meta.age,
        });
    }
    ds
}

fn run_task(cfg: &PipelineConfig, ds: &Dataset, task: Task) -> Result<TaskRun> {
    let ratios = (cfg.split.train, cfg.split.val, cfg.split.test);
    // group-aware stratified split; regression stratifies on the three-class
    // bins so every fold covers the age range
    let stratify = match task {
        Task::Regression => Some(Task::ThreeClass),
        t => Some(t),
    };
    let (train_ds, val_ds, test_ds) = learn::split(ds, ratios, cfg.seed_for(StageSeed::Split), stratify)
        .context("split")?;
    let train_data = LearnData::from_dataset(&train_ds, task)?;
    let val_data = LearnData::from_dataset(&val_ds, task)?;
    let test_data = LearnData::from_dataset(&test_ds, task)?;

    let kinds: &[ModelKind] = match task {
        Task::Regression => &[ModelKind::Linear, ModelKind::Ffnn, ModelKind::Cnn],
        _ => &[ModelKind::Logistic, ModelKind::Ffnn, ModelKind::Cnn],
    };

    let mut models = Vec::new();
    let mut scatter = Vec::new();
    for &kind in kinds {
        let mcfg = model_config(cfg, kind, task, ds.feature_names.len());
        let (mut model, history) = learn::train(&mcfg, &train_data, &val_data)
            .with_context(|| format!("training {}", kind.name()))?;
        let metrics = learn::evaluate(&mut model, &test_data)
            .with_context(|| format!("evaluating {}", kind.name()))?;
        if task == Task::Regression {
            let preds = model.predict_values(&test_data.x);
            if let learn::Labels::Values(truth) = &test_data.labels {
                scatter.push((
                    kind.name().to_string(),
                    truth.iter().copied().zip(preds).collect(),
                ));
            }
        }
        models.push((kind, model, history, metrics));
    }
    Ok(TaskRun {
        task,
        models,
        scatter,
    })
}

fn write_confusion_csv(runs: &[TaskRun], path: &Path) -> Result<()> {
    let max_c = runs
        .iter()
        .filter(|r| r.task != Task::Regression)
        .map(|r| r.task.class_count())
        .max()
        .unwrap_or(0);
    if max_c == 0 {
        return Ok(());
    }
    let mut out = String::from("task,model,actual");
    for c in 0..max_c {
        out.push_str(&format!(",pred_{c}"));
    }
    out.push('\n');
    for run in runs.iter().filter(|r| r.task != Task::Regression) {
        for (kind, _, _, metrics) in &run.models {
            let confusion = metrics.confusion.as_ref().expect("classification metrics");
            for (actual, row) in confusion.iter().enumerate() {
                out.push_str(&format!("{},{},{actual}", run.task.name(), kind.name()));
                for c in 0..max_c {
                    match row.get(c) {
                        Some(v) => out.push_str(&format!(",{v:.4}")),
                        None => out.push(','),
                    }
                }
                out.push('\n');
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_auc_table_csv(runs: &[TaskRun], path: &Path) -> Result<()> {
    let mut out = String::from("task,model,auc,accuracy,mae\n");
    for run in runs {
        for (kind, _, _, metrics) in &run.models {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                run.task.name(),
                kind.name(),
                metrics.auc.map_or(String::new(), |v| format!("{v:.4}")),
                metrics.accuracy.map_or(String::new(), |v| format!("{v:.4}")),
                metrics.mae.map_or(String::new(), |v| format!("{v:.4}")),
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_loss_curves_csv(runs: &[TaskRun], path: &Path) -> Result<()> {
    let mut out = String::from("task,model,epoch,train_loss,val_loss,val_accuracy,val_auc\n");
    for run in runs {
        for (kind, _, history, _) in &run.models {
            for e in 0..history.train_loss.len() {
                let acc = history
                    .val_accuracy
                    .get(e)
                    .map_or(String::new(), |v| format!("{v:.6}"));
                let auc = history
                    .val_auc
                    .get(e)
                    .map_or(String::new(), |v| format!("{v:.6}"));
                out.push_str(&format!(
                    "{},{},{e},{:.8},{:.8},{acc},{auc}\n",
                    run.task.name(),
                    kind.name(),
                    history.train_loss[e],
                    history.val_loss[e],
                ));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_scatter(runs: &[TaskRun], csv_path: &Path, svg_path: &Path) -> Result<bool> {
    let Some(run) = runs.iter().find(|r| r.task == Task::Regression) else {
        return Ok(false);
    };
    let mut out = String::from("model,true_age,predicted_age\n");
    for (model, pairs) in &run.scatter {
        for (t, p) in pairs {
            out.push_str(&format!("{model},{t:.6},{p:.6}\n"));
        }
    }
    std::fs::write(csv_path, out)?;

    // the FFNN panel mirrors the headline figure
    if let Some((_, pairs)) = run.scatter.iter().find(|(m, _)| m == "ffnn") {
        let mae = run
            .models
            .iter()
            .find(|(k, ..)| *k == ModelKind::Ffnn)
            .and_then(|(_, _, _, m)| m.mae)
            .unwrap_or(f64::NAN);
        std::fs::write(
            svg_path,
            plot::scatter_svg("FFNN biological-age regression", pairs, mae),
        )?;
    }
    Ok(true)
}

fn write_loss_svg(runs: &[TaskRun], path: &Path) -> Result<()> {
    let palette = ["#1763a6", "#c22", "#2a9d5c", "#b07d1e", "#7b4fa6", "#444"];
    let mut curves = Vec::new();
    let mut k = 0;
    for run in runs {
        for (kind, _, history, _) in &run.models {
            if *kind == ModelKind::Logistic || *kind == ModelKind::Linear {
                continue;
            }
            curves.push(Curve {
                label: format!("{} {} train", run.task.name(), kind.name()),
                values: history.train_loss.clone(),
                color: palette[k % palette.len()].to_string(),
            });
            k += 1;
            curves.push(Curve {
                label: format!("{} {} val", run.task.name(), kind.name()),
                values: history.val_loss.clone(),
                color: palette[k % palette.len()].to_string(),
            });
            k += 1;
        }
    }
    std::fs::write(path, plot::curves_svg("training progression", "loss", &curves))?;
    Ok(())
}

fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    format!("{:x}", hasher.finalize())
}

/// Run the full pipeline. `input`: a recordings directory, or `None` for the
/// configured synthetic cohort.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    input: Option<&Path>,
    out_dir: &Path,
    tasks: &[Task],
) -> Result<PipelineOutcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut timings: Vec<(String, u128)> = Vec::new();
    let mut timer = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, u128)>| {
        timings.push((name.to_string(), timer.elapsed().as_millis()));
        timer = Instant::now();
    };

    // acquire
    let (recordings, provenance) = match input {
        Some(dir) => (
            load_recordings(dir).context("stage acquire")?,
            format!("files:{}", dir.display()),
        ),
        None => {
            let mut spec = cfg.cohort.clone();
            spec.seed = cfg.seed_for(StageSeed::Cohort);
            let cohort = ppgmorph_core::synth::gen_cohort(&spec).context("stage acquire")?;
            let recs = cohort.into_iter().map(|s| s.recording).collect();
            (recs, format!("synthetic:n={}", spec.n_subjects))
        }
    };
    lap("acquire", &mut timings);

    // preprocess + beats + fiducials + features per subject
    let (outputs, skipped) = process_all(&recordings, cfg);
    if outputs.len() < 20 {
        bail!(
            "stage preprocess: only {} of {} subjects usable",
            outputs.len(),
            recordings.len()
        );
    }
    lap("process_subjects", &mut timings);

    let ds60 = assemble_dataset(&outputs, &recordings);
    io::save_feature_matrix(&ds60, &out_dir.join("features_full.csv"))
        .context("stage extract")?;
    lap("extract", &mut timings);

    // rank on the un-augmented dataset, then reduce
    let ranked = features::pearson_rank(&ds60, cfg.features.rank_k).context("stage rank")?;
    let reduced = ds60
        .select(&ranked.kept_names)
        .map_err(|e| anyhow::anyhow!("stage rank: {e}"))?;
    io::save_feature_matrix(&reduced, &out_dir.join("features_ranked.csv"))
        .context("stage rank")?;
    lap("rank", &mut timings);

    let augmented = features::augment_gaussian(
        &reduced,
        cfg.features.augment_factor,
        cfg.features.augment_sigma,
        cfg.seed_for(StageSeed::Augment),
    )
    .context("stage augment")?;
    io::save_feature_matrix(&augmented, &out_dir.join("features_augmented.csv"))
        .context("stage augment")?;
    lap("augment", &mut timings);

    // train + evaluate per task
    let mut runs = Vec::new();
    for &task in tasks {
        runs.push(
            run_task(cfg, &augmented, task)
                .with_context(|| format!("stage train/{}", task.name()))?,
        );
    }
    lap("train_eval", &mut timings);

    // report artifacts
    let metrics = MetricsReport {
        seed: cfg.seed,
        n_subjects: outputs.len(),
        n_rows_augmented: augmented.n(),
        tasks: runs
            .iter()
            .map(|run| TaskReport {
                task: run.task.name().to_string(),
                models: run
                    .models
                    .iter()
                    .map(|(kind, _, _, m)| ModelReport {
                        model: kind.name().to_string(),
                        accuracy: m.accuracy,
                        auc: m.auc,
                        mae: m.mae,
                        confusion: m.confusion.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics).context("metrics.json")?,
    )?;

    let mut artifacts = vec![
        "metrics.json".to_string(),
        "features_full.csv".to_string(),
        "features_ranked.csv".to_string(),
        "features_augmented.csv".to_string(),
    ];
    if runs.iter().any(|r| r.task != Task::Regression) {
        write_confusion_csv(&runs, &out_dir.join("confusion.csv")).context("confusion.csv")?;
        artifacts.push("confusion.csv".to_string());
    }
    write_auc_table_csv(&runs, &out_dir.join("auc_table.csv")).context("auc_table.csv")?;
    artifacts.push("auc_table.csv".to_string());
    write_loss_curves_csv(&runs, &out_dir.join("loss_curves.csv")).context("loss_curves.csv")?;
    artifacts.push("loss_curves.csv".to_string());
    write_loss_svg(&runs, &out_dir.join("loss_curves.svg")).context("loss_curves.svg")?;
    artifacts.push("loss_curves.svg".to_string());
    if write_scatter(
        &runs,
        &out_dir.join("regression_scatter.csv"),
        &out_dir.join("regression_scatter.svg"),
    )? {
        artifacts.push("regression_scatter.csv".to_string());
        artifacts.push("regression_scatter.svg".to_string());
    }
    // Fig.-2-style panel for the first usable subject
    if let Some((_, first)) = outputs.first() {
        std::fs::write(
            out_dir.join("fiducials_panel.svg"),
            plot::five_panel_svg(&first.stack, &first.fiducials),
        )?;
        artifacts.push("fiducials_panel.svg".to_string());
    }
    lap("report", &mut timings);

    let mut summary = Vec::new();
    for t in &metrics.tasks {
        for m in &t.models {
            if let Some(acc) = m.accuracy {
                summary.push((t.task.clone(), m.model.clone(), "accuracy".to_string(), acc));
            }
            if let Some(auc) = m.auc {
                summary.push((t.task.clone(), m.model.clone(), "auc".to_string(), auc));
            }
            if let Some(mae) = m.mae {
                summary.push((t.task.clone(), m.model.clone(), "mae".to_string(), mae));
            }
        }
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.to_toml().as_bytes()),
        input: provenance,
        config: cfg.clone(),
        subjects_processed: outputs.len(),
        subjects_skipped: skipped,
        kept_features: ranked.kept_names.clone(),
        stage_timings_ms: timings,
        metrics_summary: summary,
        artifacts: artifacts.clone(),
        complete: true,
    };
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).context("manifest.json")?,
    )?;

    Ok(PipelineOutcome {
        metrics,
        manifest,
        out_dir: out_dir.to_path_buf(),
    })
}
