//! `ppgmorph` — PPG morphology pipeline runner.
//!
//! `ppgmorph pipeline` runs everything end to end on the built-in synthetic
//! cohort (or a recordings directory) and writes the report artifacts;
//! the stage subcommands expose each step for debugging. Log level comes
//! from the `PPGMORPH_LOG` environment variable.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ppgmorph_cli::config::{PipelineConfig, StageSeed};
use ppgmorph_cli::{pipeline, plot, stages};
use ppgmorph_core::io::{self, Dataset};
use ppgmorph_core::learn::{self, LearnData, Mat, ModelKind, Task};
use ppgmorph_core::{features, fiducials, synth};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ppgmorph", version, about = "PPG morphology analysis pipeline")]
struct Cli {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the manifest seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker-pool size (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    All,
    Binary,
    #[value(name = "three-class")]
    ThreeClass,
    Regression,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Logistic,
    Linear,
    Ffnn,
    Cnn,
}

impl ModelArg {
    fn kind(self) -> ModelKind {
        match self {
            ModelArg::Logistic => ModelKind::Logistic,
            ModelArg::Linear => ModelKind::Linear,
            ModelArg::Ffnn => ModelKind::Ffnn,
            ModelArg::Cnn => ModelKind::Cnn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Fiducials,
    Loss,
    Scatter,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort as recording files.
    Synth {
        /// Number of subjects (defaults to the config cohort size).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Preprocess raw recordings (denoise, detrend, demodulate, z-score).
    Preprocess {
        #[arg(long)]
        input: PathBuf,
    },
    /// Segment beats and export averaged templates.
    Beats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        beat_len: Option<usize>,
        #[arg(long)]
        corr_gate: Option<f64>,
        #[arg(long)]
        min_beats: Option<usize>,
    },
    /// Detect fiducials on one template; JSON to stdout or --out.
    Fiducials {
        /// A `<stem>.template.csv` produced by `beats`.
        #[arg(long)]
        template: PathBuf,
        /// Also render the five-panel SVG here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Extract the 60-feature matrix from a templates directory.
    Extract {
        #[arg(long)]
        input: PathBuf,
    },
    /// Pearson-rank a feature matrix and keep the top k features.
    Rank {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 26)]
        k: usize,
    },
    /// Gaussian-augment a feature matrix.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 15)]
        factor: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
    },
    /// Train one model on a feature matrix.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, value_enum)]
        model: ModelArg,
    },
    /// Evaluate a saved model on a feature matrix.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the full pipeline and write all report artifacts.
    Pipeline {
        /// Recordings directory; synthetic cohort when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        task: TaskArg,
    },
    /// Render SVG figures from stage outputs.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// fiducials: template CSV; loss: loss_curves.csv; scatter:
        /// regression_scatter.csv.
        #[arg(long)]
        input: PathBuf,
    },
    /// Verify analytic gradients against central differences.
    Gradcheck {
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
}

fn tasks_of(arg: TaskArg) -> Vec<Task> {
    match arg {
        TaskArg::All => vec![Task::Binary, Task::ThreeClass, Task::Regression],
        TaskArg::Binary => vec![Task::Binary],
        TaskArg::ThreeClass => vec![Task::ThreeClass],
        TaskArg::Regression => vec![Task::Regression],
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PPGMORPH_LOG", "info"))
        .format_timestamp(None)
        .init();
    if let Err(e) = run() {
        log::error!("{e:#}");
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    let out = cli.out.clone();

    match cli.command {
        Command::Synth { n } => {
            std::fs::create_dir_all(&out)?;
            let mut spec = cfg.cohort.clone();
            spec.seed = cfg.seed_for(StageSeed::Cohort);
            if let Some(n) = n {
                spec.n_subjects = n;
            }
            let cohort = synth::gen_cohort(&spec)?;
            for subject in &cohort {
                let stem = subject.recording.meta.subject_id.clone();
                io::save_recording(&subject.recording, &out.join(format!("{stem}.csv")))?;
            }
            println!("wrote {} recordings to {}", cohort.len(), out.display());
        }
        Command::Preprocess { input } => {
            std::fs::create_dir_all(&out)?;
            let recordings = pipeline::load_recordings(&input)?;
            let mut written = 0;
            for rec in &recordings {
                let x = stages::preprocess(rec, &cfg)
                    .with_context(|| format!("subject {}", rec.meta.subject_id))?;
                let processed = io::RawRecording {
                    meta: rec.meta.clone(),
                    fs: rec.fs,
                    duration_s: rec.duration_s,
                    samples: x,
                };
                io::save_recording(
                    &processed,
                    &out.join(format!("{}.csv", rec.meta.subject_id)),
                )?;
                written += 1;
            }
            println!("preprocessed {written} recordings into {}", out.display());
        }
        Command::Beats {
            input,
            beat_len,
            corr_gate,
            min_beats,
        } => {
            std::fs::create_dir_all(&out)?;
            if let Some(v) = beat_len {
                cfg.beats.beat_len = v;
            }
            if let Some(v) = corr_gate {
                cfg.beats.corr_gate = v;
            }
            if let Some(v) = min_beats {
                cfg.beats.min_beats = v;
            }
            let recordings = pipeline::load_recordings(&input)?;
            let mut written = 0;
            for rec in &recordings {
                let subject = stages::process_subject(rec, &cfg)
                    .with_context(|| format!("subject {}", rec.meta.subject_id))?;
                stages::save_template(&subject, &rec.meta, &out, &rec.meta.subject_id)?;
                written += 1;
            }
            println!("wrote {written} templates to {}", out.display());
        }
        Command::Fiducials { template, svg } => {
            let (template_data, _, _, _) = stages::load_template(&template)?;
            let stack = fiducials::derivatives(&template_data);
            let fids = fiducials::detect_fiducials(&stack)?;
            let json = stages::fiducials_json(&fids);
            if let Some(svg_path) = svg {
                std::fs::write(&svg_path, plot::five_panel_svg(&stack, &fids))?;
            }
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::Extract { input } => {
            std::fs::create_dir_all(&out)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".template.csv")))
                .collect();
            paths.sort();
            if paths.is_empty() {
                bail!("no templates in {}", input.display());
            }
            let mut ds = Dataset::new(features::catalog_names());
            for path in &paths {
                let (template, stats, meta, _) = stages::load_template(path)?;
                let stack = fiducials::derivatives(&template);
                let fids = fiducials::detect_fiducials(&stack)
                    .with_context(|| format!("subject {}", meta.subject_id))?;
                let fv = features::extract_features(&template, &stack, &fids, &stats, &meta)?;
                ds.rows.push(io::DatasetRow {
                    subject_id: fv.subject_id.clone(),
                    values: fv.values,
                    label: meta.age,
                });
            }
            let path = out.join("features.csv");
            io::save_feature_matrix(&ds, &path)?;
            println!("extracted {} rows x {} features into {}", ds.n(), ds.feature_names.len(), path.display());
        }
        Command::Rank { input, k } => {
            std::fs::create_dir_all(&out)?;
            let ds = io::load_feature_matrix(&input)?;
            let ranked = features::pearson_rank(&ds, k)?;
            let reduced = ds.select(&ranked.kept_names).map_err(|e| anyhow::anyhow!(e))?;
            let path = out.join("features_ranked.csv");
            io::save_feature_matrix(&reduced, &path)?;
            for (rank, name) in ranked.kept_names.iter().enumerate() {
                let idx = ds.feature_names.iter().position(|n| n == name).unwrap();
                println!("{:>2}. |r| = {:.4}  {name}", rank + 1, ranked.scores[idx]);
            }
            println!("kept {k} features -> {}", path.display());
        }
        Command::Augment { input, factor, sigma } => {
            std::fs::create_dir_all(&out)?;
            let ds = io::load_feature_matrix(&input)?;
            let aug = features::augment_gaussian(&ds, factor, sigma, cfg.seed_for(StageSeed::Augment))?;
            let path = out.join("features_augmented.csv");
            io::save_feature_matrix(&aug, &path)?;
            println!("augmented {} -> {} rows into {}", ds.n(), aug.n(), path.display());
        }
        Command::Train { input, task, model } => {
            let task = *tasks_of(task)
                .first()
                .filter(|_| !matches!(task, TaskArg::All))
                .context("pick one task for train")?;
            let ds = io::load_feature_matrix(&input)?;
            let ratios = (cfg.split.train, cfg.split.val, cfg.split.test);
            let stratify = Some(match task {
                Task::Regression => Task::ThreeClass,
                t => t,
            });
            let (tr, va, te) = learn::split(&ds, ratios, cfg.seed_for(StageSeed::Split), stratify)?;
            let train_data = LearnData::from_dataset(&tr, task)?;
            let val_data = LearnData::from_dataset(&va, task)?;
            let test_data = LearnData::from_dataset(&te, task)?;
            let mut mcfg = learn::ModelConfig::new(model.kind(), task);
            mcfg.input_dim = ds.feature_names.len();
            mcfg.epochs = cfg.train.epochs;
            mcfg.batch_size = cfg.train.batch_size;
            mcfg.seed = cfg.seed_for(StageSeed::ModelFfnn);
            let (mut trained, _history) = learn::train(&mcfg, &train_data, &val_data)?;
            let metrics = learn::evaluate(&mut trained, &test_data)?;
            learn::save_model(&trained, &out)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            println!("model saved to {}", out.display());
        }
        Command::Eval { model, input } => {
            let mut trained = learn::load_model(&model)?;
            let ds = io::load_feature_matrix(&input)?;
            let data = LearnData::from_dataset(&ds, trained.config.task)?;
            let metrics = learn::evaluate(&mut trained, &data)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
        Command::Pipeline { input, task } => {
            let outcome = pipeline::run_pipeline(&cfg, input.as_deref(), &out, &tasks_of(task))?;
            for t in &outcome.metrics.tasks {
                for m in &t.models {
                    let headline = m
                        .accuracy
                        .map(|v| format!("accuracy {v:.3}"))
                        .or(m.mae.map(|v| format!("MAE {v:.2} years")))
                        .unwrap_or_default();
                    let auc = m.auc.map(|v| format!(", AUC {v:.3}")).unwrap_or_default();
                    println!("{:<12} {:<9} {headline}{auc}", t.task, m.model);
                }
            }
            println!("artifacts in {}", outcome.out_dir.display());
        }
        Command::Plot { kind, input } => {
            std::fs::create_dir_all(&out)?;
            match kind {
                PlotKind::Fiducials => {
                    let (template, _, _, _) = stages::load_template(&input)?;
                    let stack = fiducials::derivatives(&template);
                    let fids = fiducials::detect_fiducials(&stack)?;
                    let path = out.join("fiducials_panel.svg");
                    std::fs::write(&path, plot::five_panel_svg(&stack, &fids))?;
                    println!("wrote {}", path.display());
                }
                PlotKind::Loss => {
                    let path = out.join("loss_curves.svg");
                    std::fs::write(&path, render_loss_csv(&input)?)?;
                    println!("wrote {}", path.display());
                }
                PlotKind::Scatter => {
                    let path = out.join("regression_scatter.svg");
                    std::fs::write(&path, render_scatter_csv(&input)?)?;
                    println!("wrote {}", path.display());
                }
            }
        }
        Command::Gradcheck { model } => {
            let kinds = match model {
                Some(m) => vec![m.kind()],
                None => vec![ModelKind::Ffnn, ModelKind::Cnn],
            };
            // fixed well-conditioned probe batch
            let x = Mat::from_rows(
                &(0..4)
                    .map(|i| {
                        (0..8)
                            .map(|j| (1.3 * (i * 8 + j) as f64 + 0.31).sin() * 0.9)
                            .collect()
                    })
                    .collect::<Vec<Vec<f64>>>(),
            );
            for kind in kinds {
                for task in [Task::Binary, Task::ThreeClass, Task::Regression] {
                    if kind == ModelKind::Logistic && task == Task::Regression {
                        continue;
                    }
                    if kind == ModelKind::Linear && task != Task::Regression {
                        continue;
                    }
                    let labels = match task {
                        Task::Binary => learn::Labels::Classes(vec![0, 1, 1, 0]),
                        Task::ThreeClass => learn::Labels::Classes(vec![0, 1, 2, 1]),
                        Task::Regression => learn::Labels::Values(vec![12.0, 40.0, 27.5, 60.0]),
                    };
                    let mut mcfg = learn::ModelConfig::new(kind, task);
                    mcfg.input_dim = 8;
                    mcfg.seed = cfg.seed;
                    let worst = learn::grad_check(&mcfg, &x, &labels)?;
                    println!(
                        "gradcheck {:<8} {:<12} max relative error {worst:.3e}",
                        kind.name(),
                        task.name()
                    );
                }
            }
        }
    }
    Ok(())
}

fn render_loss_csv(path: &PathBuf) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            continue;
        }
        let key = format!("{} {}", fields[0], fields[1]);
        let train_loss: f64 = fields[3].parse().unwrap_or(f64::NAN);
        match curves.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(train_loss),
            None => curves.push((key, vec![train_loss])),
        }
    }
    if curves.is_empty() {
        bail!("no curves in {}", path.display());
    }
    let palette = ["#1763a6", "#c22", "#2a9d5c", "#b07d1e", "#7b4fa6", "#444"];
    let curves: Vec<plot::Curve> = curves
        .into_iter()
        .enumerate()
        .map(|(i, (label, values))| plot::Curve {
            label,
            values,
            color: palette[i % palette.len()].to_string(),
        })
        .collect();
    Ok(plot::curves_svg("training loss", "loss", &curves))
}

fn render_scatter_csv(path: &PathBuf) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 || fields[0] != "ffnn" {
            continue;
        }
        pairs.push((fields[1].parse::<f64>()?, fields[2].parse::<f64>()?));
    }
    if pairs.is_empty() {
        bail!("no ffnn rows in {}", path.display());
    }
    let mae = pairs.iter().map(|(t, p)| (t - p).abs()).sum::<f64>() / pairs.len() as f64;
    Ok(plot::scatter_svg("FFNN biological-age regression", &pairs, mae))
}
