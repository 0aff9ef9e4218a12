//! From-scratch training and evaluation of the shallow models: linear and
//! logistic regression heads, the two-hidden-layer FFNN and the
//! four-convolution CNN, all optimized with Adam.
//!
//! Classification uses categorical cross entropy, regression mean absolute
//! error (years). The 70/15/15 split is stratified and group-aware: every
//! augmented copy of a subject lands in the same fold, keyed by subject id.
//! Training is single-threaded and bit-deterministic under the config seed.

mod artifact;
pub mod layers;
mod metrics;
mod net;

pub use artifact::{load_model, save_model};
pub use layers::Mat;
pub use metrics::{confusion_percent, macro_ovr_auc, roc_auc, Metrics};
pub use net::{Adam, Head, Layer, Network, Targets};

use crate::io::Dataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("split failed: {0}")]
    Split(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("training diverged at epoch {epoch}: loss went non-finite")]
    TrainingDiverged { epoch: usize },
    #[error("gradient check failed for tensor {tensor}: max relative error {max_rel_err}")]
    GradCheck { tensor: String, max_rel_err: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, LearnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Logistic,
    Ffnn,
    Cnn,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::Ffnn => "ffnn",
            ModelKind::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    ThreeClass,
    Regression,
}

impl Task {
    /// Output width: classes for classification, 1 for regression.
    pub fn class_count(&self) -> usize {
        match self {
            Task::Binary => 2,
            Task::ThreeClass => 3,
            Task::Regression => 1,
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::ThreeClass => "three_class",
            Task::Regression => "regression",
        }
    }
}

/// Architecture + optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub task: Task,
    pub input_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l1: f64,
    pub l2: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults: 26 input features, 300 epochs, batch 32, learning rate 1e-2
    /// (2e-2 for the CNN), l1 = l2 = 1e-4 on conv kernels, dropout 0.2.
    pub fn new(kind: ModelKind, task: Task) -> Self {
        ModelConfig {
            kind,
            task,
            input_dim: 26,
            learning_rate: if kind == ModelKind::Cnn { 2e-2 } else { 1e-2 },
            epochs: 300,
            batch_size: 32,
            l1: 1e-4,
            l2: 1e-4,
            dropout_rate: 0.2,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(LearnError::Argument("input_dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(LearnError::Argument("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(LearnError::Argument("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Class or value labels for a whole data matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(v) => v.len(),
            Labels::Values(v) => v.len(),
        }
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn subset(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Classes(v) => Labels::Classes(idx.iter().map(|&i| v[i]).collect()),
            Labels::Values(v) => Labels::Values(idx.iter().map(|&i| v[i]).collect()),
        }
    }
    fn targets(&self) -> Targets<'_> {
        match self {
            Labels::Classes(v) => Targets::Classes(v),
            Labels::Values(v) => Targets::Values(v),
        }
    }
}

/// Feature matrix plus labels, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnData {
    pub x: Mat,
    pub labels: Labels,
}

impl LearnData {
    /// Build from a dataset for a task (ages become classes for the
    /// classification tasks).
    pub fn from_dataset(ds: &Dataset, task: Task) -> Result<LearnData> {
        let x = Mat::from_rows(
            &ds.rows.iter().map(|r| r.values.clone()).collect::<Vec<_>>(),
        );
        let ages: Vec<f64> = ds.rows.iter().map(|r| r.label).collect();
        let labels = match task {
            Task::Regression => Labels::Values(ages),
            _ => Labels::Classes(make_labels(&ages, task)?),
        };
        Ok(LearnData { x, labels })
    }
}

/// Age-group labels. Binary: 3-15 years is class 0, older is class 1 (the
/// boundary age 15 is inclusive in class 0). Three-class: 3-12 / 13-30 / 31+
/// with `age <= 12` class 0 and `12 < age <= 30` class 1.
pub fn make_labels(ages: &[f64], task: Task) -> Result<Vec<usize>> {
    if task == Task::Regression {
        return Err(LearnError::Argument("regression has no class labels".into()));
    }
    ages.iter()
        .map(|&age| {
            if age < 3.0 {
                return Err(LearnError::Label(format!(
                    "age {age} below the 3-year cohort minimum"
                )));
            }
            Ok(match task {
                Task::Binary => usize::from(age > 15.0),
                Task::ThreeClass => {
                    if age <= 12.0 {
                        0
                    } else if age <= 30.0 {
                        1
                    } else {
                        2
                    }
                }
                Task::Regression => unreachable!(),
            })
        })
        .collect()
}

/// Largest-remainder integer allocation of `total` across `ratios`.
fn largest_remainder(total: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let targets = [
        total as f64 * ratios.0,
        total as f64 * ratios.1,
        total as f64 * ratios.2,
    ];
    let mut counts = [
        targets[0].floor() as usize,
        targets[1].floor() as usize,
        targets[2].floor() as usize,
    ];
    let mut rema: Vec<(usize, f64)> = targets
        .iter()
        .enumerate()
        .map(|(i, t)| (i, t - t.floor()))
        .collect();
    rema.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut missing = total - counts.iter().sum::<usize>();
    for (i, _) in rema {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    counts
}

/// Disjoint, exhaustive train/val/test split.
///
/// Rows sharing a `subject_id` (augmentation siblings) always land in the
/// same fold. With `stratify_by_class` the per-class row counts match the
/// ratios to within group granularity (single-row groups: within one row).
pub fn split(
    ds: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
    stratify_by_class: Option<Task>,
) -> Result<(Dataset, Dataset, Dataset)> {
    if ds.n() < 20 {
        return Err(LearnError::Split(format!(
            "need at least 20 rows, got {}",
            ds.n()
        )));
    }
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 || ratios.0 <= 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(LearnError::Argument(format!("bad split ratios {ratios:?}")));
    }

    // group rows by subject id, preserving first appearance order
    let mut group_index: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    let mut groups: Vec<(Vec<usize>, usize)> = Vec::new(); // (row indices, class)
    for (i, row) in ds.rows.iter().enumerate() {
        let class = match stratify_by_class {
            Some(task) => make_labels(&[row.label], task)?[0],
            None => 0,
        };
        match group_index.get(row.subject_id.as_str()) {
            Some(&g) => {
                if groups[g].1 != class {
                    return Err(LearnError::Split(format!(
                        "subject {} appears with labels in different classes",
                        row.subject_id
                    )));
                }
                groups[g].0.push(i);
            }
            None => {
                group_index.insert(row.subject_id.as_str(), groups.len());
                groups.push((vec![i], class));
            }
        }
    }

    let n_classes = groups.iter().map(|g| g.1).max().unwrap_or(0) + 1;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut fold_rows: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for class in 0..n_classes {
        let mut class_groups: Vec<usize> = (0..groups.len())
            .filter(|&g| groups[g].1 == class)
            .collect();
        if stratify_by_class.is_some() && class_groups.len() < 3 {
            return Err(LearnError::Split(format!(
                "class {class} has only {} subject group(s); need at least 3",
                class_groups.len()
            )));
        }
        class_groups.shuffle(&mut rng);
        let class_rows: usize = class_groups.iter().map(|&g| groups[g].0.len()).sum();
        let quotas = largest_remainder(class_rows, ratios);
        let mut remaining: [i64; 3] = [quotas[0] as i64, quotas[1] as i64, quotas[2] as i64];
        for &g in &class_groups {
            let size = groups[g].0.len() as i64;
            // fold with the largest remaining quota; ties toward train
            let fold = (0..3).max_by(|&a, &b| remaining[a].cmp(&remaining[b])).unwrap();
            remaining[fold] -= size;
            fold_rows[fold].extend(&groups[g].0);
        }
    }

    let build = |rows: &mut Vec<usize>| -> Dataset {
        rows.sort_unstable();
        Dataset {
            feature_names: ds.feature_names.clone(),
            rows: rows.iter().map(|&i| ds.rows[i].clone()).collect(),
        }
    };
    let [mut tr, mut va, mut te] = fold_rows;
    Ok((build(&mut tr), build(&mut va), build(&mut te)))
}

/// A trained model plus the config that built it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub net: Network,
}

impl TrainedModel {
    pub fn predict_probs(&mut self, x: &Mat) -> Mat {
        self.net.predict_probs(x)
    }
    pub fn predict_values(&mut self, x: &Mat) -> Vec<f64> {
        self.net.predict_values(x)
    }
}

/// Per-epoch curves recorded during training.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Per-epoch validation accuracy (classification tasks only).
    pub val_accuracy: Vec<f64>,
    /// Per-epoch validation AUC (classification tasks only).
    pub val_auc: Vec<f64>,
}

/// Train a model with Adam and return the parameters of the epoch with the
/// lowest validation loss (the validation fold's job). Deterministic under
/// `cfg.seed`.
pub fn train(cfg: &ModelConfig, train: &LearnData, val: &LearnData) -> Result<(TrainedModel, History)> {
    cfg.validate()?;
    if train.x.cols != cfg.input_dim {
        return Err(LearnError::Argument(format!(
            "config expects {} features, data has {}",
            cfg.input_dim, train.x.cols
        )));
    }
    if train.x.rows != train.labels.len() || val.x.rows != val.labels.len() {
        return Err(LearnError::Argument("rows and labels disagree".into()));
    }

    let mut net = Network::build(cfg)?;
    net.fit_normalizer(&train.x);
    let x_train = net.standardize(&train.x);
    let x_val = net.standardize(&val.x);

    let mut adam = Adam::new(cfg.learning_rate);
    let mut shuffle_rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x51AF_F1E0);
    let mut dropout_rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x0D20_0D20);
    let mut history = History::default();

    let n = x_train.rows;
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Network)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = Mat::from_rows(&chunk.iter().map(|&i| x_train.row(i).to_vec()).collect::<Vec<_>>());
            let yb = train.labels.subset(chunk);
            net.zero_grads();
            let loss = net.loss_backward(&xb, yb.targets(), &mut dropout_rng);
            if !loss.is_finite() {
                return Err(LearnError::TrainingDiverged { epoch });
            }
            adam.step(&mut net.params_mut());
            epoch_loss += loss;
            batches += 1.0;
        }
        history.train_loss.push(epoch_loss / batches);
        let vl = net.eval_loss(&x_val, val.labels.targets());
        if !vl.is_finite() {
            return Err(LearnError::TrainingDiverged { epoch });
        }
        history.val_loss.push(vl);
        if best.as_ref().is_none_or(|(b, _)| vl < *b) {
            best = Some((vl, net.clone()));
        }

        if let Labels::Classes(classes) = &val.labels {
            let mut rng0 = ChaCha12Rng::seed_from_u64(0);
            let probs = layers::softmax_rows(&net.eval_logits(&x_val, &mut rng0));
            let preds = argmax_rows(&probs);
            let acc = preds.iter().zip(classes).filter(|(p, c)| p == c).count() as f64
                / classes.len() as f64;
            history.val_accuracy.push(acc);
            history.val_auc.push(metrics::task_auc(&probs, classes));
        }
    }

    let net = best.map(|(_, snapshot)| snapshot).unwrap_or(net);
    Ok((TrainedModel { config: cfg.clone(), net }, history))
}

fn argmax_rows(probs: &Mat) -> Vec<usize> {
    (0..probs.rows)
        .map(|i| {
            let row = probs.row(i);
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap_or(0)
        })
        .collect()
}

/// Evaluate a trained model on a held-out set.
pub fn evaluate(model: &mut TrainedModel, data: &LearnData) -> Result<Metrics> {
    if data.x.rows == 0 {
        return Err(LearnError::Argument("empty evaluation set".into()));
    }
    match &data.labels {
        Labels::Classes(classes) => {
            let probs = model.predict_probs(&data.x);
            let preds = argmax_rows(&probs);
            let c = model.config.task.class_count();
            let confusion = confusion_percent(&preds, classes, c);
            let accuracy = preds.iter().zip(classes).filter(|(p, c)| p == c).count() as f64
                / classes.len() as f64;
            let auc = metrics::task_auc(&probs, classes);
            Ok(Metrics {
                confusion: Some(confusion),
                accuracy: Some(accuracy),
                auc: Some(auc),
                mae: None,
            })
        }
        Labels::Values(ys) => {
            let preds = model.predict_values(&data.x);
            let mae = preds
                .iter()
                .zip(ys)
                .map(|(p, y)| (p - y).abs())
                .sum::<f64>()
                / ys.len() as f64;
            Ok(Metrics {
                confusion: None,
                accuracy: None,
                auc: None,
                mae: Some(mae),
            })
        }
    }
}

/// Central-difference gradient verification (h = 1e-5). The error is
/// measured per parameter tensor: the worst element-wise deviation relative
/// to the tensor's gradient scale. Elements whose true gradient sits at the
/// f64 roundoff floor (|g| ~ eps*loss/h) would otherwise dominate an
/// element-wise ratio with pure rounding noise.
///
/// Returns the worst per-tensor relative error, or an error naming the first
/// tensor beyond the 1e-4 gate.
pub fn grad_check(cfg: &ModelConfig, x: &Mat, labels: &Labels) -> Result<f64> {
    cfg.validate()?;
    if x.rows > 8 {
        return Err(LearnError::Argument("gradient checks use batches of <= 8".into()));
    }
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    let dropout_seed = cfg.seed ^ 0xabcd;

    let mut net = Network::build(cfg)?;
    net.zero_grads();
    let mut rng = ChaCha12Rng::seed_from_u64(dropout_seed);
    net.loss_backward(x, labels.targets(), &mut rng);

    // snapshot the analytic gradients tensor by tensor
    let analytic: Vec<(String, Vec<f64>)> = {
        let mut out = Vec::new();
        for p in net.params_mut() {
            out.push((p.name.clone(), p.grad.clone()));
        }
        out
    };

    let mut worst = 0.0f64;
    for (t_idx, (name, grads)) in analytic.iter().enumerate() {
        let mut max_abs_diff = 0.0f64;
        let mut scale = 0.0f64;
        for e_idx in 0..grads.len() {
            let probe = |delta: f64| -> f64 {
                let mut clone = net.clone();
                {
                    let mut params = clone.params_mut();
                    params[t_idx].value[e_idx] += delta;
                }
                let mut rng = ChaCha12Rng::seed_from_u64(dropout_seed);
                clone.loss_only(x, labels.targets(), &mut rng)
            };
            let numeric = (probe(H) - probe(-H)) / (2.0 * H);
            let ga = grads[e_idx];
            max_abs_diff = max_abs_diff.max((ga - numeric).abs());
            scale = scale.max(ga.abs()).max(numeric.abs());
        }
        let rel = max_abs_diff / scale.max(1e-12);
        if rel > worst {
            worst = rel;
        }
        if rel > TOL {
            return Err(LearnError::GradCheck {
                tensor: name.clone(),
                max_rel_err: rel,
            });
        }
    }
    Ok(worst)
}
