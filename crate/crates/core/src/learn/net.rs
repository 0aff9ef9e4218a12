//! Network assembly: the architectures from the model table, the loss heads,
//! and the Adam optimizer.

use super::layers::{softmax_rows, BatchNorm, Conv1d, Dense, Dropout, Elu, Mat, Param, Relu};
use super::{LearnError, ModelConfig, ModelKind, Result, Task};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    Relu(Relu),
    Elu(Elu),
    BatchNorm(BatchNorm),
    Dropout(Dropout),
    Conv1d(Conv1d),
    Flatten,
}

/// Output activation + loss pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Softmax + categorical cross entropy.
    SoftmaxCe,
    /// ReLU output + mean absolute error (ages are non-negative).
    ReluMae,
    /// Plain linear output + mean absolute error.
    LinearMae,
}

/// Class or regression targets for one batch.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    Values(&'a [f64]),
}

/// A feed-forward stack with explicit backward passes. Input standardization
/// (fit on the training fold) is part of the model.
#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub head: Head,
    pub out_dim: usize,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    /// L1/L2 regularization weights, applied to Conv1d kernels only.
    pub l1: f64,
    pub l2: f64,
}

impl Network {
    /// Build the architecture for a config with seeded initialization.
    pub fn build(cfg: &ModelConfig) -> Result<Network> {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let d = cfg.input_dim;
        let out_dim = cfg.task.class_count();
        let head = match (cfg.kind, cfg.task) {
            (_, Task::Binary) | (_, Task::ThreeClass) => Head::SoftmaxCe,
            (ModelKind::Linear, Task::Regression) => Head::LinearMae,
            (_, Task::Regression) => Head::ReluMae,
        };
        if cfg.kind == ModelKind::Linear && cfg.task != Task::Regression {
            return Err(LearnError::Argument(
                "the linear model is regression-only; use logistic for classification".into(),
            ));
        }
        if cfg.kind == ModelKind::Logistic && cfg.task == Task::Regression {
            return Err(LearnError::Argument(
                "the logistic model is classification-only; use linear for regression".into(),
            ));
        }

        let layers = match cfg.kind {
            ModelKind::Linear | ModelKind::Logistic => {
                vec![Layer::Dense(Dense::new("dense0", d, out_dim, &mut rng))]
            }
            ModelKind::Ffnn => vec![
                Layer::Dense(Dense::new("dense0", d, 40, &mut rng)),
                Layer::Relu(Relu::default()),
                Layer::BatchNorm(BatchNorm::new("bn0", 40)),
                Layer::Dense(Dense::new("dense1", 40, 10, &mut rng)),
                Layer::Relu(Relu::default()),
                Layer::BatchNorm(BatchNorm::new("bn1", 10)),
                Layer::Dense(Dense::new("dense2", 10, out_dim, &mut rng)),
            ],
            ModelKind::Cnn => vec![
                Layer::Conv1d(Conv1d::new("conv0", 1, 2, d, 4, &mut rng)),
                Layer::Elu(Elu::default()),
                Layer::Conv1d(Conv1d::new("conv1", 2, 2, d, 4, &mut rng)),
                Layer::Elu(Elu::default()),
                Layer::Dropout(Dropout::new(cfg.dropout_rate)),
                Layer::Conv1d(Conv1d::new("conv2", 2, 2, d, 4, &mut rng)),
                Layer::Elu(Elu::default()),
                Layer::Dropout(Dropout::new(cfg.dropout_rate)),
                Layer::Conv1d(Conv1d::new("conv3", 2, 2, d, 4, &mut rng)),
                Layer::Elu(Elu::default()),
                Layer::Dropout(Dropout::new(cfg.dropout_rate)),
                Layer::Flatten,
                Layer::Dense(Dense::new("dense0", 2 * d, out_dim, &mut rng)),
            ],
        };
        Ok(Network {
            layers,
            head,
            out_dim,
            norm_mean: vec![0.0; d],
            norm_std: vec![1.0; d],
            l1: if cfg.kind == ModelKind::Cnn { cfg.l1 } else { 0.0 },
            l2: if cfg.kind == ModelKind::Cnn { cfg.l2 } else { 0.0 },
        })
    }

    /// Fit the input standardizer on the training matrix.
    pub fn fit_normalizer(&mut self, x: &Mat) {
        for j in 0..x.cols {
            let col: Vec<f64> = (0..x.rows).map(|i| x.at(i, j)).collect();
            let (mean, std) = crate::dsp::mean_std(&col);
            self.norm_mean[j] = mean;
            self.norm_std[j] = if std > 0.0 { std } else { 1.0 };
        }
    }

    pub fn standardize(&self, x: &Mat) -> Mat {
        let mut out = x.clone();
        for i in 0..out.rows {
            for j in 0..out.cols {
                *out.at_mut(i, j) = (x.at(i, j) - self.norm_mean[j]) / self.norm_std[j];
            }
        }
        out
    }

    fn forward(&mut self, x: &Mat, train: bool, rng: &mut ChaCha12Rng) -> Mat {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = match layer {
                Layer::Dense(l) => l.forward(&cur, train),
                Layer::Relu(l) => l.forward(&cur, train),
                Layer::Elu(l) => l.forward(&cur, train),
                Layer::BatchNorm(l) => l.forward(&cur, train),
                Layer::Dropout(l) => l.forward(&cur, train, rng),
                Layer::Conv1d(l) => l.forward(&cur, train),
                Layer::Flatten => cur,
            };
        }
        cur
    }

    fn backward(&mut self, dlogits: &Mat) {
        let mut grad = dlogits.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = match layer {
                Layer::Dense(l) => l.backward(&grad),
                Layer::Relu(l) => l.backward(&grad),
                Layer::Elu(l) => l.backward(&grad),
                Layer::BatchNorm(l) => l.backward(&grad),
                Layer::Dropout(l) => l.backward(&grad),
                Layer::Conv1d(l) => l.backward(&grad),
                Layer::Flatten => grad,
            };
        }
    }

    /// Head loss plus the gradient w.r.t. the logits.
    fn head_loss(&self, logits: &Mat, targets: Targets) -> (f64, Mat) {
        let m = logits.rows as f64;
        match (self.head, targets) {
            (Head::SoftmaxCe, Targets::Classes(classes)) => {
                let probs = softmax_rows(logits);
                let mut loss = 0.0;
                let mut dl = probs.clone();
                for (i, &c) in classes.iter().enumerate() {
                    loss -= probs.at(i, c).max(1e-300).ln();
                    *dl.at_mut(i, c) -= 1.0;
                }
                for g in &mut dl.data {
                    *g /= m;
                }
                (loss / m, dl)
            }
            (Head::ReluMae, Targets::Values(ys)) | (Head::LinearMae, Targets::Values(ys)) => {
                let relu = self.head == Head::ReluMae;
                let mut loss = 0.0;
                let mut dl = Mat::zeros(logits.rows, logits.cols);
                for i in 0..logits.rows {
                    let z = logits.at(i, 0);
                    let pred = if relu { z.max(0.0) } else { z };
                    let err = pred - ys[i];
                    loss += err.abs();
                    // MAE subgradient, 0 at the kink; ReLU gates it
                    let mut g = if err > 0.0 {
                        1.0
                    } else if err < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    if relu && z < 0.0 {
                        g = 0.0;
                    }
                    *dl.at_mut(i, 0) = g / m;
                }
                (loss / m, dl)
            }
            _ => unreachable!("head/target mismatch is prevented at build time"),
        }
    }

    fn reg_loss(&self) -> f64 {
        if self.l1 == 0.0 && self.l2 == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for layer in &self.layers {
            if let Layer::Conv1d(c) = layer {
                for &w in &c.w.value {
                    acc += self.l1 * w.abs() + self.l2 * w * w;
                }
            }
        }
        acc
    }

    fn add_reg_grads(&mut self) {
        if self.l1 == 0.0 && self.l2 == 0.0 {
            return;
        }
        let (l1, l2) = (self.l1, self.l2);
        for layer in &mut self.layers {
            if let Layer::Conv1d(c) = layer {
                for (g, &w) in c.w.grad.iter_mut().zip(&c.w.value) {
                    *g += l1 * w.signum() + 2.0 * l2 * w;
                }
            }
        }
    }

    /// One training-mode forward/backward on an already-standardized batch.
    /// Returns the total (data + regularization) loss; gradients accumulate
    /// into the parameters, which must be zeroed beforehand.
    pub fn loss_backward(&mut self, x: &Mat, targets: Targets, rng: &mut ChaCha12Rng) -> f64 {
        let logits = self.forward(x, true, rng);
        let (data_loss, dlogits) = self.head_loss(&logits, targets);
        self.backward(&dlogits);
        self.add_reg_grads();
        data_loss + self.reg_loss()
    }

    /// Training-mode loss without touching gradients (finite differences).
    pub fn loss_only(&mut self, x: &Mat, targets: Targets, rng: &mut ChaCha12Rng) -> f64 {
        let logits = self.forward(x, true, rng);
        let (data_loss, _) = self.head_loss(&logits, targets);
        data_loss + self.reg_loss()
    }

    /// Eval-mode data loss (frozen batch-norm statistics, no dropout).
    pub fn eval_loss(&mut self, x: &Mat, targets: Targets) -> f64 {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let logits = self.forward(x, false, &mut rng);
        self.head_loss(&logits, targets).0
    }

    /// Eval-mode logits on an already-standardized matrix.
    pub fn eval_logits(&mut self, x: &Mat, rng: &mut ChaCha12Rng) -> Mat {
        self.forward(x, false, rng)
    }

    /// Eval-mode class probabilities (classification heads).
    pub fn predict_probs(&mut self, x_raw: &Mat) -> Mat {
        let x = self.standardize(x_raw);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let logits = self.forward(&x, false, &mut rng);
        softmax_rows(&logits)
    }

    /// Eval-mode scalar predictions (regression heads).
    pub fn predict_values(&mut self, x_raw: &Mat) -> Vec<f64> {
        let x = self.standardize(x_raw);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let logits = self.forward(&x, false, &mut rng);
        (0..logits.rows)
            .map(|i| {
                let z = logits.at(i, 0);
                if self.head == Head::ReluMae {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect()
    }

    /// Trainable parameter tensors, in declaration order.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(l) => {
                    out.push(&mut l.w);
                    out.push(&mut l.b);
                }
                Layer::BatchNorm(l) => {
                    out.push(&mut l.gamma);
                    out.push(&mut l.beta);
                }
                Layer::Conv1d(l) => {
                    out.push(&mut l.w);
                    out.push(&mut l.b);
                }
                _ => {}
            }
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Every persistent tensor (parameters, batch-norm running statistics,
    /// the input standardizer) under a stable name.
    pub fn for_each_tensor(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("norm.mean", &self.norm_mean);
        f("norm.std", &self.norm_std);
        for layer in &self.layers {
            match layer {
                Layer::Dense(l) => {
                    f(&l.w.name, &l.w.value);
                    f(&l.b.name, &l.b.value);
                }
                Layer::BatchNorm(l) => {
                    f(&l.gamma.name, &l.gamma.value);
                    f(&l.beta.name, &l.beta.value);
                    f(&format!("{}.running_mean", l.gamma.name.trim_end_matches(".gamma")), &l.running_mean);
                    f(&format!("{}.running_var", l.gamma.name.trim_end_matches(".gamma")), &l.running_var);
                }
                Layer::Conv1d(l) => {
                    f(&l.w.name, &l.w.value);
                    f(&l.b.name, &l.b.value);
                }
                _ => {}
            }
        }
    }

    /// Mutable access mirror of [`Self::for_each_tensor`].
    pub fn for_each_tensor_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>)) {
        f("norm.mean", &mut self.norm_mean);
        f("norm.std", &mut self.norm_std);
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(l) => {
                    f(&l.w.name.clone(), &mut l.w.value);
                    f(&l.b.name.clone(), &mut l.b.value);
                }
                Layer::BatchNorm(l) => {
                    let base = l.gamma.name.trim_end_matches(".gamma").to_string();
                    f(&l.gamma.name.clone(), &mut l.gamma.value);
                    f(&l.beta.name.clone(), &mut l.beta.value);
                    f(&format!("{base}.running_mean"), &mut l.running_mean);
                    f(&format!("{base}.running_var"), &mut l.running_var);
                }
                Layer::Conv1d(l) => {
                    f(&l.w.name.clone(), &mut l.w.value);
                    f(&l.b.name.clone(), &mut l.b.value);
                }
                _ => {}
            }
        }
    }
}

/// Adam with bias correction; one state slot per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (k, p) in params.iter_mut().enumerate() {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                self.m[k][i] = self.beta1 * self.m[k][i] + (1.0 - self.beta1) * g;
                self.v[k][i] = self.beta2 * self.v[k][i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[k][i] / b1t;
                let v_hat = self.v[k][i] / b2t;
                p.value[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
