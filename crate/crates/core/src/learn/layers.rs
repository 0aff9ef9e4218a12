//! Hand-written layers with explicit forward/backward passes.
//!
//! Activations are stored row-major as (batch, features). Conv1d interprets
//! its feature axis as channel-major `[c * len + t]`. Each layer caches what
//! its backward pass needs; `backward` must follow the matching `forward`.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Row-major (rows x cols) float matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A parameter tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    fn new(name: impl Into<String>, value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Param {
            name: name.into(),
            value,
            grad,
        }
    }
    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Fully connected layer: y = x W^T + b, W stored (out, in) row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Param,
    pub b: Param,
    cache_x: Mat,
}

impl Dense {
    pub fn new(tag: &str, in_dim: usize, out_dim: usize, rng: &mut ChaCha12Rng) -> Self {
        // Glorot uniform
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Dense {
            in_dim,
            out_dim,
            w: Param::new(format!("{tag}.w"), w),
            b: Param::new(format!("{tag}.b"), vec![0.0; out_dim]),
            cache_x: Mat::default(),
        }
    }

    pub fn forward(&mut self, x: &Mat, train: bool) -> Mat {
        debug_assert_eq!(x.cols, self.in_dim);
        let mut y = Mat::zeros(x.rows, self.out_dim);
        for i in 0..x.rows {
            let xi = x.row(i);
            for o in 0..self.out_dim {
                let wrow = &self.w.value[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.b.value[o];
                for (xv, wv) in xi.iter().zip(wrow) {
                    acc += xv * wv;
                }
                *y.at_mut(i, o) = acc;
            }
        }
        if train {
            self.cache_x = x.clone();
        }
        y
    }

    pub fn backward(&mut self, dy: &Mat) -> Mat {
        let x = &self.cache_x;
        let mut dx = Mat::zeros(x.rows, self.in_dim);
        for i in 0..x.rows {
            let xi = x.row(i);
            let dyi = dy.row(i);
            for o in 0..self.out_dim {
                let g = dyi[o];
                self.b.grad[o] += g;
                let wrow_base = o * self.in_dim;
                for j in 0..self.in_dim {
                    self.w.grad[wrow_base + j] += g * xi[j];
                    *dx.at_mut(i, j) += g * self.w.value[wrow_base + j];
                }
            }
        }
        dx
    }
}

/// ReLU with cached activation mask.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward(&mut self, x: &Mat, train: bool) -> Mat {
        let mut y = x.clone();
        if train {
            self.mask = x.data.iter().map(|&v| v > 0.0).collect();
        }
        for v in &mut y.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        y
    }
    pub fn backward(&self, dy: &Mat) -> Mat {
        let mut dx = dy.clone();
        for (g, &on) in dx.data.iter_mut().zip(&self.mask) {
            if !on {
                *g = 0.0;
            }
        }
        dx
    }
}

/// ELU (alpha = 1) with cached output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Elu {
    cache_y: Vec<f64>,
}

impl Elu {
    pub fn forward(&mut self, x: &Mat, train: bool) -> Mat {
        let mut y = x.clone();
        for v in &mut y.data {
            if *v < 0.0 {
                *v = v.exp_m1();
            }
        }
        if train {
            self.cache_y = y.data.clone();
        }
        y
    }
    pub fn backward(&self, dy: &Mat) -> Mat {
        let mut dx = dy.clone();
        for (g, &y) in dx.data.iter_mut().zip(&self.cache_y) {
            if y < 0.0 {
                *g *= y + 1.0; // d elu = elu(x) + 1 for x < 0
            }
        }
        dx
    }
}

/// Batch normalization over the batch axis, one (gamma, beta) pair per
/// feature. Training mode uses the population batch statistics and updates
/// the running estimates; eval mode uses the frozen running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub dim: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: BnCache,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BnCache {
    x_hat: Mat,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(tag: &str, dim: usize) -> Self {
        BatchNorm {
            dim,
            gamma: Param::new(format!("{tag}.gamma"), vec![1.0; dim]),
            beta: Param::new(format!("{tag}.beta"), vec![0.0; dim]),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: 0.1,
            eps: 1e-5,
            cache: BnCache::default(),
        }
    }

    pub fn forward(&mut self, x: &Mat, train: bool) -> Mat {
        debug_assert_eq!(x.cols, self.dim);
        let mut y = Mat::zeros(x.rows, x.cols);
        if train {
            let m = x.rows as f64;
            let mut x_hat = Mat::zeros(x.rows, x.cols);
            let mut inv_std = vec![0.0; self.dim];
            for j in 0..self.dim {
                let mean = (0..x.rows).map(|i| x.at(i, j)).sum::<f64>() / m;
                let var = (0..x.rows)
                    .map(|i| {
                        let d = x.at(i, j) - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / m;
                let is = 1.0 / (var + self.eps).sqrt();
                inv_std[j] = is;
                for i in 0..x.rows {
                    let xh = (x.at(i, j) - mean) * is;
                    *x_hat.at_mut(i, j) = xh;
                    *y.at_mut(i, j) = self.gamma.value[j] * xh + self.beta.value[j];
                }
                self.running_mean[j] =
                    (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean;
                self.running_var[j] =
                    (1.0 - self.momentum) * self.running_var[j] + self.momentum * var;
            }
            self.cache = BnCache { x_hat, inv_std };
        } else {
            for j in 0..self.dim {
                let is = 1.0 / (self.running_var[j] + self.eps).sqrt();
                for i in 0..x.rows {
                    let xh = (x.at(i, j) - self.running_mean[j]) * is;
                    *y.at_mut(i, j) = self.gamma.value[j] * xh + self.beta.value[j];
                }
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Mat) -> Mat {
        let x_hat = &self.cache.x_hat;
        let m = dy.rows as f64;
        let mut dx = Mat::zeros(dy.rows, dy.cols);
        for j in 0..self.dim {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for i in 0..dy.rows {
                let g = dy.at(i, j);
                sum_dy += g;
                sum_dy_xhat += g * x_hat.at(i, j);
            }
            self.beta.grad[j] += sum_dy;
            self.gamma.grad[j] += sum_dy_xhat;
            let scale = self.gamma.value[j] * self.cache.inv_std[j];
            for i in 0..dy.rows {
                let g = dy.at(i, j);
                *dx.at_mut(i, j) =
                    scale * (g - sum_dy / m - x_hat.at(i, j) * sum_dy_xhat / m);
            }
        }
        dx
    }
}

/// Inverted dropout; identity in eval mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    mask: Vec<f64>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        Dropout { rate, mask: Vec::new() }
    }

    pub fn forward(&mut self, x: &Mat, train: bool, rng: &mut ChaCha12Rng) -> Mat {
        if !train || self.rate == 0.0 {
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        self.mask = x
            .data
            .iter()
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let mut y = x.clone();
        for (v, &m) in y.data.iter_mut().zip(&self.mask) {
            *v *= m;
        }
        y
    }

    pub fn backward(&self, dy: &Mat) -> Mat {
        let mut dx = dy.clone();
        for (g, &m) in dx.data.iter_mut().zip(&self.mask) {
            *g *= m;
        }
        dx
    }
}

/// 1-D convolution, stride 1, dilation 1, 'same' (asymmetric) zero padding,
/// lecun-uniform init. Features are channel-major: `[c * len + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub len: usize,
    pub kernel: usize,
    pub pad_left: usize,
    /// Weights (out_ch, in_ch, kernel) flattened.
    pub w: Param,
    pub b: Param,
    cache_x: Mat,
}

impl Conv1d {
    pub fn new(
        tag: &str,
        in_ch: usize,
        out_ch: usize,
        len: usize,
        kernel: usize,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let fan_in = (in_ch * kernel) as f64;
        let bound = (3.0 / fan_in).sqrt(); // lecun uniform
        let w: Vec<f64> = (0..out_ch * in_ch * kernel)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Conv1d {
            in_ch,
            out_ch,
            len,
            kernel,
            pad_left: (kernel - 1) / 2,
            w: Param::new(format!("{tag}.w"), w),
            b: Param::new(format!("{tag}.b"), vec![0.0; out_ch]),
            cache_x: Mat::default(),
        }
    }

    #[inline]
    fn w_at(&self, o: usize, c: usize, k: usize) -> f64 {
        self.w.value[(o * self.in_ch + c) * self.kernel + k]
    }

    pub fn forward(&mut self, x: &Mat, train: bool) -> Mat {
        debug_assert_eq!(x.cols, self.in_ch * self.len);
        let mut y = Mat::zeros(x.rows, self.out_ch * self.len);
        for i in 0..x.rows {
            let xi = x.row(i);
            for o in 0..self.out_ch {
                for t in 0..self.len {
                    let mut acc = self.b.value[o];
                    for c in 0..self.in_ch {
                        let base = c * self.len;
                        for k in 0..self.kernel {
                            let src = t as i64 + k as i64 - self.pad_left as i64;
                            if src >= 0 && (src as usize) < self.len {
                                acc += self.w_at(o, c, k) * xi[base + src as usize];
                            }
                        }
                    }
                    y.data[i * y.cols + o * self.len + t] = acc;
                }
            }
        }
        if train {
            self.cache_x = x.clone();
        }
        y
    }

    pub fn backward(&mut self, dy: &Mat) -> Mat {
        let x = &self.cache_x;
        let mut dx = Mat::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let xi = x.row(i);
            let dyi = dy.row(i);
            for o in 0..self.out_ch {
                for t in 0..self.len {
                    let g = dyi[o * self.len + t];
                    self.b.grad[o] += g;
                    for c in 0..self.in_ch {
                        let base = c * self.len;
                        for k in 0..self.kernel {
                            let src = t as i64 + k as i64 - self.pad_left as i64;
                            if src >= 0 && (src as usize) < self.len {
                                let widx = (o * self.in_ch + c) * self.kernel + k;
                                self.w.grad[widx] += g * xi[base + src as usize];
                                dx.data[i * dx.cols + base + src as usize] +=
                                    g * self.w.value[widx];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(logits: &Mat) -> Mat {
    let mut out = logits.clone();
    for i in 0..out.rows {
        let row = &mut out.data[i * out.cols..(i + 1) * out.cols];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
