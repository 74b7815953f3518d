//! Layers with explicit forward caches and hand-written backward passes.
//!
//! Everything runs on one sequence at a time as `(seq_len, d)` f64 matrices;
//! batches are loops over examples with gradient accumulation. Backward
//! methods add into `Param::grad`, so a batch is processed by zeroing grads
//! once and replaying each example.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::math::{gelu, gelu_grad, softmax_backward_rows, softmax_rows};

/// Additive mask value for disallowed attention edges.
const NEG_INF: f64 = -1e30;

/// A trainable tensor and its gradient accumulator. Vector-shaped
/// parameters (biases, norm scales) are stored as `(1, n)`.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Param { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Param::new(Array2::zeros((rows, cols)))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn n_elements(&self) -> usize {
        self.value.len()
    }
}

/// Samples a `(rows, cols)` matrix with i.i.d. N(0, std^2) entries.
pub fn normal_init(rows: usize, cols: usize, std: f64, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let dist = rand_distr::Normal::new(0.0, std).expect("valid normal");
    Array2::from_shape_fn((rows, cols), |_| rng.sample(dist))
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param, // (d_in, d_out)
    pub bias: Param,   // (1, d_out)
}

pub struct LinearCache {
    input: Array2<f64>,
}

impl Linear {
    pub fn init(d_in: usize, d_out: usize, std: f64, rng: &mut ChaCha12Rng) -> Self {
        Linear {
            weight: Param::new(normal_init(d_in, d_out, std, rng)),
            bias: Param::zeros(1, d_out),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LinearCache) {
        let y = x.dot(&self.weight.value) + &self.bias.value;
        (y, LinearCache { input: x.clone() })
    }

    /// Accumulates weight/bias grads and returns the input gradient.
    pub fn backward(&mut self, dy: &Array2<f64>, cache: &LinearCache) -> Array2<f64> {
        self.weight.grad += &cache.input.t().dot(dy);
        self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&self.weight.value.t())
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param)) {
        f(format!("{prefix}.weight"), &self.weight);
        f(format!("{prefix}.bias"), &self.bias);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        f(format!("{prefix}.weight"), &mut self.weight);
        f(format!("{prefix}.bias"), &mut self.bias);
    }
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Param, // (1, d)
    pub beta: Param,  // (1, d)
    pub eps: f64,
}

pub struct LayerNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn init(d: usize) -> Self {
        LayerNorm {
            gamma: Param::new(Array2::ones((1, d))),
            beta: Param::zeros(1, d),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        let d = x.ncols() as f64;
        let mean = x.mean_axis(Axis(1)).expect("non-empty rows");
        let mut centered = x.clone();
        for (mut row, &m) in centered.axis_iter_mut(Axis(0)).zip(mean.iter()) {
            row.mapv_inplace(|v| v - m);
        }
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut normalized = centered;
        for (mut row, &i) in normalized.axis_iter_mut(Axis(0)).zip(inv_std.iter()) {
            row.mapv_inplace(|v| v * i);
        }
        let y = &normalized * &self.gamma.value + &self.beta.value;
        (
            y,
            LayerNormCache {
                normalized,
                inv_std,
            },
        )
    }

    pub fn backward(&mut self, dy: &Array2<f64>, cache: &LayerNormCache) -> Array2<f64> {
        let xhat = &cache.normalized;
        self.gamma.grad += &(dy * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.beta.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));

        let g = dy * &self.gamma.value; // (n, d)
        let d = g.ncols() as f64;
        let g_mean = g.sum_axis(Axis(1)) / d; // (n,)
        let gx_mean = (&g * xhat).sum_axis(Axis(1)) / d; // (n,)
        let mut dx = g;
        for (i, mut row) in dx.axis_iter_mut(Axis(0)).enumerate() {
            let gm = g_mean[i];
            let gxm = gx_mean[i];
            let inv = cache.inv_std[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v = inv * (*v - gm - xhat[[i, j]] * gxm);
            }
        }
        dx
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param)) {
        f(format!("{prefix}.gamma"), &self.gamma);
        f(format!("{prefix}.beta"), &self.beta);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        f(format!("{prefix}.gamma"), &mut self.gamma);
        f(format!("{prefix}.beta"), &mut self.beta);
    }
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: the cached multiplier is `bernoulli(1-p) / (1-p)`,
/// identity when the rate is zero or no generator is supplied (eval mode).
pub struct DropoutCache {
    multiplier: Option<Array2<f64>>,
}

pub fn dropout_forward(
    x: Array2<f64>,
    rate: f64,
    rng: Option<&mut ChaCha12Rng>,
) -> (Array2<f64>, DropoutCache) {
    match rng {
        Some(r) if rate > 0.0 => {
            let keep = 1.0 - rate;
            let multiplier = Array2::from_shape_fn(x.raw_dim(), |_| {
                if r.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            let y = &x * &multiplier;
            (
                y,
                DropoutCache {
                    multiplier: Some(multiplier),
                },
            )
        }
        _ => (x, DropoutCache { multiplier: None }),
    }
}

pub fn dropout_backward(dy: &Array2<f64>, cache: &DropoutCache) -> Array2<f64> {
    match &cache.multiplier {
        Some(m) => dy * m,
        None => dy.clone(),
    }
}

// ---------------------------------------------------------------------------
// Multi-head attention
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub n_heads: usize,
}

pub struct AttentionCache {
    q_cache: LinearCache,
    k_cache: LinearCache,
    v_cache: LinearCache,
    out_cache: LinearCache,
    queries: Array2<f64>,
    keys: Array2<f64>,
    values: Array2<f64>,
    probs: Vec<Array2<f64>>, // per head (n_q, n_k)
}

impl MultiHeadAttention {
    pub fn init(d_model: usize, n_heads: usize, std: f64, rng: &mut ChaCha12Rng) -> Self {
        MultiHeadAttention {
            q: Linear::init(d_model, d_model, std, rng),
            k: Linear::init(d_model, d_model, std, rng),
            v: Linear::init(d_model, d_model, std, rng),
            out: Linear::init(d_model, d_model, std, rng),
            n_heads,
        }
    }

    /// `x_q` provides queries, `x_kv` keys and values (the same tensor for
    /// self-attention). `causal` forbids attending to later positions.
    pub fn forward(
        &self,
        x_q: &Array2<f64>,
        x_kv: &Array2<f64>,
        causal: bool,
    ) -> (Array2<f64>, AttentionCache) {
        let d = x_q.ncols();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let (queries, q_cache) = self.q.forward(x_q);
        let (keys, k_cache) = self.k.forward(x_kv);
        let (values, v_cache) = self.v.forward(x_kv);

        let n_q = queries.nrows();
        let mut merged = Array2::zeros((n_q, d));
        let mut probs = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = queries.slice(s![.., cols.clone()]);
            let kh = keys.slice(s![.., cols.clone()]);
            let vh = values.slice(s![.., cols.clone()]);
            let mut scores = qh.dot(&kh.t());
            scores.mapv_inplace(|v| v * scale);
            if causal {
                for i in 0..scores.nrows() {
                    for j in (i + 1)..scores.ncols() {
                        scores[[i, j]] = NEG_INF;
                    }
                }
            }
            let p = softmax_rows(&scores);
            let oh = p.dot(&vh);
            merged.slice_mut(s![.., cols]).assign(&oh);
            probs.push(p);
        }

        let (y, out_cache) = self.out.forward(&merged);
        (
            y,
            AttentionCache {
                q_cache,
                k_cache,
                v_cache,
                out_cache,
                queries,
                keys,
                values,
                probs,
            },
        )
    }

    /// Returns `(dx_q, dx_kv)`; for self-attention, add the two into the
    /// same upstream gradient.
    pub fn backward(
        &mut self,
        dy: &Array2<f64>,
        cache: &AttentionCache,
    ) -> (Array2<f64>, Array2<f64>) {
        let d = cache.queries.ncols();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let d_merged = self.out.backward(dy, &cache.out_cache);

        let mut d_queries = Array2::zeros(cache.queries.raw_dim());
        let mut d_keys = Array2::zeros(cache.keys.raw_dim());
        let mut d_values = Array2::zeros(cache.values.raw_dim());
        for h in 0..self.n_heads {
            let cols = h * dh..(h + 1) * dh;
            let d_oh = d_merged.slice(s![.., cols.clone()]);
            let p = &cache.probs[h];
            let vh = cache.values.slice(s![.., cols.clone()]);
            let qh = cache.queries.slice(s![.., cols.clone()]);
            let kh = cache.keys.slice(s![.., cols.clone()]);

            let dp = d_oh.dot(&vh.t());
            let dvh = p.t().dot(&d_oh);
            let mut ds = softmax_backward_rows(p, &dp);
            ds.mapv_inplace(|v| v * scale);
            let dqh = ds.dot(&kh);
            let dkh = ds.t().dot(&qh);

            d_queries.slice_mut(s![.., cols.clone()]).assign(&dqh);
            d_keys.slice_mut(s![.., cols.clone()]).assign(&dkh);
            d_values.slice_mut(s![.., cols]).assign(&dvh);
        }

        let dx_q = self.q.backward(&d_queries, &cache.q_cache);
        let dx_kv =
            self.k.backward(&d_keys, &cache.k_cache) + self.v.backward(&d_values, &cache.v_cache);
        (dx_q, dx_kv)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param)) {
        self.q.visit(&format!("{prefix}.q"), f);
        self.k.visit(&format!("{prefix}.k"), f);
        self.v.visit(&format!("{prefix}.v"), f);
        self.out.visit(&format!("{prefix}.out"), f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        self.q.visit_mut(&format!("{prefix}.q"), f);
        self.k.visit_mut(&format!("{prefix}.k"), f);
        self.v.visit_mut(&format!("{prefix}.v"), f);
        self.out.visit_mut(&format!("{prefix}.out"), f);
    }
}

// ---------------------------------------------------------------------------
// Feed-forward
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub w1: Linear,
    pub w2: Linear,
}

pub struct FeedForwardCache {
    w1_cache: LinearCache,
    w2_cache: LinearCache,
    pre_activation: Array2<f64>,
}

impl FeedForward {
    pub fn init(d_model: usize, ffn_dim: usize, std: f64, rng: &mut ChaCha12Rng) -> Self {
        FeedForward {
            w1: Linear::init(d_model, ffn_dim, std, rng),
            w2: Linear::init(ffn_dim, d_model, std, rng),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, FeedForwardCache) {
        let (pre, w1_cache) = self.w1.forward(x);
        let activated = pre.mapv(gelu);
        let (y, w2_cache) = self.w2.forward(&activated);
        (
            y,
            FeedForwardCache {
                w1_cache,
                w2_cache,
                pre_activation: pre,
            },
        )
    }

    pub fn backward(&mut self, dy: &Array2<f64>, cache: &FeedForwardCache) -> Array2<f64> {
        let d_activated = self.w2.backward(dy, &cache.w2_cache);
        let d_pre = d_activated * cache.pre_activation.mapv(gelu_grad);
        self.w1.backward(&d_pre, &cache.w1_cache)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param)) {
        self.w1.visit(&format!("{prefix}.w1"), f);
        self.w2.visit(&format!("{prefix}.w2"), f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        self.w1.visit_mut(&format!("{prefix}.w1"), f);
        self.w2.visit_mut(&format!("{prefix}.w2"), f);
    }
}
