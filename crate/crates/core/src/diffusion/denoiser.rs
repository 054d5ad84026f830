//! The denoising network: a small residual MLP with a pooled context path.
//!
//! Each position first encodes its own latent row plus fixed sinusoidal
//! timestep and position features. The first hidden layer is mean-pooled
//! across positions and fed back through a learned projection, which is the
//! only cross-position coupling: it lets every position see a summary of the
//! whole sequence so the sample commits to one sentence instead of denoising
//! positions independently. Forward and backward passes are written out by
//! hand; there is no autograd anywhere in this crate.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

pub const TIME_FEATURES: usize = 8;
pub const POS_FEATURES: usize = 8;
const FREQUENCIES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    /// Projection of the pooled first-layer state into the second layer.
    pub wc: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct DenoiserGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub wc: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

/// Activations kept from a forward pass for the corresponding backward pass.
pub struct DenoiserCache {
    inputs: Array2<f64>,
    a1: Array2<f64>,
    h1: Array2<f64>,
    ctx: Array1<f64>,
    a2: Array2<f64>,
    h2: Array2<f64>,
}

pub fn input_dim(embed_dim: usize) -> usize {
    embed_dim + TIME_FEATURES + POS_FEATURES
}

impl DenoiserParams {
    /// Kaiming-style normal init.
    pub fn init(embed_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let din = input_dim(embed_dim);
        let mut normal = |rows: usize, cols: usize, scale: f64| {
            Array2::from_shape_fn((rows, cols), |_| {
                let z: f64 = rng.sample(StandardNormal);
                z * scale
            })
        };
        let w1 = normal(hidden_dim, din, (2.0 / din as f64).sqrt());
        let w2 = normal(hidden_dim, hidden_dim, (2.0 / hidden_dim as f64).sqrt());
        let wc = normal(hidden_dim, hidden_dim, (2.0 / hidden_dim as f64).sqrt());
        let w3 = normal(embed_dim, hidden_dim, (2.0 / hidden_dim as f64).sqrt());
        Self {
            w1,
            b1: Array1::zeros(hidden_dim),
            w2,
            wc,
            b2: Array1::zeros(hidden_dim),
            w3,
            b3: Array1::zeros(embed_dim),
        }
    }

    pub fn zeros_like(&self) -> DenoiserGrads {
        DenoiserGrads {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            wc: Array2::zeros(self.wc.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
            w3: Array2::zeros(self.w3.raw_dim()),
            b3: Array1::zeros(self.b3.raw_dim()),
        }
    }
}

fn features(fraction: f64, out: &mut [f64]) {
    for (i, f) in FREQUENCIES.iter().enumerate() {
        let phase = 2.0 * std::f64::consts::PI * f * fraction;
        out[2 * i] = phase.sin();
        out[2 * i + 1] = phase.cos();
    }
}

/// Predict `x0` from `x_t` at timestep `t` (out of `total`). Returns the
/// prediction and the cache needed by [`backward`].
pub fn forward(
    params: &DenoiserParams,
    x: &Array2<f64>,
    t: usize,
    total: usize,
) -> (Array2<f64>, DenoiserCache) {
    let (l, d) = x.dim();
    let din = input_dim(d);

    let mut tfeat = [0.0; TIME_FEATURES];
    features(t as f64 / total as f64, &mut tfeat);

    let mut inputs = Array2::zeros((l, din));
    let mut pfeat = [0.0; POS_FEATURES];
    for k in 0..l {
        features(k as f64 / l as f64, &mut pfeat);
        for j in 0..d {
            inputs[[k, j]] = x[[k, j]];
        }
        for j in 0..TIME_FEATURES {
            inputs[[k, d + j]] = tfeat[j];
        }
        for j in 0..POS_FEATURES {
            inputs[[k, d + TIME_FEATURES + j]] = pfeat[j];
        }
    }

    let a1 = inputs.dot(&params.w1.t()) + &params.b1;
    let h1 = a1.mapv(|v| v.max(0.0));
    let ctx = h1.mean_axis(Axis(0)).unwrap();
    let ctx_term = params.wc.dot(&ctx);
    let a2 = h1.dot(&params.w2.t()) + &ctx_term + &params.b2;
    let h2 = a2.mapv(|v| v.max(0.0)) + &h1;
    let out = h2.dot(&params.w3.t()) + &params.b3;

    (
        out,
        DenoiserCache {
            inputs,
            a1,
            h1,
            ctx,
            a2,
            h2,
        },
    )
}

/// Backpropagate `d_out` (gradient w.r.t. the prediction) through the cached
/// forward pass. Returns parameter gradients and the gradient w.r.t. the
/// latent input.
pub fn backward(
    params: &DenoiserParams,
    cache: &DenoiserCache,
    d_out: &Array2<f64>,
) -> (DenoiserGrads, Array2<f64>) {
    let l = cache.inputs.nrows();
    let d = d_out.ncols();

    let d_w3 = d_out.t().dot(&cache.h2);
    let d_b3 = d_out.sum_axis(Axis(0));
    let d_h2 = d_out.dot(&params.w3);

    let relu2 = cache.a2.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let d_a2 = &d_h2 * &relu2;
    let d_w2 = d_a2.t().dot(&cache.h1);
    let d_a2_sum = d_a2.sum_axis(Axis(0));
    // a2 = W2 h1 + Wc ctx + b2 with ctx shared by every position.
    let d_wc = outer(&d_a2_sum, &cache.ctx);
    let d_b2 = d_a2_sum.clone();
    let d_ctx = params.wc.t().dot(&d_a2_sum);
    // Residual connection: h2 = relu(a2) + h1.
    let mut d_h1 = d_a2.dot(&params.w2) + &d_h2;
    let inv_l = 1.0 / l as f64;
    for mut row in d_h1.rows_mut() {
        row.scaled_add(inv_l, &d_ctx);
    }

    let relu1 = cache.a1.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let d_a1 = &d_h1 * &relu1;
    let d_w1 = d_a1.t().dot(&cache.inputs);
    let d_b1 = d_a1.sum_axis(Axis(0));
    let d_inputs = d_a1.dot(&params.w1);

    let mut d_x = Array2::zeros((l, d));
    for k in 0..l {
        for j in 0..d {
            d_x[[k, j]] = d_inputs[[k, j]];
        }
    }

    (
        DenoiserGrads {
            w1: d_w1,
            b1: d_b1,
            w2: d_w2,
            wc: d_wc,
            b2: d_b2,
            w3: d_w3,
            b3: d_b3,
        },
        d_x,
    )
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.len(), b.len()));
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[[i, j]] = ai * bj;
        }
    }
    out
}

impl DenoiserGrads {
    pub fn accumulate(&mut self, other: &DenoiserGrads) {
        self.w1 += &other.w1;
        self.b1 += &other.b1;
        self.w2 += &other.w2;
        self.wc += &other.wc;
        self.b2 += &other.b2;
        self.w3 += &other.w3;
        self.b3 += &other.b3;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = DenoiserParams::init(4, 16, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |_| rng.sample::<f64, _>(StandardNormal));
        let (out, _) = forward(&params, &x, 10, 50);
        assert_eq!(out.dim(), (3, 4));
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn backward_matches_finite_differences_on_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = DenoiserParams::init(3, 8, &mut rng);
        let x = Array2::from_shape_fn((2, 3), |_| rng.sample::<f64, _>(StandardNormal));
        // Scalar objective: sum of outputs.
        let (_, cache) = forward(&params, &x, 5, 20);
        let d_out = Array2::from_elem((2, 3), 1.0);
        let (_, d_x) = backward(&params, &cache, &d_out);

        let h = 1e-6;
        for k in 0..2 {
            for j in 0..3 {
                let mut xp = x.clone();
                xp[[k, j]] += h;
                let mut xm = x.clone();
                xm[[k, j]] -= h;
                let fp: f64 = forward(&params, &xp, 5, 20).0.sum();
                let fm: f64 = forward(&params, &xm, 5, 20).0.sum();
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (d_x[[k, j]] - fd).abs() < 1e-5,
                    "({k},{j}): {} vs {}",
                    d_x[[k, j]],
                    fd
                );
            }
        }
    }
}
