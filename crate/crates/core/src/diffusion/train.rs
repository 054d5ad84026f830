//! Training loop: denoising MSE plus a decoder cross-entropy that anchors the
//! embedding table.

use ndarray::Array2;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

use super::denoiser::{self, DenoiserGrads};
use super::model::{standard_normal, DiffusionModel, ModelConfig};

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mse_weight: f64,
    pub ce_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 32,
            learning_rate: 1e-3,
            mse_weight: 1.0,
            ce_weight: 1.0,
        }
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: DiffusionModel,
    /// Mean loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Train a fresh model on a corpus of fixed-length token sequences. Fully
/// deterministic for a given `(corpus, config, epochs, seed)`.
pub fn train(
    corpus: &[Vec<TokenId>],
    vocab: Vocabulary,
    config: &TrainConfig,
    epochs: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for seq in corpus {
        if seq.len() != config.model.seq_len {
            return Err(Error::DimensionMismatch {
                what: "corpus sequence",
                expected: config.model.seq_len,
                actual: seq.len(),
            });
        }
        for &t in seq {
            if t >= vocab.len() {
                return Err(Error::InvalidTokenId(t));
            }
        }
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch_size must be positive".into()));
    }

    let mut model = DiffusionModel::new(config.model, vocab, seed)?;
    // Separate stream from the init draws so changing the architecture does
    // not shift the data order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut adam = Adam::new(&model);

    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for epoch in 0..epochs {
        // Step decay: the final stretch runs at reduced rates so the
        // denoiser settles instead of bouncing around the optimum.
        let progress = epoch as f64 / epochs.max(1) as f64;
        let lr = config.learning_rate
            * if progress < 0.6 {
                1.0
            } else if progress < 0.85 {
                0.2
            } else {
                0.04
            };
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Grads::zeros(&model);
            let mut batch_loss = 0.0;
            for &idx in batch {
                let t = rng.gen_range(1..=config.model.timesteps);
                let noise = standard_normal(
                    &mut rng,
                    config.model.seq_len,
                    config.model.embed_dim,
                );
                batch_loss += example_grads(&model, config, &corpus[idx], t, &noise, &mut grads)?;
            }
            let scale = 1.0 / batch.len() as f64;
            grads.scale(scale);
            epoch_loss += batch_loss;
            adam.step(&mut model, &grads, lr);
        }
        epoch_losses.push(epoch_loss / corpus.len() as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

struct Grads {
    emb: Array2<f64>,
    denoiser: DenoiserGrads,
}

impl Grads {
    fn zeros(model: &DiffusionModel) -> Self {
        Self {
            emb: Array2::zeros(model.embeddings().raw_dim()),
            denoiser: model.denoiser().zeros_like(),
        }
    }

    fn scale(&mut self, s: f64) {
        self.emb.mapv_inplace(|v| v * s);
        let d = &mut self.denoiser;
        d.w1.mapv_inplace(|v| v * s);
        d.b1.mapv_inplace(|v| v * s);
        d.w2.mapv_inplace(|v| v * s);
        d.wc.mapv_inplace(|v| v * s);
        d.b2.mapv_inplace(|v| v * s);
        d.w3.mapv_inplace(|v| v * s);
        d.b3.mapv_inplace(|v| v * s);
    }
}

/// Loss of one corruption-and-reconstruction example, accumulating parameter
/// gradients. Exposed shape: see [`example_loss`], the forward-only twin used
/// by the finite-difference test.
fn example_grads(
    model: &DiffusionModel,
    config: &TrainConfig,
    tokens: &[TokenId],
    t: usize,
    noise: &Array2<f64>,
    grads: &mut Grads,
) -> Result<f64> {
    let (l, d) = (config.model.seq_len, config.model.embed_dim);
    let v = model.vocab().len();
    let tau = config.model.tau;

    let x0 = model.embed(tokens)?;
    let alpha_bar = model.schedule().alpha_bar(t);
    let signal = alpha_bar.sqrt();
    let x_t = model.q_sample(&x0, t, noise);
    let (pred, cache) = denoiser::forward(model.denoiser(), &x_t, t, config.model.timesteps);

    // MSE on the clean latent.
    let diff = &pred - &x0;
    let mse = config.mse_weight * diff.iter().map(|e| e * e).sum::<f64>() / (l * d) as f64;
    let mut d_pred = &diff * (2.0 * config.mse_weight / (l * d) as f64);
    let mut d_x0 = -&d_pred;

    // Decoder cross-entropy anchoring the embeddings, annealed by the
    // signal fraction: at high noise the per-position token targets carry no
    // sequence-level information and only blur the prediction.
    let ce_scale = config.ce_weight * alpha_bar;
    let logits = pred.dot(&model.embeddings().t()) / tau;
    let mut ce = 0.0;
    let mut d_logits = Array2::zeros((l, v));
    for k in 0..l {
        let row = logits.row(k);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        ce += sum.ln() + max - row[tokens[k]];
        for tok in 0..v {
            let p = exps[tok] / sum;
            let target = if tok == tokens[k] { 1.0 } else { 0.0 };
            d_logits[[k, tok]] = (p - target) * ce_scale / l as f64;
        }
    }
    ce *= ce_scale / l as f64;

    d_pred += &(d_logits.dot(model.embeddings()) / tau);
    grads.emb += &(d_logits.t().dot(&pred) / tau);

    let (den_grads, d_xt) = denoiser::backward(model.denoiser(), &cache, &d_pred);
    grads.denoiser.accumulate(&den_grads);
    d_x0 += &(&d_xt * signal);
    for k in 0..l {
        let mut row = grads.emb.row_mut(tokens[k]);
        row += &d_x0.row(k);
    }

    Ok(mse + ce)
}

/// Forward-only loss of the same example; kept separate so gradient tests can
/// difference it without touching the backward path.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn example_loss(
    model: &DiffusionModel,
    config: &TrainConfig,
    tokens: &[TokenId],
    t: usize,
    noise: &Array2<f64>,
) -> Result<f64> {
    let (l, d) = (config.model.seq_len, config.model.embed_dim);
    let tau = config.model.tau;
    let x0 = model.embed(tokens)?;
    let alpha_bar = model.schedule().alpha_bar(t);
    let x_t = model.q_sample(&x0, t, noise);
    let (pred, _) = denoiser::forward(model.denoiser(), &x_t, t, config.model.timesteps);
    let diff = &pred - &x0;
    let mse = config.mse_weight * diff.iter().map(|e| e * e).sum::<f64>() / (l * d) as f64;
    let logits = pred.dot(&model.embeddings().t()) / tau;
    let mut ce = 0.0;
    for k in 0..l {
        let row = logits.row(k);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        ce += sum.ln() + max - row[tokens[k]];
    }
    ce *= config.ce_weight * alpha_bar / l as f64;
    Ok(mse + ce)
}

struct Adam {
    step: usize,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(model: &DiffusionModel) -> Self {
        let sizes = [
            model.embeddings().len(),
            model.denoiser().w1.len(),
            model.denoiser().b1.len(),
            model.denoiser().w2.len(),
            model.denoiser().wc.len(),
            model.denoiser().b2.len(),
            model.denoiser().w3.len(),
            model.denoiser().b3.len(),
        ];
        Self {
            step: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    fn step(&mut self, model: &mut DiffusionModel, grads: &Grads, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let mut update = |idx: usize, params: &mut [f64], grad: &[f64]| {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for i in 0..params.len() {
                let g = grad[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        };
        update(
            0,
            model.embeddings_mut().as_slice_mut().unwrap(),
            grads.emb.as_slice().unwrap(),
        );
        let g = &grads.denoiser;
        let d = model.denoiser_mut();
        update(1, d.w1.as_slice_mut().unwrap(), g.w1.as_slice().unwrap());
        update(2, d.b1.as_slice_mut().unwrap(), g.b1.as_slice().unwrap());
        update(3, d.w2.as_slice_mut().unwrap(), g.w2.as_slice().unwrap());
        update(4, d.wc.as_slice_mut().unwrap(), g.wc.as_slice().unwrap());
        update(5, d.b2.as_slice_mut().unwrap(), g.b2.as_slice().unwrap());
        update(6, d.w3.as_slice_mut().unwrap(), g.w3.as_slice().unwrap());
        update(7, d.b3.as_slice_mut().unwrap(), g.b3.as_slice().unwrap());
    }
}
