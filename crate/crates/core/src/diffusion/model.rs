//! The embedding-space diffusion model: decoder, forward process, reverse
//! step, and checkpoint serialization.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::textio::{escape, expect_header, parse_field, unescape, Lines};
use crate::unigram::UnigramMatrix;
use crate::vocab::{TokenId, Vocabulary};

use super::denoiser::{self, DenoiserParams};
use super::schedule::NoiseSchedule;
use super::Latent;

const CHECKPOINT_HEADER: &str = "checkpoint v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Sequence length in tokens.
    pub seq_len: usize,
    /// Embedding (latent) dimension.
    pub embed_dim: usize,
    /// Hidden width of the denoiser MLP.
    pub hidden_dim: usize,
    /// Diffusion timesteps T.
    pub timesteps: usize,
    /// Decoder softmax temperature.
    pub tau: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seq_len: 16,
            embed_dim: 16,
            hidden_dim: 128,
            timesteps: 200,
            tau: 0.5,
            beta_min: 1e-4,
            beta_max: 0.02,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidParameter("model dimensions must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter("tau must be positive".into()));
        }
        NoiseSchedule::linear(self.timesteps, self.beta_min, self.beta_max).map(|_| ())
    }
}

/// Embedding table, denoiser weights, decoder temperature and noise schedule.
/// Immutable during sampling; cheap to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    config: ModelConfig,
    vocab: Vocabulary,
    embeddings: Array2<f64>,
    denoiser: DenoiserParams,
    schedule: NoiseSchedule,
}

pub(crate) fn standard_normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

impl DiffusionModel {
    /// Fresh model with unit-norm random embeddings and Kaiming-initialized
    /// denoiser weights.
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut embeddings = standard_normal(&mut rng, vocab.len(), config.embed_dim);
        for mut row in embeddings.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        let denoiser = DenoiserParams::init(config.embed_dim, config.hidden_dim, &mut rng);
        let schedule = NoiseSchedule::linear(config.timesteps, config.beta_min, config.beta_max)?;
        Ok(Self {
            config,
            vocab,
            embeddings,
            denoiser,
            schedule,
        })
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        vocab: Vocabulary,
        embeddings: Array2<f64>,
        denoiser: DenoiserParams,
    ) -> Result<Self> {
        config.validate()?;
        let schedule = NoiseSchedule::linear(config.timesteps, config.beta_min, config.beta_max)?;
        Ok(Self {
            config,
            vocab,
            embeddings,
            denoiser,
            schedule,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn embeddings(&self) -> &Array2<f64> {
        &self.embeddings
    }

    pub(crate) fn embeddings_mut(&mut self) -> &mut Array2<f64> {
        &mut self.embeddings
    }

    pub(crate) fn denoiser(&self) -> &DenoiserParams {
        &self.denoiser
    }

    pub(crate) fn denoiser_mut(&mut self) -> &mut DenoiserParams {
        &mut self.denoiser
    }

    /// Clean latent for a token sequence: one embedding row per position.
    pub fn embed(&self, tokens: &[TokenId]) -> Result<Latent> {
        if tokens.len() != self.config.seq_len {
            return Err(Error::DimensionMismatch {
                what: "token sequence",
                expected: self.config.seq_len,
                actual: tokens.len(),
            });
        }
        let mut x = Array2::zeros((tokens.len(), self.config.embed_dim));
        for (k, &t) in tokens.iter().enumerate() {
            if t >= self.vocab.len() {
                return Err(Error::InvalidTokenId(t));
            }
            x.row_mut(k).assign(&self.embeddings.row(t));
        }
        Ok(x)
    }

    fn check_latent(&self, x: &Latent) -> Result<()> {
        if x.dim() != (self.config.seq_len, self.config.embed_dim) {
            return Err(Error::DimensionMismatch {
                what: "latent rows",
                expected: self.config.seq_len,
                actual: x.nrows(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent"));
        }
        Ok(())
    }

    /// Decoder: per position, softmax over tokens of the scaled dot product
    /// with every embedding row. Rows always sum to one, whatever the latent
    /// magnitude.
    pub fn decode(&self, x: &Latent) -> Result<UnigramMatrix> {
        self.check_latent(x)?;
        let logits = self.decode_logits(x);
        let mut probs = logits;
        for mut row in probs.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        UnigramMatrix::new(probs)
    }

    pub(crate) fn decode_logits(&self, x: &Latent) -> Array2<f64> {
        x.dot(&self.embeddings.t()) / self.config.tau
    }

    /// Most likely token at every position of a decoded latent.
    pub fn argmax_tokens(&self, x: &Latent) -> Result<Vec<TokenId>> {
        let u = self.decode(x)?;
        Ok((0..u.seq_len())
            .map(|k| {
                let row = u.row(k);
                let mut best = 0;
                for (i, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect())
    }

    /// Forward process: `sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise`.
    pub fn q_sample(&self, x0: &Latent, t: usize, noise: &Latent) -> Latent {
        let ab = self.schedule.alpha_bar(t);
        x0 * ab.sqrt() + noise * (1.0 - ab).sqrt()
    }

    /// Denoiser prediction of the clean latent from `x_t`.
    pub fn predict_x0(&self, x_t: &Latent, t: usize) -> Latent {
        denoiser::forward(&self.denoiser, x_t, t, self.config.timesteps).0
    }

    /// Standard DDPM posterior mean of `(x0_pred, x_t)` at step `t`. At the
    /// final step (t = 1) this is `x0_pred` itself.
    pub fn posterior_mean(&self, x_t: &Latent, x0_pred: &Latent, t: usize) -> Latent {
        posterior_mean_with(&self.schedule, x_t, x0_pred, t)
    }

    /// One reverse step: posterior mean plus `sigma_t * noise`.
    pub fn ddpm_step(&self, x_t: &Latent, t: usize, noise: &Latent) -> Latent {
        let x0 = self.predict_x0(x_t, t);
        let mean = self.posterior_mean(x_t, &x0, t);
        mean + noise * self.schedule.sigma(t)
    }

    /// Serialize parameters and configuration; floats are stored as hex bit
    /// patterns so loading restores the model exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_HEADER);
        out.push('\n');
        let c = &self.config;
        out.push_str(&format!("seq_len {}\n", c.seq_len));
        out.push_str(&format!("embed_dim {}\n", c.embed_dim));
        out.push_str(&format!("hidden_dim {}\n", c.hidden_dim));
        out.push_str(&format!("timesteps {}\n", c.timesteps));
        out.push_str(&format!("tau {}\n", c.tau));
        out.push_str(&format!("beta_min {}\n", c.beta_min));
        out.push_str(&format!("beta_max {}\n", c.beta_max));
        out.push_str(&format!(
            "alphabet {}\n",
            escape(&self.vocab.alphabet().to_string())
        ));
        match self.vocab.pad() {
            Some(p) => out.push_str(&format!("pad {p}\n")),
            None => out.push_str("pad none\n"),
        }
        out.push_str(&format!("vocab {}\n", self.vocab.len()));
        for tok in self.vocab.tokens() {
            out.push_str(&format!("tok {}\n", escape(tok)));
        }
        let d = &self.denoiser;
        write_param(&mut out, "embeddings", self.embeddings.iter());
        write_param(&mut out, "w1", d.w1.iter());
        write_param(&mut out, "b1", d.b1.iter());
        write_param(&mut out, "w2", d.w2.iter());
        write_param(&mut out, "wc", d.wc.iter());
        write_param(&mut out, "b2", d.b2.iter());
        write_param(&mut out, "w3", d.w3.iter());
        write_param(&mut out, "b3", d.b3.iter());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        expect_header(&mut lines, CHECKPOINT_HEADER)?;
        let mut scalar = |tag: &str| -> Result<String> {
            let fields = lines.tagged(tag)?;
            if fields.len() != 1 {
                return Err(lines.error(format!("{tag} line takes one field")));
            }
            Ok(fields[0].to_string())
        };
        let seq_len: usize = scalar("seq_len")?.parse().map_err(|_| Error::Parse {
            line: 0,
            message: "bad seq_len".into(),
        })?;
        let embed_dim: usize = parse_scalar(&mut scalar, "embed_dim")?;
        let hidden_dim: usize = parse_scalar(&mut scalar, "hidden_dim")?;
        let timesteps: usize = parse_scalar(&mut scalar, "timesteps")?;
        let tau: f64 = parse_scalar(&mut scalar, "tau")?;
        let beta_min: f64 = parse_scalar(&mut scalar, "beta_min")?;
        let beta_max: f64 = parse_scalar(&mut scalar, "beta_max")?;
        let alphabet = crate::alphabet::Alphabet::from_str(&unescape(&scalar("alphabet")?)?)?;
        let pad_field = scalar("pad")?;
        let pad: Option<usize> = match pad_field.as_str() {
            "none" => None,
            f => Some(f.parse().map_err(|_| Error::Parse {
                line: 0,
                message: "bad pad id".into(),
            })?),
        };
        let vocab_len: usize = parse_scalar(&mut scalar, "vocab")?;
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            tokens.push(unescape(&scalar("tok")?)?);
        }
        let vocab = Vocabulary::new(alphabet, tokens, pad)?;

        let config = ModelConfig {
            seq_len,
            embed_dim,
            hidden_dim,
            timesteps,
            tau,
            beta_min,
            beta_max,
        };
        let din = denoiser::input_dim(embed_dim);
        let embeddings = read_param(&mut lines, "embeddings", vocab_len * embed_dim)?;
        let w1 = read_param(&mut lines, "w1", hidden_dim * din)?;
        let b1 = read_param(&mut lines, "b1", hidden_dim)?;
        let w2 = read_param(&mut lines, "w2", hidden_dim * hidden_dim)?;
        let wc = read_param(&mut lines, "wc", hidden_dim * hidden_dim)?;
        let b2 = read_param(&mut lines, "b2", hidden_dim)?;
        let w3 = read_param(&mut lines, "w3", embed_dim * hidden_dim)?;
        let b3 = read_param(&mut lines, "b3", embed_dim)?;
        let to2 = |v: Vec<f64>, r: usize, c: usize| {
            Array2::from_shape_vec((r, c), v).map_err(|_| Error::Parse {
                line: 0,
                message: "parameter shape mismatch".into(),
            })
        };
        let denoiser = DenoiserParams {
            w1: to2(w1, hidden_dim, din)?,
            b1: Array1::from_vec(b1),
            w2: to2(w2, hidden_dim, hidden_dim)?,
            wc: to2(wc, hidden_dim, hidden_dim)?,
            b2: Array1::from_vec(b2),
            w3: to2(w3, embed_dim, hidden_dim)?,
            b3: Array1::from_vec(b3),
        };
        Self::from_parts(config, vocab, to2(embeddings, vocab_len, embed_dim)?, denoiser)
    }
}

/// Posterior mean against an explicit (possibly respaced) schedule.
pub(crate) fn posterior_mean_with(
    schedule: &NoiseSchedule,
    x_t: &Latent,
    x0_pred: &Latent,
    t: usize,
) -> Latent {
    if t == 1 {
        return x0_pred.clone();
    }
    let (c_x0, c_xt) = schedule.posterior_coefficients(t);
    x0_pred * c_x0 + x_t * c_xt
}

fn parse_scalar<T: std::str::FromStr>(
    scalar: &mut impl FnMut(&str) -> Result<String>,
    tag: &str,
) -> Result<T> {
    scalar(tag)?.parse().map_err(|_| Error::Parse {
        line: 0,
        message: format!("bad {tag}"),
    })
}

fn write_param<'a>(out: &mut String, name: &str, values: impl Iterator<Item = &'a f64>) {
    let values: Vec<&f64> = values.collect();
    out.push_str(&format!("param {name} {}\n", values.len()));
    for chunk in values.chunks(8) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

fn read_param(lines: &mut Lines<'_>, name: &str, len: usize) -> Result<Vec<f64>> {
    let fields = lines.tagged("param")?;
    if fields.len() != 2 || fields[0] != name {
        return Err(lines.error(format!("expected param {name}")));
    }
    let stored: usize = parse_field(lines, fields[1], "param length")?;
    if stored != len {
        return Err(Error::DimensionMismatch {
            what: "checkpoint parameter",
            expected: len,
            actual: stored,
        });
    }
    let mut values = Vec::with_capacity(len);
    while values.len() < len {
        let line = lines.next_line()?;
        for field in line.split(' ') {
            let bits = u64::from_str_radix(field, 16)
                .map_err(|_| lines.error(format!("bad hex float {field:?}")))?;
            values.push(f64::from_bits(bits));
        }
    }
    if values.len() != len {
        return Err(lines.error("parameter length mismatch"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;

    pub(crate) fn tiny_model() -> DiffusionModel {
        let alphabet = Alphabet::from_str("ab#").unwrap();
        let vocab = Vocabulary::new(alphabet, ["a", "b", "#"], Some(2)).unwrap();
        let config = ModelConfig {
            seq_len: 4,
            embed_dim: 6,
            hidden_dim: 16,
            timesteps: 50,
            ..ModelConfig::default()
        };
        DiffusionModel::new(config, vocab, 7).unwrap()
    }

    #[test]
    fn decode_is_row_stochastic_at_any_magnitude() {
        let m = tiny_model();
        for scale in [0.0, 1.0, 1e6] {
            let x = Array2::from_elem((4, 6), scale);
            let u = m.decode(&x).unwrap();
            for k in 0..4 {
                let s: f64 = u.row(k).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_latent_decodes_uniform() {
        let m = tiny_model();
        let x = Array2::zeros((4, 6));
        let u = m.decode(&x).unwrap();
        for k in 0..4 {
            for t in 0..3 {
                assert!((u.get(k, t) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embed_then_argmax_recovers_tokens() {
        let m = tiny_model();
        let tokens = vec![1, 0, 2, 1];
        let x = m.embed(&tokens).unwrap();
        assert_eq!(m.argmax_tokens(&x).unwrap(), tokens);
    }

    #[test]
    fn non_finite_latent_is_rejected() {
        let m = tiny_model();
        let mut x = Array2::zeros((4, 6));
        x[[1, 2]] = f64::NAN;
        assert!(matches!(m.decode(&x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn q_sample_interpolates() {
        let m = tiny_model();
        let x0 = m.embed(&[0, 1, 0, 1]).unwrap();
        let noise = Array2::from_elem((4, 6), 0.5);
        // Nearly-clean schedule keeps x0 nearly intact.
        let near = NoiseSchedule::linear(10, 1e-12, 1e-12).unwrap();
        let ab = near.alpha_bar(1);
        assert!((ab - 1.0).abs() < 1e-9);
        let xt = m.q_sample(&x0, 1, &noise);
        let expect = &x0 * m.schedule().alpha_bar(1).sqrt()
            + &noise * (1.0 - m.schedule().alpha_bar(1)).sqrt();
        assert_eq!(xt, expect);
        // At the noisiest step most of the signal is gone for long schedules.
        let t = m.schedule().timesteps();
        let xt = m.q_sample(&x0, t, &noise);
        assert!(m.schedule().alpha_bar(t) < 0.8);
        assert!(xt.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn posterior_mean_at_final_step_is_x0_pred() {
        let m = tiny_model();
        let x_t = Array2::from_elem((4, 6), 0.3);
        let x0 = Array2::from_elem((4, 6), -0.7);
        assert_eq!(m.posterior_mean(&x_t, &x0, 1), x0);
    }

    #[test]
    fn posterior_mean_is_the_stated_linear_combination() {
        let m = tiny_model();
        let x = Array2::from_elem((4, 6), 1.0);
        let t = 20;
        let (c0, ct) = m.schedule().posterior_coefficients(t);
        // With x0_pred == x_t the output is (c0 + ct) x, the fixed point
        // whenever the coefficients sum to one.
        let mean = m.posterior_mean(&x, &x, t);
        let expect = &x * (c0 + ct);
        assert_eq!(mean, expect);
    }

    #[test]
    fn ddpm_step_with_zero_sigma_is_deterministic() {
        let m = tiny_model();
        let x = Array2::from_elem((4, 6), 0.2);
        let noise = Array2::from_elem((4, 6), 3.0);
        // sigma(1) == 0, so the noise cannot leak in.
        let a = m.ddpm_step(&x, 1, &noise);
        let b = m.ddpm_step(&x, 1, &Array2::zeros((4, 6)));
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_noise_difference_is_linear_in_sigma() {
        let m = tiny_model();
        let x = Array2::from_elem((4, 6), 0.2);
        let t = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e1 = standard_normal(&mut rng, 4, 6);
        let e2 = standard_normal(&mut rng, 4, 6);
        let a = m.ddpm_step(&x, t, &e1);
        let b = m.ddpm_step(&x, t, &e2);
        let diff = &a - &b;
        let expect = (&e1 - &e2) * m.schedule().sigma(t);
        for (d, e) in diff.iter().zip(expect.iter()) {
            assert!((d - e).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let m = tiny_model();
        let text = m.to_text();
        let back = DiffusionModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn checkpoint_version_mismatch_errors() {
        let text = tiny_model().to_text().replace("checkpoint v1", "checkpoint v9");
        assert!(matches!(
            DiffusionModel::from_text(&text),
            Err(Error::FormatVersion { .. })
        ));
    }

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
}
