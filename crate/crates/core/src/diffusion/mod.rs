//! A desk-scale continuous diffusion language model: embedding-space DDPM
//! with a softmax decoder, supporting plain and constraint-guided sampling.

mod denoiser;
mod guidance;
mod model;
mod schedule;
mod train;

/// A latent is an `l x d` matrix of position embeddings traversing the
/// diffusion trajectory. Entries must stay finite; operations that decode or
/// step a latent check this.
pub type Latent = ndarray::Array2<f64>;

pub use guidance::{
    guidance_gradient, guided_step, sample, sample_batch, GuidanceConfig, SampleOutput,
};
pub use model::{DiffusionModel, ModelConfig};
pub use schedule::NoiseSchedule;
pub use train::{train, TrainConfig, TrainOutcome};
