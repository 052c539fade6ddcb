//! Denoising diffusion over 132-d pose vectors, conditioned on object
//! location and handedness: cosine schedule, ε-prediction training, and
//! ancestral sampling with rotation-block validation.

mod model;
mod schedule;

pub use model::{
    scene_seed, time_embedding, train_step, Condition, PoseDiffusion, Standardization,
    CONDITION_DIM, DENOISER_HIDDEN, MAX_SAMPLE_RETRIES, POSE_CKPT_KIND, TIME_EMBED_DIM,
};
pub use schedule::{NoiseSchedule, BETA_CLIP, COSINE_S, DEFAULT_STEPS};

#[derive(Debug, thiserror::Error)]
pub enum DiffusionError {
    #[error("step {t} outside 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },
    #[error("dimension mismatch for {what}: expected {want}, got {got}")]
    DimMismatch {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("cannot fit standardization or train on an empty corpus")]
    EmptyCorpus,
    #[error("non-finite loss {loss} at optimizer step {step}")]
    NonFiniteLoss { step: u64, loss: f64 },
    #[error("sampling produced degenerate rotation blocks after {attempts} attempts")]
    DegenerateSample { attempts: usize },
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
}
