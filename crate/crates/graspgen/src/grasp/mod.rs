//! Hand-grasp generation: a conditional VAE mapping BPS object encodings to
//! hand articulation, one model per hand side.

mod cvae;

pub use cvae::{
    beta_schedule, kl_divergence, CvaeLoss, GraspCvae, CVAE_HIDDEN, DECODER_RAW_DIM,
    DEFAULT_BETA_KL, GRASP_CKPT_KIND, LATENT_DIM, LOGVAR_CLAMP,
};

use crate::body::Side;

#[derive(Debug, thiserror::Error)]
pub enum GraspError {
    #[error("dimension mismatch for {what}: expected {want}, got {got}")]
    DimMismatch {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("side mismatch: model is {want:?}, grasp is {got:?}")]
    SideMismatch { want: Side, got: Side },
    #[error("cannot train on an empty batch")]
    EmptyBatch,
    #[error("non-finite loss {loss} at optimizer step {step}")]
    NonFiniteLoss { step: u64, loss: f64 },
    #[error("wrong checkpoint: {0}")]
    WrongCheckpoint(String),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
}
