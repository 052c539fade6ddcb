//! Small dense-network toolkit: f32-parameter MLPs with f64 math, Adam,
//! deterministic parallel batch accumulation, checkpoints, and training logs.

mod adam;
mod batch;
mod checkpoint;
mod logger;
mod mlp;

pub use adam::AdamState;
pub use batch::{parallel_accumulate, BatchAccum, ACCUM_CHUNKS};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use logger::{read_train_log, TrainLogger, TrainRecord};
pub use mlp::{Activation, ForwardCache, Layer, Mlp};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("bad network architecture: {0}")]
    BadArchitecture(String),
    #[error("dimension mismatch for {what}: expected {want}, got {got}")]
    DimMismatch {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
