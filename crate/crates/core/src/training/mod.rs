//! Optimization: Adam, the training loop, and test-time latent fitting.

pub mod adam;
pub mod fit;
pub mod train;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use fit::{fit_latent, FitConfig, FitResult};
pub use train::{
    epoch_batches, step_batch, stream_seed, train, train_resume, train_step, LogRow, TrainConfig, TrainLog, TrainOutput,
    TrainStatus,
};
