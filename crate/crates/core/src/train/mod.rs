//! Dataset preparation, batch sampling, optimization and evaluation.

mod config;
mod eval;
mod optim;
mod patches;
mod sampler;
mod trainer;

pub use config::{Profile, TrainConfig};
pub use eval::{load_testset, ModelRestorer};
pub use optim::{cosine_lr, AdamW};
pub use patches::{build_patches, grid_positions, PatchEntry, PatchManifest, MANIFEST_FILE};
pub use sampler::{item_seed, sample_batch, sample_item, Batch};
pub use trainer::{loss_log_csv, train, LossRecord, TrainOutcome, Trainer};
