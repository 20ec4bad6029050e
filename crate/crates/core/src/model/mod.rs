//! The restoration network: configuration, parameters, layers and
//! checkpoints.

mod checkpoint;
mod config;
pub mod layers;
mod network;
mod store;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, OptimizerState, MAGIC, VERSION,
};
pub use config::{BlockKind, ModelConfig, LEVELS};
pub use network::{images_to_tensor, tensor_to_images, Stage, UniProcessor};
pub use store::{Init, ParamId, ParameterStore};
