//! Text-conditioned all-in-one image restoration at desk scale.
//!
//! The crate bundles everything the `uniproc` CLI needs:
//!
//! - [`tensor`]: rank-4 tensors, a reverse-mode tape and a gradient checker
//! - [`image`]: float RGB buffers, PPM I/O, color spaces and resampling
//! - [`degrade`]: the seeded, parametric degradation bank
//! - [`metrics`]: PSNR/SSIM and per-degradation evaluation reports
//! - [`model`]: the encoder-decoder restoration network and checkpoints
//! - [`conditioning`]: prompt tokenization and context embeddings
//! - [`train`]: patch manifests, batch sampling, AdamW and the training loop

pub mod check;
pub mod conditioning;
pub mod degrade;
pub mod error;
pub mod image;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
