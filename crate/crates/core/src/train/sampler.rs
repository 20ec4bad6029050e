//! On-the-fly training batches: crop, augment, degrade, prompt.

use rayon::prelude::*;

use super::config::TrainConfig;
use crate::conditioning::kind_prompt;
use crate::degrade::{apply, hash64, sample_spec, DegradationSpec, Prng};
use crate::error::{contract_err, Result};
use crate::image::{crop, flip_h, rot90, ImageBuffer};
use crate::model::images_to_tensor;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Batch {
    pub degraded: Tensor<f32>,
    pub clean: Tensor<f32>,
    pub prompts: Vec<String>,
    pub specs: Vec<DegradationSpec>,
    /// Patch index each item was cut from.
    pub sources: Vec<usize>,
}

/// Seed of item `item` (counted from the start of the epoch).
pub fn item_seed(seed: u64, epoch: usize, item: usize) -> u64 {
    hash64(&[seed, epoch as u64, item as u64])
}

/// One training pair from its own seed: uniform patch, random crop,
/// optional flip / quarter turn, a fresh degradation and its prompt.
///
/// With probability `compose_prob` a second spec of another kind is drawn
/// first and applied underneath; the target then keeps it, so only the
/// returned (prompted) degradation is to be removed.
pub fn sample_item(patches: &[ImageBuffer], cfg: &TrainConfig, seed: u64) -> Result<(ImageBuffer, ImageBuffer, DegradationSpec, usize)> {
    let mut rng = Prng::new(seed, "train-item");
    let src = rng.below(patches.len() as u64) as usize;
    let patch = &patches[src];
    let (h, w) = patch.dims();
    let ps = cfg.patch_size;
    if h < ps || w < ps {
        return Err(contract_err!("patch {src} is {w}×{h}, smaller than the {ps} crop"));
    }
    let y = rng.below((h - ps + 1) as u64) as usize;
    let x = rng.below((w - ps + 1) as u64) as usize;
    let mut clean = crop(patch, x, y, ps, ps)?;
    if cfg.augment {
        if rng.bernoulli(0.5) {
            clean = flip_h(&clean);
        }
        clean = rot90(&clean, rng.below(4) as i32);
    }
    let spec = sample_spec(&mut rng, &cfg.kinds, cfg.severity_range)?;
    if cfg.compose_prob > 0.0 && rng.bernoulli(cfg.compose_prob) {
        let others: Vec<_> = cfg.kinds.iter().copied().filter(|&k| k != spec.kind).collect();
        if !others.is_empty() {
            let keep = sample_spec(&mut rng, &others, cfg.severity_range)?;
            clean = apply(&clean, &keep)?;
        }
    }
    let degraded = apply(&clean, &spec)?;
    Ok((degraded, clean, spec, src))
}

/// Items `first_item .. first_item + batch_size` of `epoch`, built in
/// parallel; each depends only on its own seed.
pub fn sample_batch(patches: &[ImageBuffer], cfg: &TrainConfig, epoch: usize, first_item: usize) -> Result<Batch> {
    if patches.is_empty() {
        return Err(contract_err!("no training patches"));
    }
    let items = (first_item..first_item + cfg.batch_size)
        .into_par_iter()
        .map(|i| sample_item(patches, cfg, item_seed(cfg.seed, epoch, i)))
        .collect::<Result<Vec<_>>>()?;
    let degraded: Vec<ImageBuffer> = items.iter().map(|it| it.0.clone()).collect();
    let clean: Vec<ImageBuffer> = items.iter().map(|it| it.1.clone()).collect();
    Ok(Batch {
        degraded: images_to_tensor(&degraded)?,
        clean: images_to_tensor(&clean)?,
        prompts: items.iter().map(|it| kind_prompt(it.2.kind)).collect(),
        specs: items.iter().map(|it| it.2.clone()).collect(),
        sources: items.iter().map(|it| it.3).collect(),
    })
}
