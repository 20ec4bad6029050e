//! The optimization loop.

use std::fmt::Write as _;

use log::info;
use serde_json::json;

use super::config::TrainConfig;
use super::optim::{cosine_lr, AdamW};
use super::sampler::{item_seed, sample_batch, Batch};
use crate::error::{contract_err, Error, Result};
use crate::image::ImageBuffer;
use crate::model::{Checkpoint, OptimizerState, UniProcessor};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

/// `step,lr,loss` with shortest round-trip number formatting.
pub fn loss_log_csv(log: &[LossRecord]) -> String {
    let mut out = String::from("step,lr,loss\n");
    for r in log {
        writeln!(out, "{},{:e},{:e}", r.step, r.lr, r.loss).expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LossRecord>,
}

/// Model, optimizer state and step counter.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub model: UniProcessor,
    pub state: OptimizerState,
    adamw: AdamW,
}

impl Trainer {
    /// Fresh identity-initialized model seeded from `cfg.seed`.
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let model = UniProcessor::new(cfg.model.clone(), cfg.seed)?;
        Ok(Self::from_model(cfg, model))
    }

    pub fn from_model(cfg: TrainConfig, model: UniProcessor) -> Self {
        let state = AdamW::init_state(model.store().tensors());
        let adamw = AdamW::new(cfg.weight_decay);
        Self {
            cfg,
            model,
            state,
            adamw,
        }
    }

    /// Mean L1 loss of the current model on `batch`, without updating.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        let mut tape = Tape::<f32>::new();
        let p = self.model.store().bind(&mut tape, false);
        let loss = self.forward_loss(&mut tape, &p, batch)?;
        Ok(tape.value(loss).item() as f64)
    }

    fn forward_loss(&self, tape: &mut Tape<f32>, p: &[crate::tensor::Var], batch: &Batch) -> Result<crate::tensor::Var> {
        let prompts: Vec<&str> = batch.prompts.iter().map(String::as_str).collect();
        let x = tape.constant(batch.degraded.clone());
        let target = tape.constant(batch.clean.clone());
        let ctx = self.model.encode_prompts(tape, p, &prompts)?;
        let out = self.model.forward(tape, p, x, Some(&ctx))?;
        tape.l1_loss(out, target)
    }

    /// One AdamW step at learning rate `lr`; returns the loss before the
    /// update.
    pub fn step(&mut self, batch: &Batch, lr: f64) -> Result<f64> {
        let mut tape = Tape::<f32>::new();
        let p = self.model.store().bind(&mut tape, true);
        let loss = self.forward_loss(&mut tape, &p, batch)?;
        let value = tape.value(loss).item() as f64;
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {value} at optimizer step {}", self.state.step)));
        }
        let mut grads = tape.backward(loss)?;
        let grads: Vec<Tensor<f32>> = p
            .iter()
            .zip(self.model.store().tensors())
            .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        self.adamw.step(self.model.store_mut().tensors_mut(), &grads, &mut self.state, lr)?;
        Ok(value)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.state.clone()),
            meta: json!({ "train_config": self.cfg, "step": self.state.step }),
        }
    }

    /// Runs every epoch over `patches`. `on_checkpoint(step, ckpt)` is called
    /// every `cfg.checkpoint_every` steps.
    pub fn run(
        &mut self,
        patches: &[ImageBuffer],
        mut on_checkpoint: impl FnMut(usize, &Checkpoint) -> Result<()>,
    ) -> Result<Vec<LossRecord>> {
        if patches.is_empty() {
            return Err(contract_err!("no training patches"));
        }
        let per_epoch = self.cfg.steps_per_epoch(patches.len());
        let total = self.cfg.total_steps(patches.len());
        let mut log = Vec::with_capacity(total);
        for epoch in 0..self.cfg.epochs {
            for s in 0..per_epoch {
                let step = epoch * per_epoch + s;
                let first = s * self.cfg.batch_size;
                let lr = cosine_lr(step, total, self.cfg.lr_max, self.cfg.lr_min);
                let batch = sample_batch(patches, &self.cfg, epoch, first)?;
                let loss = self.step(&batch, lr).map_err(|e| match e {
                    Error::Numerical(msg) => Error::Numerical(format!(
                        "{msg} (step {step}, lr {lr:e}, batch seed {:#x})",
                        item_seed(self.cfg.seed, epoch, first)
                    )),
                    other => other,
                })?;
                log.push(LossRecord { step, lr, loss });
                if step % 50 == 0 || step + 1 == total {
                    info!("step {step}/{total} lr {lr:.3e} loss {loss:.5}");
                }
                if let Some(every) = self.cfg.checkpoint_every {
                    if (step + 1) % every == 0 && step + 1 != total {
                        on_checkpoint(step + 1, &self.checkpoint())?;
                    }
                }
            }
        }
        Ok(log)
    }
}

/// Trains a fresh model on `patches` and returns the final checkpoint and
/// the per-step loss log.
pub fn train(cfg: &TrainConfig, patches: &[ImageBuffer]) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg.clone())?;
    let log = trainer.run(patches, |_, _| Ok(()))?;
    Ok(TrainOutcome {
        checkpoint: trainer.checkpoint(),
        log,
    })
}
