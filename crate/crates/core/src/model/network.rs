//! Five-level encoder-decoder with prompt-conditioned decoder stages.

use serde::{Deserialize, Serialize};

use super::config::{BlockKind, ModelConfig, LEVELS};
use super::layers::{Cim, Conv, FormerBlock};
use super::store::{Init, ParamId, ParameterStore};
use crate::conditioning::{Context, PromptEncoder, PromptVocabulary};
use crate::error::{contract_err, Result};
use crate::image::{crop, pad_reflect, ImageBuffer};
use crate::tensor::{Scalar, Shape, Tape, Tensor, Var};

/// Blocks of one stage with optional context modules after the first half
/// and after the last block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub blocks: Vec<FormerBlock>,
    pub cims: Vec<Cim>,
}

impl Stage {
    fn register(store: &mut ParameterStore, cfg: &ModelConfig, name: &str, level: usize, with_cim: bool) -> Result<Self> {
        let c = cfg.width(level);
        let heads = cfg.heads[level - 1];
        let blocks = (0..cfg.level_depths[level - 1])
            .map(|i| {
                let bname = format!("{name}.block{i}");
                match cfg.level_kinds[level - 1] {
                    BlockKind::ConvFormer => FormerBlock::register_conv(
                        store,
                        &bname,
                        c,
                        cfg.ca_reduction,
                        cfg.conv_block_expansion,
                        cfg.ffn_expansion,
                    ),
                    BlockKind::TransFormer => {
                        FormerBlock::register_attention(store, &bname, c, heads, cfg.ca_reduction, cfg.ffn_expansion)
                    }
                }
            })
            .collect::<Result<_>>()?;
        let cims = if with_cim {
            (0..cfg.cim_blocks_per_level)
                .map(|i| Cim::register(store, &format!("{name}.cim{i}"), c, cfg.context_dim, heads))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self { blocks, cims })
    }

    /// Context modules run after block `ceil(depth/2)` and after the last
    /// block; any further modules also run at the end.
    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], mut x: Var, ctx: Option<&Context>) -> Result<Var> {
        let mid = self.blocks.len().div_ceil(2);
        let mut pending = self.cims.iter();
        for (i, block) in self.blocks.iter().enumerate() {
            x = block.forward(tape, p, x)?;
            if i + 1 == mid && self.cims.len() > 1 {
                x = apply_cim(tape, p, x, pending.next(), ctx)?;
            }
        }
        for cim in pending {
            x = apply_cim(tape, p, x, Some(cim), ctx)?;
        }
        Ok(x)
    }
}

fn apply_cim<T: Scalar>(tape: &mut Tape<T>, p: &[Var], x: Var, cim: Option<&Cim>, ctx: Option<&Context>) -> Result<Var> {
    match (cim, ctx) {
        (Some(cim), Some(ctx)) => cim.forward(tape, p, x, ctx),
        (Some(_), None) => Err(contract_err!("this model needs a context embedding")),
        (None, _) => Ok(x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layout {
    head: Conv,
    /// Encoder levels 1–4.
    encoder: Vec<Stage>,
    /// Level `l` to `l+1`: unshuffle then 1×1 `4C_l → 2C_l`.
    down: Vec<Conv>,
    bottleneck: Stage,
    /// Level `l+1` to `l`: 1×1 `C_{l+1} → 4C_l` then shuffle.
    up: Vec<Conv>,
    /// Concatenated skip `2C_l → C_l`.
    fuse: Vec<Conv>,
    /// Decoder levels 1–4.
    decoder: Vec<Stage>,
    tail: Conv,
    prompt: PromptEncoder,
}

/// The restoration network, its parameters and prompt vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct UniProcessor {
    config: ModelConfig,
    vocab: PromptVocabulary,
    store: ParameterStore,
    layout: Layout,
}

impl UniProcessor {
    /// Fresh model. The tail convolution is zero so the model starts as the
    /// exact identity.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::with_vocabulary(config, PromptVocabulary::standard(), seed)
    }

    pub fn with_vocabulary(config: ModelConfig, vocab: PromptVocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParameterStore::new(seed);
        let layout = Self::register(&mut store, &config, vocab.len())?;
        Ok(Self {
            config,
            vocab,
            store,
            layout,
        })
    }

    fn register(store: &mut ParameterStore, cfg: &ModelConfig, vocab_size: usize) -> Result<Layout> {
        let c = cfg.base_width;
        let head = Conv::register(store, "head", 3, c, 3, 1)?;
        let mut encoder = Vec::new();
        let mut down = Vec::new();
        for level in 1..LEVELS {
            encoder.push(Stage::register(store, cfg, &format!("enc{level}"), level, false)?);
            let w = cfg.width(level);
            down.push(Conv::pointwise(store, &format!("down{level}"), 4 * w, 2 * w)?);
        }
        let bottleneck = Stage::register(store, cfg, "bottleneck", LEVELS, cfg.has_cim(LEVELS))?;
        let mut up = Vec::new();
        let mut fuse = Vec::new();
        let mut decoder = Vec::new();
        for level in 1..LEVELS {
            let w = cfg.width(level);
            up.push(Conv::pointwise(store, &format!("up{level}"), 2 * w, 4 * w)?);
            fuse.push(Conv::pointwise(store, &format!("fuse{level}"), 2 * w, w)?);
            decoder.push(Stage::register(store, cfg, &format!("dec{level}"), level, cfg.has_cim(level))?);
        }
        let tail = Conv::register_with(store, "tail", c, 3, 3, 1, Init::Zeros)?;
        let prompt = PromptEncoder::register(store, vocab_size, cfg.context_tokens, cfg.context_dim)?;
        Ok(Layout {
            head,
            encoder,
            down,
            bottleneck,
            up,
            fuse,
            decoder,
            tail,
            prompt,
        })
    }

    /// Reassembles a model from stored tensors (names and shapes must match
    /// the layout implied by `config` and `vocab`).
    pub fn from_parts(config: ModelConfig, vocab: PromptVocabulary, tensors: Vec<(String, Tensor<f32>)>) -> Result<Self> {
        let mut model = Self::with_vocabulary(config, vocab, 0)?;
        if tensors.len() != model.store.len() {
            return Err(crate::error::format_err!(
                "expected {} parameter tensors, found {}",
                model.store.len(),
                tensors.len()
            ));
        }
        for (i, (name, tensor)) in tensors.into_iter().enumerate() {
            if model.store.names()[i] != name {
                return Err(crate::error::format_err!(
                    "parameter {i} is {name:?}, expected {:?}",
                    model.store.names()[i]
                ));
            }
            if model.store.tensors()[i].shape() != tensor.shape() {
                return Err(crate::error::format_err!(
                    "parameter {name:?} has shape {}, expected {}",
                    tensor.shape(),
                    model.store.tensors()[i].shape()
                ));
            }
            model.store.tensors_mut()[i] = tensor;
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &PromptVocabulary {
        &self.vocab
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    pub fn prompt_encoder(&self) -> &PromptEncoder {
        &self.layout.prompt
    }

    pub fn tail_ids(&self) -> Vec<ParamId> {
        self.layout.tail.zeroing_ids()
    }

    /// Number of context interaction modules.
    pub fn cim_count(&self) -> usize {
        self.layout.bottleneck.cims.len() + self.layout.decoder.iter().map(|s| s.cims.len()).sum::<usize>()
    }

    /// Embeds prompts on the tape.
    pub fn encode_prompts<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], prompts: &[&str]) -> Result<Context> {
        self.layout.prompt.encode(tape, p, &self.vocab, prompts)
    }

    /// `I + R̂` without clipping, on an `(n, 3, h, w)` batch with `h`, `w`
    /// multiples of 16.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var, ctx: Option<&Context>) -> Result<Var> {
        let s = tape.shape(x);
        let m = self.config.size_multiple();
        if s.c != 3 || s.h % m != 0 || s.w % m != 0 {
            return Err(contract_err!("input {s} must be 3-channel with sides divisible by {m}"));
        }
        let l = &self.layout;
        let mut h = l.head.forward(tape, p, x)?;
        let mut skips = Vec::with_capacity(LEVELS - 1);
        for (stage, down) in l.encoder.iter().zip(&l.down) {
            h = stage.forward(tape, p, h, ctx)?;
            skips.push(h);
            let u = tape.pixel_unshuffle(h, 2)?;
            h = down.forward(tape, p, u)?;
        }
        h = l.bottleneck.forward(tape, p, h, ctx)?;
        for i in (0..LEVELS - 1).rev() {
            let u = l.up[i].forward(tape, p, h)?;
            let u = tape.pixel_shuffle(u, 2)?;
            let cat = tape.concat_channels(u, skips[i])?;
            h = l.fuse[i].forward(tape, p, cat)?;
            h = l.decoder[i].forward(tape, p, h, ctx)?;
        }
        let residual = l.tail.forward(tape, p, h)?;
        tape.add(x, residual)
    }

    /// Inference on a batch tensor; returns the clipped restoration.
    pub fn infer_batch(&self, x: &Tensor<f32>, prompts: &[&str]) -> Result<Tensor<f32>> {
        let mut tape = Tape::<f32>::new();
        let p = self.store.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let ctx = self.encode_prompts(&mut tape, &p, prompts)?;
        let out = self.forward(&mut tape, &p, xv, Some(&ctx))?;
        let mut out = tape.value(out).clone();
        for v in out.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(out)
    }

    /// Restores one image of any size: reflect-pads to a multiple of 16,
    /// runs the network, clips and crops back.
    pub fn restore(&self, img: &ImageBuffer, prompt: &str) -> Result<ImageBuffer> {
        let (h, w) = img.dims();
        let m = self.config.size_multiple();
        let padded = pad_reflect(img, h.div_ceil(m) * m - h, w.div_ceil(m) * m - w);
        let x = images_to_tensor(std::slice::from_ref(&padded))?;
        let out = self.infer_batch(&x, &[prompt])?;
        let restored = tensor_to_images(&out)?.remove(0);
        crop(&restored, 0, 0, w, h)
    }
}

/// Stacks equally sized images into an `(n, 3, h, w)` tensor.
pub fn images_to_tensor(images: &[ImageBuffer]) -> Result<Tensor<f32>> {
    let first = images.first().ok_or_else(|| contract_err!("no images to stack"))?;
    let (h, w) = first.dims();
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for img in images {
        if img.dims() != (h, w) {
            return Err(contract_err!("images differ in size: {:?} vs {:?}", img.dims(), (h, w)));
        }
        for plane in img.to_planes() {
            data.extend(plane);
        }
    }
    Tensor::new(Shape::new(images.len(), 3, h, w), data)
}

/// Splits an `(n, 3, h, w)` tensor into images, clipping into `[0, 1]`.
pub fn tensor_to_images(t: &Tensor<f32>) -> Result<Vec<ImageBuffer>> {
    let s = t.shape();
    if s.c != 3 {
        return Err(contract_err!("expected 3 channels, got {s}"));
    }
    let plane = s.plane();
    t.data()
        .chunks(3 * plane)
        .map(|item| {
            let planes = [
                item[..plane].to_vec(),
                item[plane..2 * plane].to_vec(),
                item[2 * plane..].to_vec(),
            ];
            ImageBuffer::from_planes(s.h, s.w, &planes)
        })
        .collect()
}
