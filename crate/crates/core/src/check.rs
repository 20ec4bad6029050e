//! Named double-precision gradient checks over every differentiable op, the
//! network blocks and a tiny full model.

use crate::conditioning::PromptEncoder;
use crate::conditioning::PromptVocabulary;
use crate::degrade::Prng;
use crate::error::{config_err, Result};
use crate::model::layers::{ChannelAttention, Cim, ConvBlock, FormerBlock, Gcffn};
use crate::model::{ModelConfig, ParameterStore, UniProcessor};
use crate::tensor::gradcheck::{grad_check, GradCheckOptions};
use crate::tensor::{GradCheckReport, Shape, Tape, Tensor, Var};

/// Cases run by `all`, in order.
pub const SUITE: &[&str] = &[
    "add",
    "sub",
    "mul",
    "scale",
    "mul_channel",
    "concat_channels",
    "sum",
    "mean",
    "conv2d",
    "conv2d_strided_grouped",
    "layer_norm",
    "gelu",
    "softmax",
    "global_avg_pool",
    "pixel_shuffle",
    "pixel_unshuffle",
    "grn",
    "l1_loss",
    "embed_tokens",
    "attention",
    "attention_masked",
    "channel_attention",
    "gcffn",
    "conv_block",
    "convformer_block",
    "transformer_block",
    "cim",
    "encode_prompt",
    "model_tiny",
];

/// A case whose backward is deliberately wrong by 1%; it must fail.
pub const NEGATIVE_CONTROL: &str = "perturbed_backward";

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub report: GradCheckReport,
}

/// Runs `all` or a single named case.
pub fn run(selection: &str) -> Result<Vec<CaseResult>> {
    let names: Vec<&str> = if selection == "all" { SUITE.to_vec() } else { vec![selection] };
    names
        .into_iter()
        .map(|name| {
            Ok(CaseResult {
                name: name.to_string(),
                report: run_case(name)?,
            })
        })
        .collect()
}

pub fn is_known(name: &str) -> bool {
    name == "all" || name == NEGATIVE_CONTROL || SUITE.contains(&name)
}

type Loss = dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>;

/// Inputs, scalar loss and options of one check.
pub struct Case {
    pub inputs: Vec<Tensor<f64>>,
    pub loss: Box<Loss>,
    pub options: GradCheckOptions,
}

impl Case {
    pub fn run(&self) -> Result<GradCheckReport> {
        grad_check(&self.loss, &self.inputs, self.options)
    }
}

pub fn run_case(name: &str) -> Result<GradCheckReport> {
    case(name)?.run()
}

pub fn case(name: &str) -> Result<Case> {
    let mut rng = Prng::new(0x6772_6164, name);
    let s = Shape::new;
    let opts = GradCheckOptions::default();
    let (inputs, f, opts): (Vec<Tensor<f64>>, Box<Loss>, GradCheckOptions) = match name {
        "add" | "sub" | "mul" => {
            let op = name.to_string();
            let xs = vec![rand(&mut rng, s(2, 3, 4, 5), 1.0), rand(&mut rng, s(2, 3, 4, 5), 1.0)];
            let f = move |t: &mut Tape<f64>, v: &[Var]| {
                let y = match op.as_str() {
                    "add" => t.add(v[0], v[1])?,
                    "sub" => t.sub(v[0], v[1])?,
                    _ => t.mul(v[0], v[1])?,
                };
                project(t, y, 1)
            };
            (xs, Box::new(f), opts)
        }
        "scale" => unary(&mut rng, s(2, 3, 4, 4), opts, |t, x| Ok(t.scale(x, -1.7))),
        "sum" => unary(&mut rng, s(2, 3, 4, 4), opts, |t, x| {
            let sq = t.mul(x, x)?;
            Ok(t.sum(sq))
        }),
        "mean" => unary(&mut rng, s(2, 3, 4, 4), opts, |t, x| {
            let sq = t.mul(x, x)?;
            Ok(t.mean(sq))
        }),
        "gelu" => unary(&mut rng, s(2, 3, 4, 4), opts, |t, x| {
            let x = t.scale(x, 3.0);
            Ok(t.gelu(x))
        }),
        "softmax" => unary(&mut rng, s(2, 3, 4, 5), opts, |t, x| {
            let a = t.softmax(x, 1)?;
            let b = t.softmax(x, 3)?;
            t.add(a, b)
        }),
        "global_avg_pool" => unary(&mut rng, s(2, 3, 4, 5), opts, |t, x| Ok(t.global_avg_pool(x))),
        "pixel_shuffle" => unary(&mut rng, s(2, 8, 3, 3), opts, |t, x| t.pixel_shuffle(x, 2)),
        "pixel_unshuffle" => unary(&mut rng, s(2, 2, 4, 6), opts, |t, x| t.pixel_unshuffle(x, 2)),
        "mul_channel" => {
            let xs = vec![rand(&mut rng, s(2, 3, 4, 4), 1.0), rand(&mut rng, s(2, 3, 1, 1), 1.0)];
            let f = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.mul_channel(v[0], v[1])?;
                project(t, y, 2)
            };
            (xs, Box::new(f), opts)
        }
        "concat_channels" => {
            let xs = vec![rand(&mut rng, s(2, 3, 4, 4), 1.0), rand(&mut rng, s(2, 2, 4, 4), 1.0)];
            let f = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.concat_channels(v[0], v[1])?;
                project(t, y, 3)
            };
            (xs, Box::new(f), opts)
        }
        "conv2d" => {
            let xs = vec![
                rand(&mut rng, s(2, 3, 6, 7), 1.0),
                rand(&mut rng, s(4, 3, 3, 3), 0.5),
                rand(&mut rng, s(1, 4, 1, 1), 0.5),
            ];
            let f = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.conv2d(v[0], v[1], Some(v[2]), 1, 1, 1)?;
                project(t, y, 4)
            };
            (xs, Box::new(f), opts)
        }
        "conv2d_strided_grouped" => {
            let xs = vec![
                rand(&mut rng, s(1, 4, 7, 7), 1.0),
                rand(&mut rng, s(6, 2, 3, 3), 0.5),
                rand(&mut rng, s(1, 6, 1, 1), 0.5),
            ];
            let f = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.conv2d(v[0], v[1], Some(v[2]), 2, 1, 2)?;
                project(t, y, 5)
            };
            (xs, Box::new(f), opts)
        }
        "layer_norm" | "grn" => {
            let op = name.to_string();
            let xs = vec![
                rand(&mut rng, s(2, 4, 3, 3), 1.0),
                shift(rand(&mut rng, s(1, 4, 1, 1), 0.5), 1.0),
                rand(&mut rng, s(1, 4, 1, 1), 0.5),
            ];
            let f = move |t: &mut Tape<f64>, v: &[Var]| {
                let y = if op == "grn" {
                    t.grn(v[0], v[1], v[2])?
                } else {
                    t.layer_norm(v[0], v[1], v[2])?
                };
                project(t, y, 6)
            };
            (xs, Box::new(f), opts)
        }
        "l1_loss" => {
            // Offsets of at least 0.1 keep every difference away from the kink.
            let pred = rand(&mut rng, s(2, 3, 4, 4), 1.0);
            let target = Tensor::from_fn(pred.shape(), |i| {
                let d = 0.1 + 0.4 * rng.next_f64();
                pred.data()[i] + if rng.bernoulli(0.5) { d } else { -d }
            });
            let f = |t: &mut Tape<f64>, v: &[Var]| t.l1_loss(v[0], v[1]);
            (vec![pred, target], Box::new(f), opts)
        }
        "embed_tokens" => {
            let xs = vec![rand(&mut rng, s(7, 5, 1, 1), 1.0), rand(&mut rng, s(4, 5, 1, 1), 1.0)];
            let f = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.embed_tokens(v[0], v[1], &[vec![1, 3, 3], vec![6, 0, 2, 5, 4]])?;
                project(t, y, 7)
            };
            (xs, Box::new(f), opts)
        }
        "attention" => {
            let xs = vec![
                rand(&mut rng, s(2, 4, 3, 3), 1.0),
                rand(&mut rng, s(2, 4, 3, 3), 1.0),
                rand(&mut rng, s(2, 4, 3, 3), 1.0),
            ];
            let f = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.attention(v[0], v[1], v[2], 2, None)?;
                project(t, y, 8)
            };
            (xs, Box::new(f), opts)
        }
        "attention_masked" => {
            let xs = vec![
                rand(&mut rng, s(2, 4, 3, 3), 1.0),
                rand(&mut rng, s(2, 4, 5, 1), 1.0),
                rand(&mut rng, s(2, 4, 5, 1), 1.0),
            ];
            let f = |t: &mut Tape<f64>, v: &[Var]| {
                let y = t.attention(v[0], v[1], v[2], 2, Some(&[3, 5]))?;
                project(t, y, 9)
            };
            (xs, Box::new(f), opts)
        }
        "channel_attention" => block_case(&mut rng, s(1, 4, 3, 3), |st| {
            let ca = ChannelAttention::register(st, "ca", 4, 4)?;
            Ok(Box::new(move |t, p, x| ca.forward(t, p, x)))
        })?,
        "gcffn" => block_case(&mut rng, s(1, 4, 4, 4), |st| {
            let ffn = Gcffn::register(st, "gcffn", 4, 2)?;
            Ok(Box::new(move |t, p, x| ffn.forward(t, p, x)))
        })?,
        "conv_block" => block_case(&mut rng, s(1, 4, 5, 5), |st| {
            let b = ConvBlock::register(st, "conv", 4, 4)?;
            Ok(Box::new(move |t, p, x| b.forward(t, p, x)))
        })?,
        "convformer_block" => block_case(&mut rng, s(1, 4, 4, 4), |st| {
            let b = FormerBlock::register_conv(st, "blk", 4, 4, 4, 2)?;
            Ok(Box::new(move |t, p, x| b.forward(t, p, x)))
        })?,
        "transformer_block" => block_case(&mut rng, s(1, 4, 3, 3), |st| {
            let b = FormerBlock::register_attention(st, "blk", 4, 2, 4, 2)?;
            Ok(Box::new(move |t, p, x| b.forward(t, p, x)))
        })?,
        "cim" => cim_case(&mut rng)?,
        "encode_prompt" => prompt_case(&mut rng)?,
        "model_tiny" => model_case(&mut rng)?,
        NEGATIVE_CONTROL => unary(&mut rng, s(1, 2, 3, 3), opts, |t, x| Ok(t.scale_with_backward(x, 2.0, 2.02))),
        other => return Err(config_err!("unknown gradient check {other:?}")),
    };
    Ok(Case {
        inputs,
        loss: f,
        options: opts,
    })
}

fn rand(rng: &mut Prng, shape: Shape, amp: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform(-amp, amp))
}

fn shift(mut t: Tensor<f64>, by: f64) -> Tensor<f64> {
    t.data_mut().iter_mut().for_each(|v| *v += by);
    t
}

/// `sum(y ∘ r)` for a fixed random `r`, so every output coordinate matters.
fn project(t: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = Prng::new(seed, "projection");
    let r = t.constant(rand(&mut rng, t.shape(y), 1.0));
    let prod = t.mul(y, r)?;
    Ok(t.sum(prod))
}

fn unary(
    rng: &mut Prng,
    shape: Shape,
    opts: GradCheckOptions,
    op: impl Fn(&mut Tape<f64>, Var) -> Result<Var> + 'static,
) -> (Vec<Tensor<f64>>, Box<Loss>, GradCheckOptions) {
    let f = move |t: &mut Tape<f64>, v: &[Var]| {
        let y = op(t, v[0])?;
        project(t, y, 10)
    };
    (vec![rand(rng, shape, 1.0)], Box::new(f), opts)
}

/// Double-precision copies of `store` with every tensor, including the
/// zero-initialized ones, moved to a generic random point.
fn randomized_params(rng: &mut Prng, store: &ParameterStore) -> Vec<Tensor<f64>> {
    store
        .tensors()
        .iter()
        .map(|t| {
            let s = t.shape();
            let fan_in = if s.n == 1 { s.c } else { s.c * s.h * s.w };
            let amp = (1.0 / (fan_in.max(1) as f64).sqrt()).min(0.5);
            let mut out = t.cast::<f64>();
            out.data_mut().iter_mut().for_each(|v| *v += rng.uniform(-amp, amp));
            out
        })
        .collect()
}

type BlockFn = Box<dyn Fn(&mut Tape<f64>, &[Var], Var) -> Result<Var>>;

/// Checks a block w.r.t. its input (index 0) and all its parameters.
fn block_case(
    rng: &mut Prng,
    shape: Shape,
    build: impl FnOnce(&mut ParameterStore) -> Result<BlockFn>,
) -> Result<(Vec<Tensor<f64>>, Box<Loss>, GradCheckOptions)> {
    let mut store = ParameterStore::new(1);
    let forward = build(&mut store)?;
    let mut inputs = vec![rand(rng, shape, 1.0)];
    inputs.extend(randomized_params(rng, &store));
    let f = move |t: &mut Tape<f64>, v: &[Var]| {
        let y = forward(t, &v[1..], v[0])?;
        project(t, y, 11)
    };
    Ok((inputs, Box::new(f), GradCheckOptions::default()))
}

/// Input 0 is the feature map, input 1 the context, the rest parameters.
fn cim_case(rng: &mut Prng) -> Result<(Vec<Tensor<f64>>, Box<Loss>, GradCheckOptions)> {
    let mut store = ParameterStore::new(2);
    let cim = Cim::register(&mut store, "cim", 4, 6, 2)?;
    let mut inputs = vec![rand(rng, Shape::new(2, 4, 3, 3), 1.0), rand(rng, Shape::new(2, 6, 4, 1), 1.0)];
    inputs.extend(randomized_params(rng, &store));
    let f = move |t: &mut Tape<f64>, v: &[Var]| {
        let ctx = crate::conditioning::Context {
            embedding: v[1],
            lens: vec![4, 2],
        };
        let y = cim.forward(t, &v[2..], v[0], &ctx)?;
        project(t, y, 12)
    };
    Ok((inputs, Box::new(f), GradCheckOptions::default()))
}

/// Loss through the prompt encoder and one context module, w.r.t. the
/// embedding tables.
fn prompt_case(rng: &mut Prng) -> Result<(Vec<Tensor<f64>>, Box<Loss>, GradCheckOptions)> {
    let vocab = PromptVocabulary::standard();
    let mut store = ParameterStore::new(3);
    let enc = PromptEncoder::register(&mut store, vocab.len(), 16, 8)?;
    let cim = Cim::register(&mut store, "cim", 4, 8, 2)?;
    let mut params = randomized_params(rng, &store);
    let x = rand(rng, Shape::new(2, 4, 2, 2), 1.0);
    let tables = params.drain(..2).collect::<Vec<_>>();
    let mut inputs = tables;
    inputs.push(x);
    inputs.extend(params);
    let f = move |t: &mut Tape<f64>, v: &[Var]| {
        // Reassemble the parameter list in store order: tables first.
        let mut p: Vec<Var> = v[..2].to_vec();
        p.extend_from_slice(&v[3..]);
        let ctx = enc.encode(t, &p, &vocab, &["remove the degradation, the gaussian_noise is gaussian_noise", "rain"])?;
        let y = cim.forward(t, &p, v[2], &ctx)?;
        project(t, y, 13)
    };
    let opts = GradCheckOptions {
        max_coords_per_input: Some(400),
        ..GradCheckOptions::default()
    };
    Ok((inputs, Box::new(f), opts))
}

/// Tiny full model on a 16×16 input, input and every parameter tensor
/// (subsampled), with a generic random tail so gradients reach every layer.
fn model_case(rng: &mut Prng) -> Result<(Vec<Tensor<f64>>, Box<Loss>, GradCheckOptions)> {
    let model = UniProcessor::new(ModelConfig::tiny(), 4)?;
    let mut inputs = vec![rand(rng, Shape::new(1, 3, 16, 16), 0.5)];
    inputs[0].data_mut().iter_mut().for_each(|v| *v += 0.5);
    inputs.extend(randomized_params(rng, model.store()));
    let f = move |t: &mut Tape<f64>, v: &[Var]| {
        let p = &v[1..];
        let ctx = model.encode_prompts(t, p, &["remove the degradation, the gaussian_noise is gaussian_noise"])?;
        let y = model.forward(t, p, v[0], Some(&ctx))?;
        // The identity path adds a large linear term; check the residual.
        let r = t.sub(y, v[0])?;
        project(t, r, 14)
    };
    // Through the whole network the loss carries roundoff of ~1e-14, so a
    // 1e-5 step leaves too few significant digits; 1e-4 keeps truncation
    // error far below the bound.
    let opts = GradCheckOptions {
        eps: 1e-4,
        max_coords_per_input: Some(3),
        ..GradCheckOptions::default()
    };
    Ok((inputs, Box::new(f), opts))
}
