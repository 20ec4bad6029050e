//! Network building blocks. Each layer records parameter ids at registration
//! and replays them on a tape in `forward`.

use serde::{Deserialize, Serialize};

use super::store::{Init, ParamId, ParameterStore};
use crate::conditioning::Context;
use crate::error::{config_err, dim_err, Result};
use crate::tensor::{Scalar, Shape, Tape, Var};

pub const WEIGHT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub padding: usize,
    pub groups: usize,
}

impl Conv {
    /// `k × k` convolution with "same" padding and a bias.
    pub fn register(
        store: &mut ParameterStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        groups: usize,
    ) -> Result<Self> {
        Self::register_with(store, name, c_in, c_out, k, groups, Init::TruncNormal(WEIGHT_STD))
    }

    pub fn register_with(
        store: &mut ParameterStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        groups: usize,
        weight_init: Init,
    ) -> Result<Self> {
        if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
            return Err(config_err!("{name}: groups {groups} must divide {c_in} and {c_out}"));
        }
        let weight = store.add(&format!("{name}.weight"), Shape::new(c_out, c_in / groups, k, k), weight_init)?;
        let bias = Some(store.add(&format!("{name}.bias"), Shape::new(1, c_out, 1, 1), Init::Zeros)?);
        Ok(Self {
            weight,
            bias,
            padding: k / 2,
            groups,
        })
    }

    pub fn pointwise(store: &mut ParameterStore, name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        Self::register(store, name, c_in, c_out, 1, 1)
    }

    pub fn depthwise(store: &mut ParameterStore, name: &str, c: usize, k: usize) -> Result<Self> {
        Self::register(store, name, c, c, k, c)
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        tape.conv2d(
            x,
            p[self.weight.index()],
            self.bias.map(|b| p[b.index()]),
            1,
            self.padding,
            self.groups,
        )
    }

    /// Parameters that, when zero, make the output zero.
    pub fn zeroing_ids(&self) -> Vec<ParamId> {
        std::iter::once(self.weight).chain(self.bias).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn register(store: &mut ParameterStore, name: &str, c: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.add(&format!("{name}.gamma"), Shape::new(1, c, 1, 1), Init::Ones)?,
            beta: store.add(&format!("{name}.beta"), Shape::new(1, c, 1, 1), Init::Zeros)?,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        tape.layer_norm(x, p[self.gamma.index()], p[self.beta.index()])
    }
}

/// `x ∘ MLP(avg(x))` with MLP `c → c/r → c` and GELU in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAttention {
    pub fc1: Conv,
    pub fc2: Conv,
}

impl ChannelAttention {
    /// Hidden width is `max(1, c / reduction)`.
    pub fn register(store: &mut ParameterStore, name: &str, c: usize, reduction: usize) -> Result<Self> {
        let hidden = (c / reduction.max(1)).max(1);
        Ok(Self {
            fc1: Conv::pointwise(store, &format!("{name}.fc1"), c, hidden)?,
            fc2: Conv::pointwise(store, &format!("{name}.fc2"), hidden, c)?,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        let pooled = tape.global_avg_pool(x);
        let hidden = self.fc1.forward(tape, p, pooled)?;
        let hidden = tape.gelu(hidden);
        let gate = self.fc2.forward(tape, p, hidden)?;
        tape.mul_channel(x, gate)
    }
}

/// Gated convolutional feed-forward: `W3(gelu(D1(W1 x)) ⊙ D2(W2 x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gcffn {
    pub wp1: Conv,
    pub wp2: Conv,
    pub wd1: Conv,
    pub wd2: Conv,
    pub wp3: Conv,
}

impl Gcffn {
    pub fn register(store: &mut ParameterStore, name: &str, c: usize, expansion: usize) -> Result<Self> {
        let hidden = c * expansion;
        Ok(Self {
            wp1: Conv::pointwise(store, &format!("{name}.wp1"), c, hidden)?,
            wp2: Conv::pointwise(store, &format!("{name}.wp2"), c, hidden)?,
            wd1: Conv::depthwise(store, &format!("{name}.wd1"), hidden, 3)?,
            wd2: Conv::depthwise(store, &format!("{name}.wd2"), hidden, 3)?,
            wp3: Conv::pointwise(store, &format!("{name}.wp3"), hidden, c)?,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        let a = self.wp1.forward(tape, p, x)?;
        let a = self.wd1.forward(tape, p, a)?;
        let b = self.wp2.forward(tape, p, x)?;
        let b = self.wd2.forward(tape, p, b)?;
        let a = tape.gelu(a);
        let gated = tape.mul(a, b)?;
        self.wp3.forward(tape, p, gated)
    }
}

/// ConvNeXt-v2 block: depthwise 7×7, LN, expand, GELU, GRN, project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub dw: Conv,
    pub norm: LayerNorm,
    pub pw1: Conv,
    pub grn_gamma: ParamId,
    pub grn_beta: ParamId,
    pub pw2: Conv,
}

impl ConvBlock {
    pub fn register(store: &mut ParameterStore, name: &str, c: usize, expansion: usize) -> Result<Self> {
        let hidden = c * expansion;
        Ok(Self {
            dw: Conv::depthwise(store, &format!("{name}.dw"), c, 7)?,
            norm: LayerNorm::register(store, &format!("{name}.norm"), c)?,
            pw1: Conv::pointwise(store, &format!("{name}.pw1"), c, hidden)?,
            grn_gamma: store.add(&format!("{name}.grn.gamma"), Shape::new(1, hidden, 1, 1), Init::Zeros)?,
            grn_beta: store.add(&format!("{name}.grn.beta"), Shape::new(1, hidden, 1, 1), Init::Zeros)?,
            pw2: Conv::pointwise(store, &format!("{name}.pw2"), hidden, c)?,
        })
    }

    /// The block without its residual connection.
    pub fn body<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        let y = self.dw.forward(tape, p, x)?;
        let y = self.norm.forward(tape, p, y)?;
        let y = self.pw1.forward(tape, p, y)?;
        let y = tape.gelu(y);
        let y = tape.grn(y, p[self.grn_gamma.index()], p[self.grn_beta.index()])?;
        self.pw2.forward(tape, p, y)
    }

    /// `x + body(x)`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        let y = self.body(tape, p, x)?;
        tape.add(x, y)
    }
}

/// Multi-head attention with 1×1 projections. Queries come from `x`; keys
/// and values from `x` (self) or from a context tensor (cross).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attention {
    pub q: Conv,
    pub k: Conv,
    pub v: Conv,
    pub o: Conv,
    pub heads: usize,
}

impl Attention {
    /// `kv_dim` is the channel width of the key/value source.
    pub fn register(store: &mut ParameterStore, name: &str, c: usize, kv_dim: usize, heads: usize) -> Result<Self> {
        if heads == 0 || c % heads != 0 {
            return Err(config_err!("{name}: {c} channels do not split into {heads} heads"));
        }
        Ok(Self {
            q: Conv::pointwise(store, &format!("{name}.q"), c, c)?,
            k: Conv::pointwise(store, &format!("{name}.k"), kv_dim, c)?,
            v: Conv::pointwise(store, &format!("{name}.v"), kv_dim, c)?,
            o: Conv::pointwise(store, &format!("{name}.o"), c, c)?,
            heads,
        })
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        p: &[Var],
        x: Var,
        source: Var,
        key_lens: Option<&[usize]>,
    ) -> Result<Var> {
        let q = self.q.forward(tape, p, x)?;
        let k = self.k.forward(tape, p, source)?;
        let v = self.v.forward(tape, p, source)?;
        let a = tape.attention(q, k, v, self.heads, key_lens)?;
        self.o.forward(tape, p, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpatialBranch {
    Conv(ConvBlock),
    Attention(Attention),
}

/// `u = x + CA(LN(x)) + S(LN(x))`, `out = u + GCFFN(LN(u))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormerBlock {
    pub norm1: LayerNorm,
    pub ca: ChannelAttention,
    pub spatial: SpatialBranch,
    pub norm2: LayerNorm,
    pub ffn: Gcffn,
}

impl FormerBlock {
    pub fn register_conv(
        store: &mut ParameterStore,
        name: &str,
        c: usize,
        ca_reduction: usize,
        conv_expansion: usize,
        ffn_expansion: usize,
    ) -> Result<Self> {
        let norm1 = LayerNorm::register(store, &format!("{name}.norm1"), c)?;
        let ca = ChannelAttention::register(store, &format!("{name}.ca"), c, ca_reduction)?;
        let spatial = SpatialBranch::Conv(ConvBlock::register(store, &format!("{name}.conv"), c, conv_expansion)?);
        let norm2 = LayerNorm::register(store, &format!("{name}.norm2"), c)?;
        let ffn = Gcffn::register(store, &format!("{name}.gcffn"), c, ffn_expansion)?;
        Ok(Self {
            norm1,
            ca,
            spatial,
            norm2,
            ffn,
        })
    }

    pub fn register_attention(
        store: &mut ParameterStore,
        name: &str,
        c: usize,
        heads: usize,
        ca_reduction: usize,
        ffn_expansion: usize,
    ) -> Result<Self> {
        let norm1 = LayerNorm::register(store, &format!("{name}.norm1"), c)?;
        let ca = ChannelAttention::register(store, &format!("{name}.ca"), c, ca_reduction)?;
        let spatial = SpatialBranch::Attention(Attention::register(store, &format!("{name}.msa"), c, c, heads)?);
        let norm2 = LayerNorm::register(store, &format!("{name}.norm2"), c)?;
        let ffn = Gcffn::register(store, &format!("{name}.gcffn"), c, ffn_expansion)?;
        Ok(Self {
            norm1,
            ca,
            spatial,
            norm2,
            ffn,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        let n1 = self.norm1.forward(tape, p, x)?;
        let ca = self.ca.forward(tape, p, n1)?;
        let sp = match &self.spatial {
            SpatialBranch::Conv(block) => block.body(tape, p, n1)?,
            SpatialBranch::Attention(att) => att.forward(tape, p, n1, n1, None)?,
        };
        let u = tape.add(x, ca)?;
        let u = tape.add(u, sp)?;
        let n2 = self.norm2.forward(tape, p, u)?;
        let f = self.ffn.forward(tape, p, n2)?;
        tape.add(u, f)
    }

    /// Output projections of every branch.
    pub fn output_projection_ids(&self) -> Vec<ParamId> {
        let mut ids = self.ca.fc2.zeroing_ids();
        ids.extend(self.spatial_output_ids());
        ids.extend(self.ffn.wp3.zeroing_ids());
        ids
    }

    pub fn spatial_output_ids(&self) -> Vec<ParamId> {
        match &self.spatial {
            SpatialBranch::Conv(block) => block.pw2.zeroing_ids(),
            SpatialBranch::Attention(att) => att.o.zeroing_ids(),
        }
    }
}

/// Context interaction: `F' = SA(LN(F)) + F`, `F'' = XA(LN(F'), E) + F'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cim {
    pub norm1: LayerNorm,
    pub self_attn: Attention,
    pub norm2: LayerNorm,
    pub cross_attn: Attention,
    pub context_dim: usize,
}

impl Cim {
    pub fn register(store: &mut ParameterStore, name: &str, c: usize, context_dim: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            norm1: LayerNorm::register(store, &format!("{name}.norm1"), c)?,
            self_attn: Attention::register(store, &format!("{name}.self"), c, c, heads)?,
            norm2: LayerNorm::register(store, &format!("{name}.norm2"), c)?,
            cross_attn: Attention::register(store, &format!("{name}.cross"), c, context_dim, heads)?,
            context_dim,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], f: Var, ctx: &Context) -> Result<Var> {
        let es = tape.shape(ctx.embedding);
        if es.c != self.context_dim {
            return Err(config_err!(
                "context width {} does not match the configured {}",
                es.c,
                self.context_dim
            ));
        }
        if es.n != tape.shape(f).n {
            return Err(dim_err!("context batch {} vs feature batch {}", es.n, tape.shape(f).n));
        }
        let n1 = self.norm1.forward(tape, p, f)?;
        let sa = self.self_attn.forward(tape, p, n1, n1, None)?;
        let f1 = tape.add(sa, f)?;
        let n2 = self.norm2.forward(tape, p, f1)?;
        let xa = self.cross_attn.forward(tape, p, n2, ctx.embedding, Some(&ctx.lens))?;
        tape.add(xa, f1)
    }

    pub fn output_projection_ids(&self) -> Vec<ParamId> {
        let mut ids = self.self_attn.o.zeroing_ids();
        ids.extend(self.cross_attn.o.zeroing_ids());
        ids
    }
}
