use std::sync::atomic::{AtomicU64, Ordering};

use super::{attention, conv, ops, Scalar, Shape, Tensor};
use crate::error::{contract_err, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(&self) -> usize {
        self.index
    }
}

/// Recorded operation with the parent handles and whatever forward state the
/// backward rule needs.
pub(crate) enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale {
        x: usize,
        backward_factor: T,
    },
    MulChannel {
        x: usize,
        gate: usize,
    },
    Concat {
        a: usize,
        b: usize,
    },
    Sum(usize),
    Conv2d {
        x: usize,
        w: usize,
        b: Option<usize>,
        geom: conv::ConvGeometry,
    },
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        normalized: Vec<T>,
        rstd: Vec<T>,
    },
    Gelu(usize),
    Softmax {
        x: usize,
        axis: usize,
    },
    GlobalAvgPool(usize),
    PixelShuffle {
        x: usize,
        r: usize,
    },
    PixelUnshuffle {
        x: usize,
        r: usize,
    },
    Grn {
        x: usize,
        gamma: usize,
        beta: usize,
        saved: ops::GrnSaved<T>,
    },
    Attention {
        q: usize,
        k: usize,
        v: usize,
        heads: usize,
        key_lens: Option<Vec<usize>>,
        probs: Vec<T>,
    },
    L1Loss {
        pred: usize,
        target: usize,
    },
    Embed {
        table: usize,
        pos: usize,
        ids: Vec<Vec<usize>>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Reverse-mode gradient tape. Nodes are appended in execution order, so the
/// node list is always topologically sorted.
pub struct Tape<T: Scalar> {
    id: u64,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a value that does not receive gradients.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a value whose gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.node(v).value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    fn node(&self, v: Var) -> &Node<T> {
        assert_eq!(v.tape, self.id, "variable belongs to a different tape");
        &self.nodes[v.index]
    }

    pub(crate) fn tensor(&self, v: Var) -> &Tensor<T> {
        self.value(v)
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Records a derived value; it requires grad iff any parent does.
    pub(crate) fn record(&mut self, value: Tensor<T>, op: Op<T>, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|&p| self.node(p).requires_grad);
        self.push(value, op, requires_grad)
    }

    /// Propagates gradients from a scalar `loss` back to every reachable
    /// leaf created with [`Tape::param`].
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let shape = self.shape(loss);
        if shape != Shape::scalar() {
            return Err(contract_err!("backward needs a scalar loss, got {shape}"));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.index).map(|_| None).collect();
        let mut leaves: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.index] = Some(vec![T::one()]);

        for i in (0..=loss.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let mut acc = Accumulator {
                nodes: &self.nodes,
                grads: &mut grads,
            };
            match &node.op {
                Op::Leaf => {
                    leaves[i] = Some(Tensor::new(node.value.shape(), g)?);
                }
                op => self.backward_op(op, &node.value, g, &mut acc),
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads: leaves,
        })
    }

    fn backward_op(&self, op: &Op<T>, out: &Tensor<T>, g: Vec<T>, acc: &mut Accumulator<'_, T>) {
        let val = |i: usize| &self.nodes[i].value;
        match op {
            Op::Leaf => unreachable!(),
            Op::Add(a, b) => {
                if acc.wants(*a) && acc.wants(*b) {
                    acc.add(*a, g.clone());
                } else if acc.wants(*a) {
                    acc.add(*a, g);
                    return;
                }
                acc.add(*b, g);
            }
            Op::Sub(a, b) => {
                acc.add(*b, g.iter().map(|&v| -v).collect());
                acc.add(*a, g);
            }
            Op::Mul(a, b) => {
                if acc.wants(*a) {
                    let gb: Vec<T> = g.iter().zip(val(*b).data()).map(|(&g, &y)| g * y).collect();
                    acc.add(*a, gb);
                }
                if acc.wants(*b) {
                    let ga: Vec<T> = g.iter().zip(val(*a).data()).map(|(&g, &x)| g * x).collect();
                    acc.add(*b, ga);
                }
            }
            Op::Scale { x, backward_factor } => acc.add(*x, g.into_iter().map(|v| v * *backward_factor).collect()),
            Op::MulChannel { x, gate } => {
                let (gx, gg) = ops::mul_channel_backward(val(*x), val(*gate), &g);
                acc.add(*x, gx);
                acc.add(*gate, gg);
            }
            Op::Concat { a, b } => {
                let (ga, gb) = ops::concat_backward(val(*a).shape(), val(*b).shape(), &g);
                acc.add(*a, ga);
                acc.add(*b, gb);
            }
            Op::Sum(x) => {
                let n = val(*x).numel();
                acc.add(*x, vec![g[0]; n]);
            }
            Op::Conv2d { x, w, b, geom } => {
                if acc.wants(*x) {
                    acc.add(*x, conv::conv2d_backward_input(val(*w), &g, geom));
                }
                if acc.wants(*w) {
                    acc.add(*w, conv::conv2d_backward_weight(val(*x), &g, geom));
                }
                if let Some(b) = b {
                    if acc.wants(*b) {
                        acc.add(*b, conv::conv2d_backward_bias(&g, geom));
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                rstd,
            } => {
                let (gx, gg, gb) =
                    ops::layer_norm_backward(val(*x).shape(), val(*gamma), normalized, rstd, &g);
                acc.add(*x, gx);
                acc.add(*gamma, gg);
                acc.add(*beta, gb);
            }
            Op::Gelu(x) => acc.add(*x, ops::gelu_backward(val(*x), &g)),
            Op::Softmax { x, axis } => acc.add(*x, ops::softmax_backward(out, *axis, &g)),
            Op::GlobalAvgPool(x) => acc.add(*x, ops::global_avg_pool_backward(val(*x).shape(), &g)),
            Op::PixelShuffle { x, r } => {
                let gt = Tensor::new(out.shape(), g).expect("grad shape");
                acc.add(*x, ops::pixel_unshuffle_kernel(&gt, *r).into_data());
            }
            Op::PixelUnshuffle { x, r } => {
                let gt = Tensor::new(out.shape(), g).expect("grad shape");
                acc.add(*x, ops::pixel_shuffle_kernel(&gt, *r).into_data());
            }
            Op::Grn {
                x,
                gamma,
                beta,
                saved,
            } => {
                let (gx, gg, gb) = ops::grn_backward(val(*x), val(*gamma), saved, &g);
                acc.add(*x, gx);
                acc.add(*gamma, gg);
                acc.add(*beta, gb);
            }
            Op::Attention {
                q,
                k,
                v,
                heads,
                key_lens,
                probs,
            } => {
                let (gq, gk, gv) = attention::attention_backward(
                    val(*q),
                    val(*k),
                    val(*v),
                    *heads,
                    key_lens.as_deref(),
                    probs,
                    &g,
                );
                acc.add(*q, gq);
                acc.add(*k, gk);
                acc.add(*v, gv);
            }
            Op::L1Loss { pred, target } => {
                let (gp, gt) = ops::l1_backward(val(*pred), val(*target), g[0]);
                if acc.wants(*target) {
                    acc.add(*target, gt);
                }
                acc.add(*pred, gp);
            }
            Op::Embed { table, pos, ids } => {
                let (gt, gp) = ops::embed_backward(val(*table).shape(), val(*pos).shape(), ids, &g);
                acc.add(*table, gt);
                acc.add(*pos, gp);
            }
        }
    }
}

struct Accumulator<'a, T> {
    nodes: &'a [Node<T>],
    grads: &'a mut [Option<Vec<T>>],
}

impl<T: Scalar> Accumulator<'_, T> {
    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn add(&mut self, i: usize, g: Vec<T>) {
        if !self.wants(i) {
            return;
        }
        match &mut self.grads[i] {
            Some(existing) => {
                for (e, v) in existing.iter_mut().zip(g) {
                    *e += v;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }
}

/// Gradients of the leaves of one tape.
pub struct Gradients<T> {
    tape: u64,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `v`, or `None` when `v` is a constant or was unreachable
    /// from the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        assert_eq!(v.tape, self.tape, "variable belongs to a different tape");
        self.grads.get(v.index).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, zeros when it was not reached.
    pub fn get_or_zeros(&self, v: Var, shape: Shape) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        assert_eq!(v.tape, self.tape, "variable belongs to a different tape");
        self.grads.get_mut(v.index).and_then(Option::take)
    }
}
