use super::conv::{self, ConvGeometry};
use super::tape::Op;
use super::{Scalar, Shape, Tensor, Tape, Var};
use crate::error::{contract_err, dim_err, Result};

/// Epsilon floor of [`Tape::layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-6;
/// Epsilon of the GRN denominator.
pub const GRN_EPS: f64 = 1e-6;

fn same_shape(a: Shape, b: Shape, what: &str) -> Result<()> {
    if a != b {
        return Err(dim_err!("{what}: shapes {a} and {b} differ"));
    }
    Ok(())
}

fn channel_param(p: Shape, c: usize, what: &str) -> Result<()> {
    if p.numel() != c {
        return Err(dim_err!("{what}: expected {c} per-channel values, got {p}"));
    }
    Ok(())
}

impl<T: Scalar> Tape<T> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.shape(a), self.shape(b), "add")?;
        let data = zip_map(self.tensor(a), self.tensor(b), |x, y| x + y);
        Ok(self.record(data, Op::Add(a.index(), b.index()), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.shape(a), self.shape(b), "sub")?;
        let data = zip_map(self.tensor(a), self.tensor(b), |x, y| x - y);
        Ok(self.record(data, Op::Sub(a.index(), b.index()), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.shape(a), self.shape(b), "mul")?;
        let data = zip_map(self.tensor(a), self.tensor(b), |x, y| x * y);
        Ok(self.record(data, Op::Mul(a.index(), b.index()), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        self.scale_with_backward(x, factor, factor)
    }

    /// Scale whose backward rule uses a different factor. Only meant for
    /// building deliberately broken fixtures for the gradient checker.
    #[doc(hidden)]
    pub fn scale_with_backward(&mut self, x: Var, factor: T, backward_factor: T) -> Var {
        let t = self.tensor(x);
        let data = Tensor::new(t.shape(), t.data().iter().map(|&v| v * factor).collect())
            .expect("same shape");
        self.record(
            data,
            Op::Scale {
                x: x.index(),
                backward_factor,
            },
            &[x],
        )
    }

    /// `x * gate` with `gate` of shape `(n, c, 1, 1)` broadcast over space.
    pub fn mul_channel(&mut self, x: Var, gate: Var) -> Result<Var> {
        let (xs, gs) = (self.shape(x), self.shape(gate));
        if gs != Shape::new(xs.n, xs.c, 1, 1) {
            return Err(dim_err!("mul_channel: gate {gs} does not match {xs}"));
        }
        let (xt, gt) = (self.tensor(x), self.tensor(gate));
        let plane = xs.plane();
        let data: Vec<T> = xt
            .data()
            .chunks(plane)
            .zip(gt.data())
            .flat_map(|(row, &g)| row.iter().map(move |&v| v * g))
            .collect();
        let out = Tensor::new(xs, data)?;
        Ok(self.record(
            out,
            Op::MulChannel {
                x: x.index(),
                gate: gate.index(),
            },
            &[x, gate],
        ))
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if (sa.n, sa.h, sa.w) != (sb.n, sb.h, sb.w) {
            return Err(dim_err!("concat: {sa} and {sb} differ outside the channel axis"));
        }
        let out_shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
        let (ta, tb) = (self.tensor(a), self.tensor(b));
        let (la, lb) = (sa.c * sa.plane(), sb.c * sb.plane());
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..sa.n {
            data.extend_from_slice(&ta.data()[n * la..(n + 1) * la]);
            data.extend_from_slice(&tb.data()[n * lb..(n + 1) * lb]);
        }
        let out = Tensor::new(out_shape, data)?;
        Ok(self.record(
            out,
            Op::Concat {
                a: a.index(),
                b: b.index(),
            },
            &[a, b],
        ))
    }

    /// Sum of all elements as a `(1,1,1,1)` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.tensor(x).data().iter().copied().sum();
        self.record(Tensor::scalar(s), Op::Sum(x.index()), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = T::from_usize(self.tensor(x).numel()).unwrap();
        let s = self.sum(x);
        self.scale(s, T::one() / n)
    }

    /// 2-D convolution. `w` has shape `(c_out, c_in / groups, k, k)` and the
    /// optional bias holds `c_out` values.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Var> {
        let geom = ConvGeometry::new(self.shape(x), self.shape(w), stride, padding, groups)?;
        if let Some(b) = b {
            channel_param(self.shape(b), geom.output.c, "conv2d bias")?;
        }
        let out = conv::conv2d_forward(
            self.tensor(x),
            self.tensor(w),
            b.map(|b| self.tensor(b)),
            &geom,
        );
        let mut parents = vec![x, w];
        parents.extend(b);
        Ok(self.record(
            out,
            Op::Conv2d {
                x: x.index(),
                w: w.index(),
                b: b.map(|b| b.index()),
                geom,
            },
            &parents,
        ))
    }

    /// Normalizes over the channel axis at every spatial location, then
    /// applies a per-channel affine map.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.c < 1 {
            return Err(dim_err!("layer_norm needs at least one channel"));
        }
        channel_param(self.shape(gamma), s.c, "layer_norm gamma")?;
        channel_param(self.shape(beta), s.c, "layer_norm beta")?;
        let eps = T::from_f64_lossy(LAYER_NORM_EPS);
        let (xt, gt, bt) = (self.tensor(x), self.tensor(gamma), self.tensor(beta));
        let plane = s.plane();
        let cf = T::from_usize(s.c).unwrap();
        let mut normalized = vec![T::zero(); s.numel()];
        let mut rstd = vec![T::zero(); s.n * plane];
        let mut out = vec![T::zero(); s.numel()];
        for n in 0..s.n {
            let base = n * s.c * plane;
            for p in 0..plane {
                let mut mean = T::zero();
                for c in 0..s.c {
                    mean += xt.data()[base + c * plane + p];
                }
                mean = mean / cf;
                let mut var = T::zero();
                for c in 0..s.c {
                    let d = xt.data()[base + c * plane + p] - mean;
                    var += d * d;
                }
                var = var / cf;
                let r = T::one() / (var + eps).sqrt();
                rstd[n * plane + p] = r;
                for c in 0..s.c {
                    let i = base + c * plane + p;
                    let xh = (xt.data()[i] - mean) * r;
                    normalized[i] = xh;
                    out[i] = xh * gt.data()[c] + bt.data()[c];
                }
            }
        }
        let out = Tensor::new(s, out)?;
        Ok(self.record(
            out,
            Op::LayerNorm {
                x: x.index(),
                gamma: gamma.index(),
                beta: beta.index(),
                normalized,
                rstd,
            },
            &[x, gamma, beta],
        ))
    }

    /// Exact GELU, `x·Φ(x)`.
    pub fn gelu(&mut self, x: Var) -> Var {
        let t = self.tensor(x);
        let data: Vec<T> = t.data().iter().map(|&v| gelu_scalar(v)).collect();
        let out = Tensor::new(t.shape(), data).expect("same shape");
        self.record(out, Op::Gelu(x.index()), &[x])
    }

    /// Softmax along `axis` (0 = n, 1 = c, 2 = h, 3 = w).
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        if axis > 3 {
            return Err(dim_err!("softmax axis {axis} out of range for a rank-4 tensor"));
        }
        let t = self.tensor(x);
        let mut data = t.data().to_vec();
        for_each_line(t.shape(), axis, |idx| {
            let m = idx.clone().map(|i| data[i]).fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for i in idx.clone() {
                data[i] = (data[i] - m).exp();
                z += data[i];
            }
            for i in idx {
                data[i] = data[i] / z;
            }
        });
        let out = Tensor::new(t.shape(), data)?;
        Ok(self.record(out, Op::Softmax { x: x.index(), axis }, &[x]))
    }

    /// Mean over each `h × w` plane, giving `(n, c, 1, 1)`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let t = self.tensor(x);
        let s = t.shape();
        let inv = T::one() / T::from_usize(s.plane()).unwrap();
        let data: Vec<T> = t
            .data()
            .chunks(s.plane())
            .map(|p| p.iter().copied().sum::<T>() * inv)
            .collect();
        let out = Tensor::new(Shape::new(s.n, s.c, 1, 1), data).expect("pool shape");
        self.record(out, Op::GlobalAvgPool(x.index()), &[x])
    }

    /// `(n, c·r², h, w) → (n, c, h·r, w·r)`.
    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let s = self.shape(x);
        if r == 0 || s.c % (r * r) != 0 {
            return Err(dim_err!("pixel_shuffle: channels {} not divisible by r²={}", s.c, r * r));
        }
        let out = pixel_shuffle_kernel(self.tensor(x), r);
        Ok(self.record(out, Op::PixelShuffle { x: x.index(), r }, &[x]))
    }

    /// `(n, c, h·r, w·r) → (n, c·r², h, w)`; exact inverse of `pixel_shuffle`.
    pub fn pixel_unshuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let s = self.shape(x);
        if r == 0 || s.h % r != 0 || s.w % r != 0 {
            return Err(dim_err!("pixel_unshuffle: {s} spatial extents not divisible by {r}"));
        }
        let out = pixel_unshuffle_kernel(self.tensor(x), r);
        Ok(self.record(out, Op::PixelUnshuffle { x: x.index(), r }, &[x]))
    }

    /// Global response normalization:
    /// `out = gamma·(x·N) + beta + x` with `N_c = G_c / (mean(G) + ε)` and
    /// `G_c` the spatial L2 norm of channel `c`.
    pub fn grn(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let s = self.shape(x);
        channel_param(self.shape(gamma), s.c, "grn gamma")?;
        channel_param(self.shape(beta), s.c, "grn beta")?;
        let (xt, gt, bt) = (self.tensor(x), self.tensor(gamma), self.tensor(beta));
        let plane = s.plane();
        let eps = T::from_f64_lossy(GRN_EPS);
        let cf = T::from_usize(s.c).unwrap();
        let norms: Vec<T> = xt
            .data()
            .chunks(plane)
            .map(|p| p.iter().map(|&v| v * v).sum::<T>().sqrt())
            .collect();
        let denom: Vec<T> = norms
            .chunks(s.c)
            .map(|g| g.iter().copied().sum::<T>() / cf + eps)
            .collect();
        let mut out = vec![T::zero(); s.numel()];
        for n in 0..s.n {
            for c in 0..s.c {
                let nc = norms[n * s.c + c] / denom[n];
                let (ga, be) = (gt.data()[c], bt.data()[c]);
                let off = (n * s.c + c) * plane;
                for (o, &v) in out[off..off + plane].iter_mut().zip(&xt.data()[off..off + plane]) {
                    *o = ga * (v * nc) + be + v;
                }
            }
        }
        let out = Tensor::new(s, out)?;
        Ok(self.record(
            out,
            Op::Grn {
                x: x.index(),
                gamma: gamma.index(),
                beta: beta.index(),
                saved: GrnSaved { norms, denom },
            },
            &[x, gamma, beta],
        ))
    }

    /// Mean absolute error between `pred` and `target`.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (ps, ts) = (self.shape(pred), self.shape(target));
        if ps != ts {
            return Err(contract_err!("l1_loss: prediction {ps} and target {ts} differ"));
        }
        let (p, t) = (self.tensor(pred), self.tensor(target));
        let total: T = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b).abs()).sum();
        let loss = total / T::from_usize(p.numel()).unwrap();
        Ok(self.record(
            Tensor::scalar(loss),
            Op::L1Loss {
                pred: pred.index(),
                target: target.index(),
            },
            &[pred, target],
        ))
    }

    /// Token embedding lookup with learned positions.
    ///
    /// `table` is `(V, D, 1, 1)`, `pos` is `(K, D, 1, 1)`. The result is
    /// `(n, D, K, 1)` where row `i < len` of item `n` holds
    /// `table[ids[n][i]] + pos[i]` and rows past the sequence are zero.
    /// Sequences longer than `K` are truncated.
    pub fn embed_tokens(&mut self, table: Var, pos: Var, ids: &[Vec<usize>]) -> Result<Var> {
        let (ts, ps) = (self.shape(table), self.shape(pos));
        if ts.c != ps.c || ts.plane() != 1 || ps.plane() != 1 {
            return Err(dim_err!("embed_tokens: table {ts} and positions {ps} disagree"));
        }
        let (d, k) = (ts.c, ps.n);
        let ids: Vec<Vec<usize>> = ids.iter().map(|s| s.iter().copied().take(k).collect()).collect();
        if let Some(bad) = ids.iter().flatten().find(|&&i| i >= ts.n) {
            return Err(dim_err!("token index {bad} outside vocabulary of {}", ts.n));
        }
        let out_shape = Shape::new(ids.len(), d, k, 1);
        let (tt, pt) = (self.tensor(table), self.tensor(pos));
        let mut data = vec![T::zero(); out_shape.numel()];
        for (n, seq) in ids.iter().enumerate() {
            for (i, &tok) in seq.iter().enumerate() {
                for c in 0..d {
                    data[(n * d + c) * k + i] = tt.data()[tok * d + c] + pt.data()[i * d + c];
                }
            }
        }
        let out = Tensor::new(out_shape, data)?;
        Ok(self.record(
            out,
            Op::Embed {
                table: table.index(),
                pos: pos.index(),
                ids,
            },
            &[table, pos],
        ))
    }
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data).expect("same shape")
}

/// Calls `f` with the flat indices of every 1-D line along `axis`.
fn for_each_line(
    s: Shape,
    axis: usize,
    mut f: impl FnMut(std::iter::StepBy<std::ops::Range<usize>>),
) {
    let dims = s.dims();
    let len = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    for o in 0..outer {
        for i in 0..inner {
            let start = o * len * inner + i;
            f((start..start + len * inner).step_by(inner));
        }
    }
}

pub(crate) fn gelu_scalar<T: Scalar>(x: T) -> T {
    let half = T::from_f64_lossy(0.5);
    x * half * (T::one() + (x * T::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

fn gelu_derivative<T: Scalar>(x: T) -> T {
    let half = T::from_f64_lossy(0.5);
    let cdf = half * (T::one() + (x * T::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = (-(x * x) * half).exp() * T::from_f64_lossy(0.398_942_280_401_432_7);
    cdf + x * pdf
}

pub(crate) fn gelu_backward<T: Scalar>(x: &Tensor<T>, g: &[T]) -> Vec<T> {
    x.data().iter().zip(g).map(|(&v, &g)| g * gelu_derivative(v)).collect()
}

pub(crate) fn softmax_backward<T: Scalar>(y: &Tensor<T>, axis: usize, g: &[T]) -> Vec<T> {
    let yd = y.data();
    let mut gx = vec![T::zero(); yd.len()];
    for_each_line(y.shape(), axis, |idx| {
        let dot: T = idx.clone().map(|i| g[i] * yd[i]).sum();
        for i in idx {
            gx[i] = yd[i] * (g[i] - dot);
        }
    });
    gx
}

pub(crate) fn mul_channel_backward<T: Scalar>(x: &Tensor<T>, gate: &Tensor<T>, g: &[T]) -> (Vec<T>, Vec<T>) {
    let plane = x.shape().plane();
    let mut gx = Vec::with_capacity(g.len());
    let mut gg = Vec::with_capacity(gate.numel());
    for ((gp, xp), &gv) in g.chunks(plane).zip(x.data().chunks(plane)).zip(gate.data()) {
        gx.extend(gp.iter().map(|&v| v * gv));
        gg.push(conv::dot(gp, xp));
    }
    (gx, gg)
}

pub(crate) fn concat_backward<T: Scalar>(sa: Shape, sb: Shape, g: &[T]) -> (Vec<T>, Vec<T>) {
    let (la, lb) = (sa.c * sa.plane(), sb.c * sb.plane());
    let mut ga = Vec::with_capacity(sa.numel());
    let mut gb = Vec::with_capacity(sb.numel());
    for chunk in g.chunks(la + lb) {
        ga.extend_from_slice(&chunk[..la]);
        gb.extend_from_slice(&chunk[la..]);
    }
    (ga, gb)
}

pub(crate) fn global_avg_pool_backward<T: Scalar>(s: Shape, g: &[T]) -> Vec<T> {
    let inv = T::one() / T::from_usize(s.plane()).unwrap();
    g.iter()
        .flat_map(|&v| std::iter::repeat_n(v * inv, s.plane()))
        .collect()
}

pub(crate) fn layer_norm_backward<T: Scalar>(
    s: Shape,
    gamma: &Tensor<T>,
    normalized: &[T],
    rstd: &[T],
    g: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let plane = s.plane();
    let cf = T::from_usize(s.c).unwrap();
    let mut gx = vec![T::zero(); s.numel()];
    let mut gg = vec![T::zero(); s.c];
    let mut gb = vec![T::zero(); s.c];
    for n in 0..s.n {
        let base = n * s.c * plane;
        for c in 0..s.c {
            let off = base + c * plane;
            for p in 0..plane {
                gg[c] += g[off + p] * normalized[off + p];
                gb[c] += g[off + p];
            }
        }
        for p in 0..plane {
            let (mut m1, mut m2) = (T::zero(), T::zero());
            for c in 0..s.c {
                let i = base + c * plane + p;
                let gh = g[i] * gamma.data()[c];
                m1 += gh;
                m2 += gh * normalized[i];
            }
            m1 = m1 / cf;
            m2 = m2 / cf;
            let r = rstd[n * plane + p];
            for c in 0..s.c {
                let i = base + c * plane + p;
                let gh = g[i] * gamma.data()[c];
                gx[i] = r * (gh - m1 - normalized[i] * m2);
            }
        }
    }
    (gx, gg, gb)
}

pub(crate) struct GrnSaved<T> {
    norms: Vec<T>,
    denom: Vec<T>,
}

pub(crate) fn grn_backward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    saved: &GrnSaved<T>,
    g: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let s = x.shape();
    let plane = s.plane();
    let cf = T::from_usize(s.c).unwrap();
    let xd = x.data();
    let mut gx = vec![T::zero(); s.numel()];
    let mut gg = vec![T::zero(); s.c];
    let mut gb = vec![T::zero(); s.c];
    for n in 0..s.n {
        let d = saved.denom[n];
        let norms = &saved.norms[n * s.c..(n + 1) * s.c];
        // dL/dN_c
        let mut g_n = vec![T::zero(); s.c];
        for c in 0..s.c {
            let off = (n * s.c + c) * plane;
            let gp = &g[off..off + plane];
            let xp = &xd[off..off + plane];
            let gx_dot = conv::dot(gp, xp);
            let nc = norms[c] / d;
            g_n[c] = gamma.data()[c] * gx_dot;
            gg[c] += gx_dot * nc;
            gb[c] += gp.iter().copied().sum::<T>();
        }
        let cross: T = g_n.iter().zip(norms).map(|(&a, &b)| a * b).sum::<T>() / (d * d * cf);
        for c in 0..s.c {
            let off = (n * s.c + c) * plane;
            let nc = norms[c] / d;
            let direct = gamma.data()[c] * nc + T::one();
            let g_norm = g_n[c] / d - cross;
            let via_norm = if norms[c] > T::zero() {
                g_norm / norms[c]
            } else {
                T::zero()
            };
            for p in 0..plane {
                gx[off + p] = g[off + p] * direct + via_norm * xd[off + p];
            }
        }
    }
    (gx, gg, gb)
}

pub(crate) fn l1_backward<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, g: T) -> (Vec<T>, Vec<T>) {
    let scale = g / T::from_usize(pred.numel()).unwrap();
    let gp: Vec<T> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| {
            let d = a - b;
            if d > T::zero() {
                scale
            } else if d < T::zero() {
                -scale
            } else {
                T::zero()
            }
        })
        .collect();
    let gt = gp.iter().map(|&v| -v).collect();
    (gp, gt)
}

pub(crate) fn embed_backward<T: Scalar>(
    table: Shape,
    pos: Shape,
    ids: &[Vec<usize>],
    g: &[T],
) -> (Vec<T>, Vec<T>) {
    let (d, k) = (table.c, pos.n);
    let mut gt = vec![T::zero(); table.numel()];
    let mut gp = vec![T::zero(); pos.numel()];
    for (n, seq) in ids.iter().enumerate() {
        for (i, &tok) in seq.iter().enumerate() {
            for c in 0..d {
                let v = g[(n * d + c) * k + i];
                gt[tok * d + c] += v;
                gp[i * d + c] += v;
            }
        }
    }
    (gt, gp)
}

pub(crate) fn pixel_shuffle_kernel<T: Scalar>(x: &Tensor<T>, r: usize) -> Tensor<T> {
    let s = x.shape();
    let c_out = s.c / (r * r);
    let out_shape = Shape::new(s.n, c_out, s.h * r, s.w * r);
    let mut out = vec![T::zero(); out_shape.numel()];
    let xd = x.data();
    for n in 0..s.n {
        for c in 0..c_out {
            for i in 0..r {
                for j in 0..r {
                    let src_c = c * r * r + i * r + j;
                    for h in 0..s.h {
                        let src = &xd[s.index(n, src_c, h, 0)..][..s.w];
                        let row = out_shape.index(n, c, h * r + i, 0);
                        for (w, &v) in src.iter().enumerate() {
                            out[row + w * r + j] = v;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(out_shape, out).expect("shuffle shape")
}

pub(crate) fn pixel_unshuffle_kernel<T: Scalar>(x: &Tensor<T>, r: usize) -> Tensor<T> {
    let s = x.shape();
    let out_shape = Shape::new(s.n, s.c * r * r, s.h / r, s.w / r);
    let mut out = vec![T::zero(); out_shape.numel()];
    let xd = x.data();
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..r {
                for j in 0..r {
                    let dst_c = c * r * r + i * r + j;
                    for h in 0..out_shape.h {
                        let row = s.index(n, c, h * r + i, 0);
                        let dst = out_shape.index(n, dst_c, h, 0);
                        for w in 0..out_shape.w {
                            out[dst + w] = xd[row + w * r + j];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(out_shape, out).expect("unshuffle shape")
}
