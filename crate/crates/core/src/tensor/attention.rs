//! Fused scaled dot-product attention over NCHW feature maps.
//!
//! A map of shape `(n, d, h, w)` is read as `h·w` tokens of width `d`; heads
//! split the channel axis into contiguous groups of `d / heads`.

use rayon::prelude::*;

use super::conv::dot;
use super::tape::Op;
use super::{Scalar, Shape, Tape, Tensor, Var};
use crate::error::{config_err, dim_err, Result};

struct Layout {
    n: usize,
    dim: usize,
    head_dim: usize,
    heads: usize,
    tq: usize,
    tk: usize,
}

impl Layout {
    fn new(q: Shape, k: Shape, v: Shape, heads: usize) -> Result<Self> {
        if heads == 0 || q.c % heads != 0 {
            return Err(config_err!("attention width {} not divisible by {heads} heads", q.c));
        }
        if k != v {
            return Err(dim_err!("attention keys {k} and values {v} differ"));
        }
        if k.c != q.c || k.n != q.n {
            return Err(dim_err!("attention queries {q} incompatible with keys {k}"));
        }
        Ok(Self {
            n: q.n,
            dim: q.c,
            head_dim: q.c / heads,
            heads,
            tq: q.plane(),
            tk: k.plane(),
        })
    }

    fn block(&self, t: usize) -> usize {
        self.head_dim * t
    }
}

/// Copies one head of a channel-major map into token-major order.
fn gather<T: Scalar>(src: &[T], dh: usize, t: usize) -> Vec<T> {
    let mut out = vec![T::zero(); dh * t];
    for c in 0..dh {
        for i in 0..t {
            out[i * dh + c] = src[c * t + i];
        }
    }
    out
}

fn scatter<T: Scalar>(tok: &[T], dst: &mut [T], dh: usize, t: usize) {
    for c in 0..dh {
        for i in 0..t {
            dst[c * t + i] = tok[i * dh + c];
        }
    }
}

fn valid_keys(key_lens: Option<&[usize]>, n: usize, tk: usize) -> usize {
    key_lens.map_or(tk, |l| l[n].min(tk))
}

impl<T: Scalar> Tape<T> {
    /// Multi-head attention `softmax(q·kᵀ/√(d/heads))·v`, heads concatenated.
    ///
    /// `key_lens[n]`, when given, masks keys at positions `>= key_lens[n]`
    /// for batch item `n`. An item with no valid key attends to nothing and
    /// yields zeros.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        key_lens: Option<&[usize]>,
    ) -> Result<Var> {
        let (qs, ks, vs) = (self.shape(q), self.shape(k), self.shape(v));
        let lay = Layout::new(qs, ks, vs, heads)?;
        if let Some(l) = key_lens {
            if l.len() != lay.n {
                return Err(dim_err!("{} key lengths for a batch of {}", l.len(), lay.n));
            }
        }
        let (qt, kt, vt) = (self.tensor(q), self.tensor(k), self.tensor(v));
        let (out, probs) = attention_forward(qt.data(), kt.data(), vt.data(), &lay, key_lens);
        let out = Tensor::new(qs, out)?;
        Ok(self.record(
            out,
            Op::Attention {
                q: q.index(),
                k: k.index(),
                v: v.index(),
                heads,
                key_lens: key_lens.map(<[usize]>::to_vec),
                probs,
            },
            &[q, k, v],
        ))
    }
}

fn attention_forward<T: Scalar>(
    q: &[T],
    k: &[T],
    v: &[T],
    lay: &Layout,
    key_lens: Option<&[usize]>,
) -> (Vec<T>, Vec<T>) {
    let (dh, tq, tk) = (lay.head_dim, lay.tq, lay.tk);
    let scale = T::one() / T::from_usize(dh).unwrap().sqrt();
    let mut out = vec![T::zero(); lay.n * lay.dim * tq];
    let mut probs = vec![T::zero(); lay.n * lay.heads * tq * tk];

    out.par_chunks_mut(lay.block(tq))
        .zip(probs.par_chunks_mut(tq * tk))
        .enumerate()
        .for_each(|(idx, (dst, p))| {
            let n = idx / lay.heads;
            let valid = valid_keys(key_lens, n, tk);
            if valid == 0 {
                return;
            }
            let qh = gather(&q[idx * lay.block(tq)..][..lay.block(tq)], dh, tq);
            let kh = gather(&k[idx * lay.block(tk)..][..lay.block(tk)], dh, tk);
            let vh = gather(&v[idx * lay.block(tk)..][..lay.block(tk)], dh, tk);
            let mut o = vec![T::zero(); dh * tq];
            for i in 0..tq {
                let row = &mut p[i * tk..(i + 1) * tk];
                let qi = &qh[i * dh..(i + 1) * dh];
                let mut m = T::neg_infinity();
                for (j, r) in row.iter_mut().enumerate().take(valid) {
                    *r = dot(qi, &kh[j * dh..(j + 1) * dh]) * scale;
                    m = m.max(*r);
                }
                let mut z = T::zero();
                for r in row.iter_mut().take(valid) {
                    *r = (*r - m).exp();
                    z += *r;
                }
                let oi = &mut o[i * dh..(i + 1) * dh];
                for (j, r) in row.iter_mut().enumerate().take(valid) {
                    *r = *r / z;
                    for (ov, &vv) in oi.iter_mut().zip(&vh[j * dh..(j + 1) * dh]) {
                        *ov += *r * vv;
                    }
                }
            }
            scatter(&o, dst, dh, tq);
        });
    (out, probs)
}

pub(crate) fn attention_backward<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
    key_lens: Option<&[usize]>,
    probs: &[T],
    g: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let lay = Layout::new(q.shape(), k.shape(), v.shape(), heads).expect("validated in forward");
    let (dh, tq, tk) = (lay.head_dim, lay.tq, lay.tk);
    let scale = T::one() / T::from_usize(dh).unwrap().sqrt();
    let mut gq = vec![T::zero(); q.numel()];
    let mut gk = vec![T::zero(); k.numel()];
    let mut gv = vec![T::zero(); v.numel()];

    gq.par_chunks_mut(lay.block(tq))
        .zip(gk.par_chunks_mut(lay.block(tk)))
        .zip(gv.par_chunks_mut(lay.block(tk)))
        .enumerate()
        .for_each(|(idx, ((dq_dst, dk_dst), dv_dst))| {
            let n = idx / lay.heads;
            let valid = valid_keys(key_lens, n, tk);
            if valid == 0 {
                return;
            }
            let qh = gather(&q.data()[idx * lay.block(tq)..][..lay.block(tq)], dh, tq);
            let kh = gather(&k.data()[idx * lay.block(tk)..][..lay.block(tk)], dh, tk);
            let vh = gather(&v.data()[idx * lay.block(tk)..][..lay.block(tk)], dh, tk);
            let gh = gather(&g[idx * lay.block(tq)..][..lay.block(tq)], dh, tq);
            let p = &probs[idx * tq * tk..][..tq * tk];
            let (mut dq, mut dk, mut dv) = (
                vec![T::zero(); dh * tq],
                vec![T::zero(); dh * tk],
                vec![T::zero(); dh * tk],
            );
            let mut ds = vec![T::zero(); tk];
            for i in 0..tq {
                let gi = &gh[i * dh..(i + 1) * dh];
                let prow = &p[i * tk..(i + 1) * tk];
                let mut row_dot = T::zero();
                for j in 0..valid {
                    let vj = &vh[j * dh..(j + 1) * dh];
                    for (d, &gv) in dv[j * dh..(j + 1) * dh].iter_mut().zip(gi) {
                        *d += prow[j] * gv;
                    }
                    let dp = dot(gi, vj);
                    ds[j] = dp;
                    row_dot += prow[j] * dp;
                }
                let dqi = &mut dq[i * dh..(i + 1) * dh];
                for j in 0..valid {
                    let s = prow[j] * (ds[j] - row_dot) * scale;
                    for (d, &kv) in dqi.iter_mut().zip(&kh[j * dh..(j + 1) * dh]) {
                        *d += s * kv;
                    }
                    for (d, &qv) in dk[j * dh..(j + 1) * dh].iter_mut().zip(&qh[i * dh..(i + 1) * dh]) {
                        *d += s * qv;
                    }
                }
            }
            scatter(&dq, dq_dst, dh, tq);
            scatter(&dk, dk_dst, dh, tk);
            scatter(&dv, dv_dst, dh, tk);
        });
    (gq, gk, gv)
}
