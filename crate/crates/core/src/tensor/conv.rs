//! Direct 2-D convolution with groups. Every kernel parallelizes over
//! independent output planes and reduces in a fixed order, so results do not
//! depend on the thread count.

use rayon::prelude::*;

use super::{Scalar, Shape, Tensor};
use crate::error::{config_err, dim_err, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub input: Shape,
    pub weight: Shape,
    pub output: Shape,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvGeometry {
    pub fn new(input: Shape, weight: Shape, stride: usize, padding: usize, groups: usize) -> Result<Self> {
        if groups == 0 || input.c % groups != 0 {
            return Err(config_err!("groups {groups} must divide input channels {}", input.c));
        }
        if weight.n % groups != 0 {
            return Err(config_err!("groups {groups} must divide output channels {}", weight.n));
        }
        if weight.c != input.c / groups {
            return Err(dim_err!(
                "weight {weight} expects {} input channels per group, input has {}",
                weight.c,
                input.c / groups
            ));
        }
        if weight.h != weight.w {
            return Err(dim_err!("only square kernels are supported, got {weight}"));
        }
        if stride == 0 {
            return Err(config_err!("stride must be positive"));
        }
        let k = weight.h;
        let (ph, pw) = (input.h + 2 * padding, input.w + 2 * padding);
        if ph < k || pw < k {
            return Err(dim_err!("kernel {k} larger than padded input {ph}x{pw}"));
        }
        if (ph - k) % stride != 0 || (pw - k) % stride != 0 {
            return Err(dim_err!(
                "padding {padding} and stride {stride} give fractional output extents for {input}"
            ));
        }
        let output = Shape::new(input.n, weight.n, (ph - k) / stride + 1, (pw - k) / stride + 1);
        Ok(Self {
            input,
            weight,
            output,
            stride,
            padding,
            groups,
        })
    }

    fn k(&self) -> usize {
        self.weight.h
    }

    fn cin_per_group(&self) -> usize {
        self.input.c / self.groups
    }

    fn cout_per_group(&self) -> usize {
        self.output.c / self.groups
    }

    fn is_pointwise(&self) -> bool {
        self.k() == 1 && self.stride == 1 && self.padding == 0
    }

    /// Output columns `ow` whose input column `ow*s + kw - p` is in bounds.
    fn valid_cols(&self, kw: usize) -> (usize, usize) {
        valid_range(self.input.w, self.output.w, self.stride, self.padding, kw)
    }

    fn valid_rows(&self, kh: usize) -> (usize, usize) {
        valid_range(self.input.h, self.output.h, self.stride, self.padding, kh)
    }
}

/// Half-open range of output positions `o` with `0 <= o*s + k - p < len`.
fn valid_range(len: usize, out_len: usize, s: usize, p: usize, k: usize) -> (usize, usize) {
    let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
    // o*s + k - p <= len - 1  <=>  o <= (len - 1 + p - k) / s
    let hi = if len + p < k + 1 {
        0
    } else {
        ((len - 1 + p - k) / s + 1).min(out_len)
    };
    (lo.min(hi), hi)
}

pub(crate) fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    geom: &ConvGeometry,
) -> Tensor<T> {
    let out_shape = geom.output;
    let plane_out = out_shape.plane();
    let plane_in = geom.input.plane();
    let k = geom.k();
    let cin_g = geom.cin_per_group();
    let cout_g = geom.cout_per_group();
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![T::zero(); out_shape.numel()];

    out.par_chunks_mut(plane_out).enumerate().for_each(|(idx, dst)| {
        let (n, co) = (idx / out_shape.c, idx % out_shape.c);
        let bias = b.map_or(T::zero(), |b| b.data()[co]);
        dst.iter_mut().for_each(|v| *v = bias);
        let g = co / cout_g;
        for cil in 0..cin_g {
            let ci = g * cin_g + cil;
            let src = &xd[(n * geom.input.c + ci) * plane_in..][..plane_in];
            let wbase = (co * cin_g + cil) * k * k;
            if geom.is_pointwise() {
                let wv = wd[wbase];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += wv * s;
                }
                continue;
            }
            for kh in 0..k {
                let (oh_lo, oh_hi) = geom.valid_rows(kh);
                for kw in 0..k {
                    let wv = wd[wbase + kh * k + kw];
                    let (ow_lo, ow_hi) = geom.valid_cols(kw);
                    if ow_lo >= ow_hi {
                        continue;
                    }
                    for oh in oh_lo..oh_hi {
                        let ih = oh * geom.stride + kh - geom.padding;
                        let srow = &src[ih * geom.input.w..][..geom.input.w];
                        let drow = &mut dst[oh * out_shape.w..][..out_shape.w];
                        if geom.stride == 1 {
                            let off = ow_lo + kw - geom.padding;
                            let len = ow_hi - ow_lo;
                            for (d, &s) in drow[ow_lo..ow_hi].iter_mut().zip(&srow[off..off + len]) {
                                *d += wv * s;
                            }
                        } else {
                            for ow in ow_lo..ow_hi {
                                drow[ow] += wv * srow[ow * geom.stride + kw - geom.padding];
                            }
                        }
                    }
                }
            }
        }
    });
    Tensor::new(out_shape, out).expect("conv output shape")
}

pub(crate) fn conv2d_backward_input<T: Scalar>(w: &Tensor<T>, g: &[T], geom: &ConvGeometry) -> Vec<T> {
    let in_shape = geom.input;
    let out_shape = geom.output;
    let plane_in = in_shape.plane();
    let plane_out = out_shape.plane();
    let k = geom.k();
    let cin_g = geom.cin_per_group();
    let cout_g = geom.cout_per_group();
    let wd = w.data();
    let mut gx = vec![T::zero(); in_shape.numel()];

    gx.par_chunks_mut(plane_in).enumerate().for_each(|(idx, dst)| {
        let (n, ci) = (idx / in_shape.c, idx % in_shape.c);
        let grp = ci / cin_g;
        let cil = ci % cin_g;
        for col in 0..cout_g {
            let co = grp * cout_g + col;
            let gsrc = &g[(n * out_shape.c + co) * plane_out..][..plane_out];
            let wbase = (co * cin_g + cil) * k * k;
            if geom.is_pointwise() {
                let wv = wd[wbase];
                for (d, &s) in dst.iter_mut().zip(gsrc) {
                    *d += wv * s;
                }
                continue;
            }
            for kh in 0..k {
                let (oh_lo, oh_hi) = geom.valid_rows(kh);
                for kw in 0..k {
                    let wv = wd[wbase + kh * k + kw];
                    let (ow_lo, ow_hi) = geom.valid_cols(kw);
                    if ow_lo >= ow_hi {
                        continue;
                    }
                    for oh in oh_lo..oh_hi {
                        let ih = oh * geom.stride + kh - geom.padding;
                        let grow = &gsrc[oh * out_shape.w..][..out_shape.w];
                        let drow = &mut dst[ih * in_shape.w..][..in_shape.w];
                        if geom.stride == 1 {
                            let off = ow_lo + kw - geom.padding;
                            let len = ow_hi - ow_lo;
                            for (d, &s) in drow[off..off + len].iter_mut().zip(&grow[ow_lo..ow_hi]) {
                                *d += wv * s;
                            }
                        } else {
                            for ow in ow_lo..ow_hi {
                                drow[ow * geom.stride + kw - geom.padding] += wv * grow[ow];
                            }
                        }
                    }
                }
            }
        }
    });
    gx
}

pub(crate) fn conv2d_backward_weight<T: Scalar>(x: &Tensor<T>, g: &[T], geom: &ConvGeometry) -> Vec<T> {
    let in_shape = geom.input;
    let out_shape = geom.output;
    let plane_in = in_shape.plane();
    let plane_out = out_shape.plane();
    let k = geom.k();
    let cin_g = geom.cin_per_group();
    let cout_g = geom.cout_per_group();
    let xd = x.data();
    let per_co = cin_g * k * k;
    let mut gw = vec![T::zero(); geom.weight.numel()];

    gw.par_chunks_mut(per_co).enumerate().for_each(|(co, dst)| {
        let grp = co / cout_g;
        for n in 0..in_shape.n {
            let gsrc = &g[(n * out_shape.c + co) * plane_out..][..plane_out];
            for cil in 0..cin_g {
                let ci = grp * cin_g + cil;
                let src = &xd[(n * in_shape.c + ci) * plane_in..][..plane_in];
                if geom.is_pointwise() {
                    dst[cil] += dot(gsrc, src);
                    continue;
                }
                for kh in 0..k {
                    let (oh_lo, oh_hi) = geom.valid_rows(kh);
                    for kw in 0..k {
                        let (ow_lo, ow_hi) = geom.valid_cols(kw);
                        if ow_lo >= ow_hi {
                            continue;
                        }
                        let mut acc = T::zero();
                        for oh in oh_lo..oh_hi {
                            let ih = oh * geom.stride + kh - geom.padding;
                            let grow = &gsrc[oh * out_shape.w..][..out_shape.w];
                            let srow = &src[ih * in_shape.w..][..in_shape.w];
                            if geom.stride == 1 {
                                let off = ow_lo + kw - geom.padding;
                                acc += dot(&grow[ow_lo..ow_hi], &srow[off..off + (ow_hi - ow_lo)]);
                            } else {
                                for ow in ow_lo..ow_hi {
                                    acc += grow[ow] * srow[ow * geom.stride + kw - geom.padding];
                                }
                            }
                        }
                        dst[(cil * k + kh) * k + kw] += acc;
                    }
                }
            }
        }
    });
    gw
}

pub(crate) fn conv2d_backward_bias<T: Scalar>(g: &[T], geom: &ConvGeometry) -> Vec<T> {
    let out_shape = geom.output;
    let plane = out_shape.plane();
    (0..out_shape.c)
        .map(|co| {
            let mut acc = T::zero();
            for n in 0..out_shape.n {
                acc += g[(n * out_shape.c + co) * plane..][..plane].iter().copied().sum::<T>();
            }
            acc
        })
        .collect()
}

/// Four-way unrolled dot product; the fixed association keeps results
/// reproducible while letting the compiler vectorize.
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (T::zero(), T::zero(), T::zero(), T::zero());
    let chunks = n / 4;
    for i in 0..chunks {
        let j = i * 4;
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    let mut tail = T::zero();
    for j in chunks * 4..n {
        tail += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook six-loop convolution used as an oracle for the blocked kernel.
    fn naive(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], s: usize, p: usize, groups: usize) -> Tensor<f64> {
        let geom = ConvGeometry::new(x.shape(), w.shape(), s, p, groups).unwrap();
        let o = geom.output;
        let (cin_g, cout_g, k) = (x.shape().c / groups, o.c / groups, w.shape().h);
        Tensor::from_fn(o, |i| {
            let ow = i % o.w;
            let oh = (i / o.w) % o.h;
            let co = (i / o.plane()) % o.c;
            let n = i / (o.plane() * o.c);
            let g = co / cout_g;
            let mut acc = b[co];
            for cil in 0..cin_g {
                for kh in 0..k {
                    for kw in 0..k {
                        let ih = (oh * s + kh) as isize - p as isize;
                        let iw = (ow * s + kw) as isize - p as isize;
                        if ih < 0 || iw < 0 || ih >= x.shape().h as isize || iw >= x.shape().w as isize {
                            continue;
                        }
                        acc += w.at(co, cil, kh, kw) * x.at(n, g * cin_g + cil, ih as usize, iw as usize);
                    }
                }
            }
            acc
        })
    }

    fn pseudo(shape: Shape, seed: u64) -> Tensor<f64> {
        let mut s = seed;
        Tensor::from_fn(shape, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        })
    }

    #[test]
    fn matches_naive_for_assorted_geometries() {
        let cases = [
            (Shape::new(2, 4, 7, 6), Shape::new(6, 2, 3, 3), 1, 1, 2),
            (Shape::new(1, 3, 9, 9), Shape::new(5, 3, 3, 3), 2, 1, 1),
            (Shape::new(1, 4, 9, 9), Shape::new(4, 1, 7, 7), 1, 3, 4),
            (Shape::new(2, 5, 4, 3), Shape::new(7, 5, 1, 1), 1, 0, 1),
            (Shape::new(1, 2, 5, 5), Shape::new(2, 2, 3, 3), 1, 0, 1),
        ];
        for (i, (xs, ws, s, p, g)) in cases.into_iter().enumerate() {
            let x = pseudo(xs, i as u64 + 1);
            let w = pseudo(ws, i as u64 + 100);
            let b: Vec<f64> = (0..ws.n).map(|c| c as f64 * 0.1).collect();
            let geom = ConvGeometry::new(xs, ws, s, p, g).unwrap();
            let fast = conv2d_forward(&x, &w, Some(&Tensor::channel_vector(&b)), &geom);
            let slow = naive(&x, &w, &b, s, p, g);
            assert_eq!(fast.shape(), slow.shape());
            assert!(fast.max_abs_diff(&slow) < 1e-12, "case {i}");
        }
    }

    #[test]
    fn rejects_bad_groups_and_extents() {
        let err = ConvGeometry::new(Shape::new(1, 3, 4, 4), Shape::new(2, 1, 3, 3), 1, 1, 2);
        assert!(matches!(err, Err(crate::Error::Config(_))));
        let err = ConvGeometry::new(Shape::new(1, 4, 4, 4), Shape::new(2, 3, 3, 3), 1, 1, 1);
        assert!(matches!(err, Err(crate::Error::Dimension(_))));
        let err = ConvGeometry::new(Shape::new(1, 1, 4, 4), Shape::new(1, 1, 3, 3), 2, 0, 1);
        assert!(matches!(err, Err(crate::Error::Dimension(_))));
    }
}
