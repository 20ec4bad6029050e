//! Separable resampling with pixel-center alignment and edge clamping.
//!
//! When shrinking, the kernel is stretched by the scale factor so it also acts
//! as the anti-aliasing prefilter. Nearest neighbour is never stretched.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ImageBuffer;
use crate::error::{config_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleKernel {
    Nearest,
    Bilinear,
    /// Cubic convolution with `a = -0.5`.
    Bicubic,
    /// Three-lobe Lanczos.
    Lanczos3,
}

impl ResampleKernel {
    pub const ALL: [ResampleKernel; 4] = [Self::Nearest, Self::Bilinear, Self::Bicubic, Self::Lanczos3];

    fn support(self) -> f64 {
        match self {
            Self::Nearest => 0.5,
            Self::Bilinear => 1.0,
            Self::Bicubic => 2.0,
            Self::Lanczos3 => 3.0,
        }
    }

    fn weight(self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            Self::Nearest => {
                if x < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Bilinear => (1.0 - x).max(0.0),
            Self::Bicubic => {
                const A: f64 = -0.5;
                if x < 1.0 {
                    ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
                } else if x < 2.0 {
                    ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
                } else {
                    0.0
                }
            }
            Self::Lanczos3 => {
                if x < 3.0 {
                    sinc(x) * sinc(x / 3.0)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Nearest => "nearest",
            Self::Bilinear => "bilinear",
            Self::Bicubic => "bicubic",
            Self::Lanczos3 => "lanczos3",
        }
    }
}

impl FromStr for ResampleKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_err!("unknown resample kernel {s:?}"))
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Per output index: first source index and normalized weights.
struct Taps {
    start: Vec<usize>,
    weights: Vec<Vec<f32>>,
}

fn taps(src_len: usize, dst_len: usize, kernel: ResampleKernel) -> Taps {
    let scale = src_len as f64 / dst_len as f64;
    let mut start = Vec::with_capacity(dst_len);
    let mut weights = Vec::with_capacity(dst_len);
    for d in 0..dst_len {
        if kernel == ResampleKernel::Nearest {
            let s = (((d as f64 + 0.5) * scale).floor() as usize).min(src_len - 1);
            start.push(s);
            weights.push(vec![1.0]);
            continue;
        }
        let center = (d as f64 + 0.5) * scale - 0.5;
        let stretch = scale.max(1.0);
        let radius = kernel.support() * stretch;
        let lo = (center - radius).floor() as i64;
        let hi = (center + radius).ceil() as i64;
        let mut w: Vec<f64> = (lo..=hi).map(|j| kernel.weight((j as f64 - center) / stretch)).collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        // Fold clamped taps onto the edge samples so the kernel window is contiguous.
        let mut folded = vec![0.0f64; src_len];
        let (mut first, mut last) = (usize::MAX, 0usize);
        for (j, wt) in (lo..=hi).zip(w) {
            if wt == 0.0 {
                continue;
            }
            let idx = j.clamp(0, src_len as i64 - 1) as usize;
            folded[idx] += wt;
            first = first.min(idx);
            last = last.max(idx);
        }
        if first == usize::MAX {
            first = (center.round().max(0.0) as usize).min(src_len - 1);
            last = first;
            folded[first] = 1.0;
        }
        start.push(first);
        weights.push(folded[first..=last].iter().map(|&v| v as f32).collect());
    }
    Taps { start, weights }
}

/// Resizes to `out_h × out_w`. Overshooting kernels are clipped afterwards.
pub fn resize(img: &ImageBuffer, out_h: usize, out_w: usize, kernel: ResampleKernel) -> Result<ImageBuffer> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Range(format!("resize target {out_h}x{out_w} must be positive")));
    }
    let (h, w) = img.dims();
    let tx = taps(w, out_w, kernel);
    let ty = taps(h, out_h, kernel);
    let src = img.data();

    // Horizontal pass: h × out_w × 3.
    let mut tmp = vec![0.0f32; h * out_w * 3];
    for y in 0..h {
        for x in 0..out_w {
            let mut acc = [0.0f32; 3];
            for (k, &wt) in tx.weights[x].iter().enumerate() {
                let i = (y * w + tx.start[x] + k) * 3;
                for c in 0..3 {
                    acc[c] += wt * src[i + c];
                }
            }
            tmp[(y * out_w + x) * 3..][..3].copy_from_slice(&acc);
        }
    }
    // Vertical pass.
    let mut out = vec![0.0f32; out_h * out_w * 3];
    for y in 0..out_h {
        for (k, &wt) in ty.weights[y].iter().enumerate() {
            let row = &tmp[(ty.start[y] + k) * out_w * 3..][..out_w * 3];
            for (o, &v) in out[y * out_w * 3..][..out_w * 3].iter_mut().zip(row) {
                *o += wt * v;
            }
        }
    }
    ImageBuffer::new(out_h, out_w, out)
}
