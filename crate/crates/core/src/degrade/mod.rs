//! Seeded, parametric degradation bank.
//!
//! A [`DegradationSpec`] (kind, severity, seed) fully determines the output:
//! every random draw comes from a [`Prng`] stream derived from the spec seed.

pub mod filters;
pub mod jpeg;
mod kinds;
pub mod mask;
mod params;
pub mod prng;
pub mod streak;

pub use filters::motion_blur_kernel;
pub use jpeg::jpeg_degrade;
pub use kinds::{DegradationKind, SeverityPreset};
pub use mask::{mask_degrade, MaskStyle};
pub use params::{severity_to_params, DegradationParams};
pub use prng::{hash64, Prng};
pub use streak::{streak_overlay, StreakFamily};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::image::{
    hsv_to_rgb_px, resize, rgb_to_hsv_px, rgb_to_ycbcr_px, ycbcr_to_rgb_px, ImageBuffer,
};
use filters::{disk_kernel, filter_plane, gaussian_blur_plane};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    /// In `(0, 1]`.
    pub severity: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(kind: DegradationKind, severity: f64, seed: u64) -> Result<Self> {
        check_severity(severity)?;
        Ok(Self { kind, severity, seed })
    }
}

fn check_severity(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::Range(format!("severity must be in (0, 1], got {s}")))
    }
}

/// Uniform kind from `kinds`, uniform severity in `[lo, hi]`, fresh seed.
pub fn sample_spec(rng: &mut Prng, kinds: &[DegradationKind], (lo, hi): (f64, f64)) -> Result<DegradationSpec> {
    if kinds.is_empty() {
        return Err(config_err!("cannot sample from an empty kind set"));
    }
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(config_err!("severity range must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"));
    }
    let kind = kinds[rng.below(kinds.len() as u64) as usize];
    let severity = if lo == hi { lo } else { rng.uniform(lo, hi).clamp(lo, hi) };
    let seed = rng.next_u64();
    Ok(DegradationSpec { kind, severity, seed })
}

/// Degrades `img` according to `spec`. Only an out-of-range severity fails.
pub fn apply(img: &ImageBuffer, spec: &DegradationSpec) -> Result<ImageBuffer> {
    check_severity(spec.severity)?;
    let params = severity_to_params(spec.kind, spec.severity);
    apply_params(img, &params, spec.seed, spec.kind.name())
}

/// Runs an explicit parameter record. `label` names the random stream.
pub fn apply_params(img: &ImageBuffer, params: &DegradationParams, seed: u64, label: &str) -> Result<ImageBuffer> {
    use DegradationParams as P;
    let mut rng = Prng::new(seed, label);
    let (h, w) = img.dims();
    let out = match *params {
        P::Identity => img.clone(),
        P::Jpeg { quality } => jpeg_degrade(img, quality)?,
        P::GaussianBlur { sigma } => map_planes(img, |p| gaussian_blur_plane(p, h, w, sigma)),
        P::LensBlur { radius } => {
            let k = disk_kernel(radius);
            map_planes(img, |p| filter_plane(p, h, w, &k))
        }
        P::MotionBlur { length } => {
            let angle = rng.uniform(0.0, PI);
            let k = motion_blur_kernel(length, angle);
            map_planes(img, |p| filter_plane(p, h, w, &k))
        }
        P::ColorDiffuse { sigma } => {
            let ycc = img.map_pixels(rgb_to_ycbcr_px).to_planes();
            let planes = [ycc[0].clone(), gaussian_blur_plane(&ycc[1], h, w, sigma), gaussian_blur_plane(&ycc[2], h, w, sigma)];
            ImageBuffer::from_planes(h, w, &planes)?.map_pixels(ycbcr_to_rgb_px)
        }
        P::ColorShift { shift } => {
            let d = shift as i64;
            ImageBuffer::from_fn(h, w, |y, x, c| {
                let sx = match c {
                    0 => x as i64 - d,
                    2 => x as i64 + d,
                    _ => x as i64,
                };
                img.get(y, sx.clamp(0, w as i64 - 1) as usize, c)
            })?
        }
        P::Saturation { factor } => img.map_pixels(|px| {
            let [hue, s, v] = rgb_to_hsv_px(px);
            hsv_to_rgb_px([hue, (s * factor as f32).clamp(0.0, 1.0), v])
        }),
        P::GaussianNoise { sigma } => add_noise(img, &mut rng, sigma),
        P::GaussianNoiseYcbcr { sigma_luma, sigma_chroma } => img.map_pixels(|px| {
            let [y, cb, cr] = rgb_to_ycbcr_px(px);
            let y = y + (sigma_luma * rng.normal()) as f32;
            let cb = cb + (sigma_chroma * rng.normal()) as f32;
            let cr = cr + (sigma_chroma * rng.normal()) as f32;
            ycbcr_to_rgb_px([y, cb, cr])
        }),
        P::ImpulseNoise { density } => img.map_pixels(|px| {
            if rng.bernoulli(density) {
                if rng.bernoulli(0.5) {
                    [1.0; 3]
                } else {
                    [0.0; 3]
                }
            } else {
                px
            }
        }),
        P::MultiplicativeNoise { sigma } => {
            img.map_pixels(|px| px.map(|v| v * (1.0 + (sigma * rng.normal()) as f32)))
        }
        P::OverDenoise { noise_sigma, blur_sigma } => {
            let noisy = add_noise(img, &mut rng, noise_sigma);
            map_planes(&noisy, |p| gaussian_blur_plane(p, h, w, blur_sigma))
        }
        P::Tone { gain, gamma, noise_sigma } => img.map_pixels(|px| {
            px.map(|v| {
                let t = gain * f64::from(v).powf(gamma);
                let n = if noise_sigma > 0.0 { noise_sigma * rng.normal() } else { 0.0 };
                (t + n) as f32
            })
        }),
        P::MeanShift { offset } => img.map_pixels(|px| px.map(|v| v + offset as f32)),
        P::Resize { factor, kernel } => {
            let sh = ((h as f64 / factor).round() as usize).max(1);
            let sw = ((w as f64 / factor).round() as usize).max(1);
            let small = resize(img, sh, sw, kernel)?;
            resize(&small, h, w, kernel)?
        }
        P::OverSharpen { amount, sigma } => {
            let blurred = map_planes(img, |p| gaussian_blur_plane(p, h, w, sigma));
            let a = amount as f32;
            let data: Vec<f32> = img
                .data()
                .iter()
                .zip(blurred.data())
                .map(|(&x, &b)| x + a * (x - b))
                .collect();
            ImageBuffer::new(h, w, data)?
        }
        P::ContrastImbalance { steepness } => {
            if steepness < 1e-6 {
                img.clone()
            } else {
                let sig = |x: f64| 1.0 / (1.0 + (-steepness * (x - 0.5)).exp());
                let (lo, hi) = (sig(0.0), sig(1.0));
                img.map_pixels(|px| px.map(|v| ((sig(f64::from(v)) - lo) / (hi - lo)) as f32))
            }
        }
        P::ColorBlock { count, min_size, max_size } => {
            let mut out = img.clone();
            for _ in 0..count {
                let bh = (rng.range_inclusive(min_size as i64, max_size as i64) as usize).min(h);
                let bw = (rng.range_inclusive(min_size as i64, max_size as i64) as usize).min(w);
                let y0 = rng.below((h - bh + 1) as u64) as usize;
                let x0 = rng.below((w - bw + 1) as u64) as usize;
                let color = [rng.next_f64() as f32, rng.next_f64() as f32, rng.next_f64() as f32];
                for y in y0..y0 + bh {
                    for x in x0..x0 + bw {
                        out.set_pixel(y, x, color);
                    }
                }
            }
            out
        }
        P::Pixelate { block } => pixelate(img, block.max(1)),
        P::Discontinuous { band, shift } => {
            // Narrow images use narrower bands so at least two exist.
            let band = band.min(w / 2).max(1);
            ImageBuffer::from_fn(h, w, |y, x, c| {
                if (x / band) % 2 == 1 {
                    img.get(y, (x + w - shift % w) % w, c)
                } else {
                    img.get(y, x, c)
                }
            })?
        }
        P::Jitter { amplitude } => {
            let mut out = img.clone();
            for y in 0..h {
                for x in 0..w {
                    let dy = rng.uniform(-amplitude, amplitude).round() as i64;
                    let dx = rng.uniform(-amplitude, amplitude).round() as i64;
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    out.set_pixel(y, x, img.pixel(sy, sx));
                }
            }
            out
        }
        P::Mosaic => ImageBuffer::from_fn(h, w, |y, x, c| {
            let (cy, cx) = (y & !1, x & !1);
            let at = |dy: usize, dx: usize| img.get((cy + dy).min(h - 1), (cx + dx).min(w - 1), c);
            match c {
                0 => at(0, 0),
                2 => at(1, 1),
                _ => {
                    if y % 2 == 0 {
                        at(0, 1)
                    } else {
                        at(1, 0)
                    }
                }
            }
        })?,
        P::Mask { style, coverage } => mask_degrade(img, style, coverage, rng.next_u64()),
        P::Streak { family, density, length } => {
            let spread = match family {
                StreakFamily::Rain => 0.35,
                StreakFamily::Snow => 0.6,
            };
            let angle = PI / 2.0 + rng.uniform(-spread, spread);
            streak_overlay(img, family, density, length, angle, rng.next_u64())
        }
    };
    Ok(out)
}

fn map_planes(img: &ImageBuffer, f: impl Fn(&[f32]) -> Vec<f32>) -> ImageBuffer {
    let [r, g, b] = img.to_planes();
    let planes = [f(&r), f(&g), f(&b)];
    ImageBuffer::from_planes(img.height(), img.width(), &planes).expect("filters keep extents")
}

fn add_noise(img: &ImageBuffer, rng: &mut Prng, sigma: f64) -> ImageBuffer {
    img.map_pixels(|px| px.map(|v| v + (sigma * rng.normal()) as f32))
}

fn pixelate(img: &ImageBuffer, block: usize) -> ImageBuffer {
    let (h, w) = img.dims();
    let mut out = img.clone();
    for by in (0..h).step_by(block) {
        for bx in (0..w).step_by(block) {
            let (ey, ex) = ((by + block).min(h), (bx + block).min(w));
            let mut acc = [0.0f64; 3];
            for y in by..ey {
                for x in bx..ex {
                    for (a, v) in acc.iter_mut().zip(img.pixel(y, x)) {
                        *a += f64::from(v);
                    }
                }
            }
            let n = ((ey - by) * (ex - bx)) as f64;
            let mean = acc.map(|a| (a / n) as f32);
            for y in by..ey {
                for x in bx..ex {
                    out.set_pixel(y, x, mean);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::synth::natural_image;

    #[test]
    fn severity_is_validated() {
        let img = natural_image(8, 8, 0);
        for s in [0.0, -0.1, 1.01, f64::NAN] {
            let spec = DegradationSpec { kind: DegradationKind::GaussianNoise, severity: s, seed: 0 };
            assert!(matches!(apply(&img, &spec), Err(Error::Range(_))));
        }
        assert!(DegradationSpec::new(DegradationKind::Clean, 0.0, 1).is_err());
    }

    #[test]
    fn sample_spec_errors() {
        let mut rng = Prng::new(0, "t");
        assert!(sample_spec(&mut rng, &[], (0.1, 1.0)).is_err());
        assert!(sample_spec(&mut rng, &[DegradationKind::Mosaic], (0.5, 0.2)).is_err());
        assert!(sample_spec(&mut rng, &[DegradationKind::Mosaic], (0.0, 0.2)).is_err());
    }

    #[test]
    fn pixelate_block_means() {
        let img = ImageBuffer::from_fn(2, 2, |y, x, _| (y * 2 + x) as f32 / 4.0).unwrap();
        let out = pixelate(&img, 2);
        assert!(out.data().iter().all(|&v| (v - 0.375).abs() < 1e-7));
    }
}
