//! Severity to operator parameters.
//!
//! Each numeric parameter moves affinely from its no-op value at severity 0
//! to the heavy anchor at severity 1. Integer parameters are rounded.

use serde::{Deserialize, Serialize};

use super::kinds::DegradationKind::{self, *};
use super::mask::MaskStyle;
use super::streak::StreakFamily;
use crate::image::ResampleKernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DegradationParams {
    Identity,
    Jpeg { quality: u8 },
    GaussianBlur { sigma: f64 },
    LensBlur { radius: f64 },
    /// Direction is drawn from the seed.
    MotionBlur { length: f64 },
    ColorDiffuse { sigma: f64 },
    ColorShift { shift: usize },
    Saturation { factor: f64 },
    GaussianNoise { sigma: f64 },
    GaussianNoiseYcbcr { sigma_luma: f64, sigma_chroma: f64 },
    ImpulseNoise { density: f64 },
    MultiplicativeNoise { sigma: f64 },
    OverDenoise { noise_sigma: f64, blur_sigma: f64 },
    /// `gain · x^gamma + N(0, noise_sigma)`.
    Tone { gain: f64, gamma: f64, noise_sigma: f64 },
    MeanShift { offset: f64 },
    /// Downscale by `factor` then upscale back, same kernel both ways.
    Resize { factor: f64, kernel: ResampleKernel },
    OverSharpen { amount: f64, sigma: f64 },
    ContrastImbalance { steepness: f64 },
    ColorBlock { count: usize, min_size: usize, max_size: usize },
    Pixelate { block: usize },
    Discontinuous { band: usize, shift: usize },
    Jitter { amplitude: f64 },
    Mosaic,
    Mask { style: MaskStyle, coverage: f64 },
    /// Direction is drawn from the seed.
    Streak { family: StreakFamily, density: f64, length: f64 },
}

fn lerp(identity: f64, heavy: f64, s: f64) -> f64 {
    identity + (heavy - identity) * s
}

/// Parameter record for `kind` at `severity`. Severity is clamped to `[0, 1]`.
pub fn severity_to_params(kind: DegradationKind, severity: f64) -> DegradationParams {
    use DegradationParams as P;
    let s = severity.clamp(0.0, 1.0);
    match kind {
        Clean => P::Identity,
        JpegCompression => P::Jpeg {
            quality: lerp(90.0, 10.0, s).round().clamp(1.0, 100.0) as u8,
        },
        GaussianBlur => P::GaussianBlur { sigma: lerp(0.0, 4.0, s) },
        LensBlur => P::LensBlur { radius: lerp(0.0, 6.0, s) },
        MotionBlur => P::MotionBlur { length: lerp(1.0, 16.0, s) },
        ColorDiffuse => P::ColorDiffuse { sigma: lerp(0.0, 8.0, s) },
        ColorShift => P::ColorShift {
            shift: lerp(0.0, 4.0, s).round().max(1.0) as usize,
        },
        ColorSaturate => P::Saturation { factor: lerp(1.0, 2.2, s) },
        ColorSaturate2 => P::Saturation { factor: lerp(1.0, 0.25, s) },
        GaussianNoise => P::GaussianNoise { sigma: lerp(0.0, 50.0 / 255.0, s) },
        GaussianNoiseYcbcr => {
            let sigma = lerp(0.0, 50.0 / 255.0, s);
            P::GaussianNoiseYcbcr {
                sigma_luma: 0.6 * sigma,
                sigma_chroma: sigma,
            }
        }
        ImpulseNoise => P::ImpulseNoise { density: lerp(0.0, 0.05, s) },
        MultiplicativeNoise => P::MultiplicativeNoise { sigma: lerp(0.0, 0.3, s) },
        OverDenoise => P::OverDenoise {
            noise_sigma: lerp(0.0, 25.0 / 255.0, s),
            blur_sigma: lerp(0.0, 2.0, s),
        },
        OverBright => P::Tone {
            gain: lerp(1.0, 1.8, s),
            gamma: lerp(1.0, 0.6, s),
            noise_sigma: 0.0,
        },
        LowLight => P::Tone {
            gain: lerp(1.0, 0.35, s),
            gamma: lerp(1.0, 1.8, s),
            noise_sigma: lerp(0.0, 10.0 / 255.0, s),
        },
        MeanShift => P::MeanShift { offset: lerp(0.0, 0.3, s) },
        ResizeBicubic | ResizeBilinear | ResizeNearest | ResizeLanczos => P::Resize {
            factor: lerp(1.0, 4.0, s),
            kernel: match kind {
                ResizeBicubic => ResampleKernel::Bicubic,
                ResizeBilinear => ResampleKernel::Bilinear,
                ResizeNearest => ResampleKernel::Nearest,
                _ => ResampleKernel::Lanczos3,
            },
        },
        OverSharpen => P::OverSharpen {
            amount: lerp(0.0, 2.0, s),
            sigma: 1.5,
        },
        ContrastImbalance => P::ContrastImbalance { steepness: lerp(0.0, 8.0, s) },
        ColorBlock => P::ColorBlock {
            count: lerp(0.0, 8.0, s).round().max(1.0) as usize,
            min_size: 16,
            max_size: 48,
        },
        Pixelate => P::Pixelate {
            block: lerp(1.0, 8.0, s).round() as usize,
        },
        Discontinuous => P::Discontinuous {
            band: 32,
            shift: lerp(0.0, 8.0, s).round().max(1.0) as usize,
        },
        Jitter => P::Jitter { amplitude: lerp(0.0, 3.0, s) },
        Mosaic => P::Mosaic,
        IrregularMask => P::Mask {
            style: MaskStyle::Irregular,
            coverage: lerp(0.0, 0.3, s),
        },
        BlockMask => P::Mask {
            style: MaskStyle::Block,
            coverage: lerp(0.0, 0.3, s),
        },
        RainStreak => P::Streak {
            family: StreakFamily::Rain,
            density: s,
            length: lerp(1.0, 20.0, s),
        },
        SnowStreak => P::Streak {
            family: StreakFamily::Snow,
            density: s,
            length: lerp(1.0, 6.0, s),
        },
    }
}
