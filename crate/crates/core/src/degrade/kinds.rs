use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

/// Every degradation in the bank. `Clean` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    JpegCompression,
    GaussianBlur,
    LensBlur,
    MotionBlur,
    ColorDiffuse,
    ColorShift,
    ColorSaturate,
    ColorSaturate2,
    GaussianNoise,
    GaussianNoiseYcbcr,
    ImpulseNoise,
    MultiplicativeNoise,
    OverDenoise,
    OverBright,
    LowLight,
    MeanShift,
    ResizeBicubic,
    ResizeBilinear,
    ResizeNearest,
    ResizeLanczos,
    OverSharpen,
    ContrastImbalance,
    ColorBlock,
    Pixelate,
    Discontinuous,
    Jitter,
    Mosaic,
    IrregularMask,
    BlockMask,
    RainStreak,
    SnowStreak,
    Clean,
}

use DegradationKind::*;

impl DegradationKind {
    pub const ALL: [DegradationKind; 32] = [
        JpegCompression,
        GaussianBlur,
        LensBlur,
        MotionBlur,
        ColorDiffuse,
        ColorShift,
        ColorSaturate,
        ColorSaturate2,
        GaussianNoise,
        GaussianNoiseYcbcr,
        ImpulseNoise,
        MultiplicativeNoise,
        OverDenoise,
        OverBright,
        LowLight,
        MeanShift,
        ResizeBicubic,
        ResizeBilinear,
        ResizeNearest,
        ResizeLanczos,
        OverSharpen,
        ContrastImbalance,
        ColorBlock,
        Pixelate,
        Discontinuous,
        Jitter,
        Mosaic,
        IrregularMask,
        BlockMask,
        RainStreak,
        SnowStreak,
        Clean,
    ];

    /// All kinds except `Clean`.
    pub fn degrading() -> Vec<DegradationKind> {
        Self::ALL.into_iter().filter(|&k| k != Clean).collect()
    }

    /// Stable snake_case identifier.
    pub fn name(self) -> &'static str {
        match self {
            JpegCompression => "jpeg_compression",
            GaussianBlur => "gaussian_blur",
            LensBlur => "lens_blur",
            MotionBlur => "motion_blur",
            ColorDiffuse => "color_diffuse",
            ColorShift => "color_shift",
            ColorSaturate => "color_saturate",
            ColorSaturate2 => "color_saturate2",
            GaussianNoise => "gaussian_noise",
            GaussianNoiseYcbcr => "gaussian_noise_ycbcr",
            ImpulseNoise => "impulse_noise",
            MultiplicativeNoise => "multiplicative_noise",
            OverDenoise => "over_denoise",
            OverBright => "over_bright",
            LowLight => "low_light",
            MeanShift => "mean_shift",
            ResizeBicubic => "resize_bicubic",
            ResizeBilinear => "resize_bilinear",
            ResizeNearest => "resize_nearest",
            ResizeLanczos => "resize_lanczos",
            OverSharpen => "over_sharpen",
            ContrastImbalance => "contrast_imbalance",
            ColorBlock => "color_block",
            Pixelate => "pixelate",
            Discontinuous => "discontinuous",
            Jitter => "jitter",
            Mosaic => "mosaic",
            IrregularMask => "irregular_mask",
            BlockMask => "block_mask",
            RainStreak => "rain_streak",
            SnowStreak => "snow_streak",
            Clean => "clean",
        }
    }

    /// Short natural-language phrase for prompts.
    pub fn phrase(self) -> &'static str {
        match self {
            JpegCompression => "jpeg compression artifacts",
            GaussianBlur => "gaussian blur",
            LensBlur => "lens blur",
            MotionBlur => "motion blur",
            ColorDiffuse => "color diffusion",
            ColorShift => "color shift",
            ColorSaturate => "over saturated color",
            ColorSaturate2 => "under saturated color",
            GaussianNoise => "gaussian noise",
            GaussianNoiseYcbcr => "ycbcr gaussian noise",
            ImpulseNoise => "impulse noise",
            MultiplicativeNoise => "multiplicative noise",
            OverDenoise => "over denoising",
            OverBright => "over brightness",
            LowLight => "low light",
            MeanShift => "mean shift",
            ResizeBicubic => "bicubic resize",
            ResizeBilinear => "bilinear resize",
            ResizeNearest => "nearest resize",
            ResizeLanczos => "lanczos resize",
            OverSharpen => "over sharpening",
            ContrastImbalance => "contrast imbalance",
            ColorBlock => "color blocks",
            Pixelate => "pixelation",
            Discontinuous => "discontinuous bands",
            Jitter => "pixel jitter",
            Mosaic => "mosaic",
            IrregularMask => "irregular mask",
            BlockMask => "block mask",
            RainStreak => "rain streaks",
            SnowStreak => "snow streaks",
            Clean => "nothing",
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
                config_err!("unknown degradation kind {s:?}; valid kinds: {}", names.join(", "))
            })
    }
}

/// Named severity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityPreset {
    Slight,
    Middle,
    Heavy,
}

impl SeverityPreset {
    pub const ALL: [SeverityPreset; 3] = [Self::Slight, Self::Middle, Self::Heavy];

    pub fn value(self) -> f64 {
        match self {
            Self::Slight => 0.33,
            Self::Middle => 0.66,
            Self::Heavy => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Slight => "slight",
            Self::Middle => "middle",
            Self::Heavy => "heavy",
        }
    }
}

impl FromStr for SeverityPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| config_err!("unknown severity preset {s:?}"))
    }
}
