//! RGB float images and the pixel-level operations shared by the degradation
//! bank, metrics and training pipeline.

mod color;
mod geometry;
mod ppm;
mod resize;
pub mod synth;

pub use color::{hsv_to_rgb, hsv_to_rgb_px, rgb_to_hsv, rgb_to_hsv_px, rgb_to_ycbcr, rgb_to_ycbcr_px, ycbcr_to_rgb, ycbcr_to_rgb_px};
pub use geometry::{crop, flip_h, flip_v, pad_reflect, rot90};
pub use ppm::{decode_ppm, encode_ppm, load_ppm, save_ppm};
pub use resize::{resize, ResampleKernel};

use crate::error::{dim_err, Result};

/// `H × W × 3` image with samples in `[0, 1]`, stored row-major HWC.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub const CHANNELS: usize = 3;

    /// Builds an image, clipping every sample into `[0, 1]` (NaN maps to 0).
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(dim_err!("image extents must be positive, got {height}x{width}"));
        }
        if data.len() != height * width * 3 {
            return Err(dim_err!(
                "{height}x{width}x3 image needs {} samples, got {}",
                height * width * 3,
                data.len()
            ));
        }
        let mut img = Self { height, width, data };
        img.clip();
        Ok(img)
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        Self::new(height, width, rgb.repeat(height * width))
    }

    /// Builds an image from `f(y, x, c)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, data)
    }

    pub fn from_u8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| f32::from(b) / 255.0).collect())
    }

    /// 8-bit samples, `round(v·255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    /// Rounds every sample to the nearest 8-bit level.
    pub fn quantize_u8(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.to_u8().into_iter().map(|b| f32::from(b) / 255.0).collect(),
        }
    }

    /// Channel-planar copy: three `H·W` planes.
    pub fn to_planes(&self) -> [Vec<f32>; 3] {
        let n = self.height * self.width;
        let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                planes[c][i] = px[c];
            }
        }
        planes
    }

    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f32>; 3]) -> Result<Self> {
        let n = height * width;
        if planes.iter().any(|p| p.len() != n) {
            return Err(dim_err!("planes do not match {height}x{width}"));
        }
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            data.extend([planes[0][i], planes[1][i], planes[2][i]]);
        }
        Self::new(height, width, data)
    }

    /// Applies `f` to every pixel.
    pub fn map_pixels(&self, mut f: impl FnMut([f32; 3]) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for px in self.data.chunks_exact(3) {
            data.extend(f([px[0], px[1], px[2]]));
        }
        Self::new(self.height, self.width, data).expect("same extents")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Writes a pixel, clipping into `[0, 1]`.
    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        for c in 0..3 {
            self.data[i + c] = clip01(rgb[c]);
        }
    }

    /// Mean BT.601 luma.
    pub fn mean_luma(&self) -> f64 {
        let sum: f64 = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .sum();
        sum / (self.height * self.width) as f64
    }

    fn clip(&mut self) {
        for v in &mut self.data {
            *v = clip01(*v);
        }
    }
}

pub(crate) fn clip01(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}
