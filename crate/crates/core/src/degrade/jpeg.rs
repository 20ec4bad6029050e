//! JPEG quantization round trip (baseline 4:4:4, no entropy coding).

use crate::error::{config_err, Result};
use crate::image::{rgb_to_ycbcr_px, ycbcr_to_rgb_px, ImageBuffer};

/// IJG reference luminance table (natural order).
const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56, 14, 17, 22, 29, 51,
    87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120,
    101, 72, 92, 95, 98, 112, 100, 103, 99,
];

/// IJG reference chrominance table (natural order).
const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99,
];

/// Base table scaled by the IJG quality formula, entries clamped to `[1, 255]`.
pub fn quant_table(quality: u8, chroma: bool) -> Result<[u16; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(config_err!("JPEG quality must be in [1, 100], got {quality}"));
    }
    let q = u32::from(quality);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let base = if chroma { &CHROMA_TABLE } else { &LUMA_TABLE };
    let mut out = [0u16; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((u32::from(b) * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(out)
}

fn dct_matrix() -> [[f64; 8]; 8] {
    let mut m = [[0.0; 8]; 8];
    for (k, row) in m.iter_mut().enumerate() {
        let alpha = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for (n, v) in row.iter_mut().enumerate() {
            *v = alpha * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 16.0).cos();
        }
    }
    m
}

/// Orthonormal 2-D DCT-II of an 8×8 block.
pub fn dct8x8(block: &[f64; 64]) -> [f64; 64] {
    let m = dct_matrix();
    transform(block, &m, false)
}

/// Inverse of [`dct8x8`].
pub fn idct8x8(coef: &[f64; 64]) -> [f64; 64] {
    let m = dct_matrix();
    transform(coef, &m, true)
}

fn transform(input: &[f64; 64], m: &[[f64; 8]; 8], inverse: bool) -> [f64; 64] {
    let coeff = |a: usize, b: usize| if inverse { m[b][a] } else { m[a][b] };
    let mut tmp = [0.0; 64];
    for r in 0..8 {
        for k in 0..8 {
            tmp[r * 8 + k] = (0..8).map(|n| coeff(k, n) * input[r * 8 + n]).sum();
        }
    }
    let mut out = [0.0; 64];
    for c in 0..8 {
        for k in 0..8 {
            out[k * 8 + c] = (0..8).map(|n| coeff(k, n) * tmp[n * 8 + c]).sum();
        }
    }
    out
}

/// Quantizes each 8×8 block of each YCbCr plane at `quality` and reconstructs.
pub fn jpeg_degrade(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    let tables = [quant_table(quality, false)?, quant_table(quality, true)?];
    let (h, w) = img.dims();
    let ph = h.div_ceil(8) * 8;
    let pw = w.div_ceil(8) * 8;
    // Edge-replicated, level-shifted YCbCr planes on the padded grid.
    let mut planes = vec![vec![0.0f64; ph * pw]; 3];
    for y in 0..ph {
        for x in 0..pw {
            let ycc = rgb_to_ycbcr_px(img.pixel(y.min(h - 1), x.min(w - 1)));
            planes[0][y * pw + x] = f64::from(ycc[0]) * 255.0 - 128.0;
            // Chroma is already centered at 0.5; keep its neutral level at exactly 0.
            for c in 1..3 {
                planes[c][y * pw + x] = (f64::from(ycc[c]) - 0.5) * 255.0;
            }
        }
    }
    for (c, plane) in planes.iter_mut().enumerate() {
        let table = &tables[usize::from(c > 0)];
        for by in (0..ph).step_by(8) {
            for bx in (0..pw).step_by(8) {
                let mut block = [0.0; 64];
                for r in 0..8 {
                    block[r * 8..][..8].copy_from_slice(&plane[(by + r) * pw + bx..][..8]);
                }
                let mut coef = dct8x8(&block);
                for (v, &q) in coef.iter_mut().zip(table) {
                    let q = f64::from(q);
                    *v = (*v / q).round() * q;
                }
                let rec = idct8x8(&coef);
                for r in 0..8 {
                    plane[(by + r) * pw + bx..][..8].copy_from_slice(&rec[r * 8..][..8]);
                }
            }
        }
    }
    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let i = y * pw + x;
            let ycc = [
                ((planes[0][i] + 128.0) / 255.0) as f32,
                (planes[1][i] / 255.0 + 0.5) as f32,
                (planes[2][i] / 255.0 + 0.5) as f32,
            ];
            data.extend(ycbcr_to_rgb_px(ycc));
        }
    }
    ImageBuffer::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_scaling() {
        assert_eq!(quant_table(50, false).unwrap(), LUMA_TABLE);
        assert!(quant_table(100, false).unwrap().iter().all(|&q| q == 1));
        assert!(quant_table(100, true).unwrap().iter().all(|&q| q == 1));
        // quality 10 scales by 5: 16 -> 80
        assert_eq!(quant_table(10, false).unwrap()[0], 80);
        assert!(quant_table(1, true).unwrap().iter().all(|&q| q == 255));
        assert!(quant_table(0, false).is_err());
        assert!(quant_table(101, false).is_err());
    }

    #[test]
    fn dct_of_constant_block_is_dc_only() {
        let coef = dct8x8(&[3.0; 64]);
        assert!((coef[0] - 24.0).abs() < 1e-12);
        assert!(coef[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
