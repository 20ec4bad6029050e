//! Inpainting-style masks: free-form brush strokes or rectangles set to black.

use serde::{Deserialize, Serialize};

use super::prng::Prng;
use crate::image::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStyle {
    Irregular,
    Block,
}

/// Boolean mask (`true` = masked) of size `h × w` covering about `coverage`
/// of the image. Shapes are added one at a time and never overshoot the
/// target by more than one brush stamp or any rectangle.
pub fn generate_mask(h: usize, w: usize, style: MaskStyle, coverage: f64, seed: u64) -> Vec<bool> {
    let total = h * w;
    let target = ((coverage.clamp(0.0, 1.0) * total as f64).round() as usize).min(total);
    let mut mask = vec![false; total];
    let mut covered = 0usize;
    if target == 0 {
        return mask;
    }
    let mut rng = Prng::new(seed, "mask");
    match style {
        MaskStyle::Block => {
            let mut guard = 0;
            while covered < target && guard < 1_000_000 {
                guard += 1;
                let remaining = (target - covered) as f64;
                let max_side_h = (h as f64 / 3.0).max(1.0);
                let max_side_w = (w as f64 / 3.0).max(1.0);
                let mut bh = rng.uniform(1.0, max_side_h + 1.0).floor().max(1.0);
                let mut bw = rng.uniform(1.0, max_side_w + 1.0).floor().max(1.0);
                // Keep each rectangle no larger than what is still missing.
                if bh * bw > remaining {
                    let shrink = (remaining / (bh * bw)).sqrt();
                    bh = (bh * shrink).floor().max(1.0);
                    bw = (remaining / bh).floor().max(1.0);
                }
                let (bh, bw) = (bh as usize, bw as usize);
                let y0 = rng.below((h - bh + 1) as u64) as usize;
                let x0 = rng.below((w - bw + 1) as u64) as usize;
                for y in y0..y0 + bh {
                    for x in x0..x0 + bw {
                        if !mask[y * w + x] {
                            mask[y * w + x] = true;
                            covered += 1;
                        }
                    }
                }
            }
        }
        MaskStyle::Irregular => {
            let max_radius = ((0.02 * target as f64 / std::f64::consts::PI).sqrt()).clamp(1.0, 12.0);
            let mut guard = 0;
            'strokes: while covered < target && guard < 10_000 {
                guard += 1;
                let radius = rng.uniform(1.0, max_radius + 1e-9);
                let mut y = rng.uniform(0.0, h as f64);
                let mut x = rng.uniform(0.0, w as f64);
                let mut heading = rng.uniform(0.0, std::f64::consts::TAU);
                let steps = rng.range_inclusive(8, 40);
                for _ in 0..steps {
                    covered += stamp_disk(&mut mask, h, w, y, x, radius);
                    if covered >= target {
                        break 'strokes;
                    }
                    heading += rng.uniform(-0.6, 0.6);
                    y = (y + heading.sin() * radius).clamp(0.0, h as f64 - 1.0);
                    x = (x + heading.cos() * radius).clamp(0.0, w as f64 - 1.0);
                }
            }
        }
    }
    mask
}

fn stamp_disk(mask: &mut [bool], h: usize, w: usize, cy: f64, cx: f64, r: f64) -> usize {
    let mut added = 0;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let y1 = ((cy + r).ceil() as usize).min(h - 1);
    let x0 = (cx - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil() as usize).min(w - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            if dy * dy + dx * dx <= r * r && !mask[y * w + x] {
                mask[y * w + x] = true;
                added += 1;
            }
        }
    }
    added
}

/// Blacks out masked pixels; others are copied unchanged.
pub fn mask_degrade(img: &ImageBuffer, style: MaskStyle, coverage: f64, seed: u64) -> ImageBuffer {
    let (h, w) = img.dims();
    let mask = generate_mask(h, w, style, coverage, seed);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            if mask[y * w + x] {
                out.set_pixel(y, x, [0.0; 3]);
            }
        }
    }
    out
}
