//! Procedural stand-ins for natural photographs.
//!
//! Images combine a smooth color gradient, low-frequency shading, a few soft
//! shapes with edges, and a little fine texture. That gives them the mix of
//! flat regions, edges and detail that restoration metrics react to.

use super::ImageBuffer;
use crate::degrade::prng::Prng;

struct Blob {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    color: [f64; 3],
    softness: f64,
    square: bool,
}

/// Deterministic synthetic scene of size `height × width`.
pub fn natural_image(height: usize, width: usize, seed: u64) -> ImageBuffer {
    let mut rng = Prng::new(seed, "synth");
    let corner: Vec<[f64; 3]> = (0..4)
        .map(|_| [rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)])
        .collect();
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let angle = rng.uniform(0.0, std::f64::consts::PI);
            let freq = rng.uniform(0.5, 2.5);
            (angle.cos() * freq, angle.sin() * freq, rng.uniform(0.0, 6.3), rng.uniform(0.03, 0.08))
        })
        .collect();
    let blobs: Vec<Blob> = (0..rng.range_inclusive(4, 8))
        .map(|_| Blob {
            cy: rng.next_f64(),
            cx: rng.next_f64(),
            ry: rng.uniform(0.06, 0.3),
            rx: rng.uniform(0.06, 0.3),
            color: [rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)],
            softness: rng.uniform(0.01, 0.08),
            square: rng.bernoulli(0.4),
        })
        .collect();
    let texture: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.uniform(8.0, 40.0), rng.uniform(8.0, 40.0), rng.uniform(0.0, 6.3)))
        .collect();

    let scale = height.max(width) as f64;
    ImageBuffer::from_fn(height, width, |y, x, c| {
        let v = (y as f64 + 0.5) / scale;
        let u = (x as f64 + 0.5) / scale;
        let (fv, fu) = (v * scale / height as f64, u * scale / width as f64);
        let mut val = corner[0][c] * (1.0 - fu) * (1.0 - fv)
            + corner[1][c] * fu * (1.0 - fv)
            + corner[2][c] * (1.0 - fu) * fv
            + corner[3][c] * fu * fv;
        for &(ky, kx, phase, amp) in &waves {
            val += amp * (std::f64::consts::TAU * (ky * v + kx * u) + phase + c as f64 * 0.3).sin();
        }
        for b in &blobs {
            let dy = (v - b.cy) / b.ry;
            let dx = (u - b.cx) / b.rx;
            let dist = if b.square { dy.abs().max(dx.abs()) } else { (dy * dy + dx * dx).sqrt() };
            let alpha = 1.0 / (1.0 + ((dist - 1.0) / b.softness).exp());
            val = val * (1.0 - alpha) + b.color[c] * alpha;
        }
        for &(fy, fx, phase) in &texture {
            val += 0.012 * (std::f64::consts::TAU * (fy * v + fx * u) + phase).sin();
        }
        val.clamp(0.02, 0.98) as f32
    })
    .expect("positive extents")
}
