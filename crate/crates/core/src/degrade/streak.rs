//! Rain and snow overlays built from a seeded sparse particle field.

use serde::{Deserialize, Serialize};

use super::filters::{disk_kernel, filter_plane, motion_blur_kernel};
use super::prng::Prng;
use crate::image::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreakFamily {
    Rain,
    Snow,
}

/// Fraction of pixels seeded with a particle at density 1.
const RAIN_RATE: f64 = 0.02;
const SNOW_RATE: f64 = 0.006;
/// Peak brightness of a single streak after blurring.
const RAIN_GAIN: f64 = 0.55;
const SNOW_GAIN: f64 = 0.9;
/// Veil strength for snow at density 1.
const SNOW_VEIL: f64 = 0.15;

/// Adds precipitation of the given `density ∈ (0, 1]`. Streaks follow a
/// motion-blur line of `length` pixels at `angle` (0 = horizontal).
pub fn streak_overlay(
    img: &ImageBuffer,
    family: StreakFamily,
    density: f64,
    length: f64,
    angle: f64,
    seed: u64,
) -> ImageBuffer {
    let (h, w) = img.dims();
    let mut rng = Prng::new(seed, "streak");
    let rate = match family {
        StreakFamily::Rain => RAIN_RATE,
        StreakFamily::Snow => SNOW_RATE,
    } * density;
    let mut field = vec![0.0f32; h * w];
    let mut seeded = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !rng.bernoulli(rate) {
                continue;
            }
            seeded += 1;
            let strength = rng.uniform(0.6, 1.0) as f32;
            match family {
                StreakFamily::Rain => field[y * w + x] = field[y * w + x].max(strength),
                StreakFamily::Snow => {
                    // Flakes are soft disks with jittered radius.
                    let flake = disk_kernel(rng.uniform(0.3, 1.2 + density));
                    let r = (flake.size / 2) as i64;
                    let peak = flake.at(0, 0);
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (sy, sx) = (y as i64 + dy, x as i64 + dx);
                            if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                                continue;
                            }
                            let v = strength * flake.at(dy, dx) / peak;
                            let i = sy as usize * w + sx as usize;
                            field[i] = field[i].max(v);
                        }
                    }
                }
            }
        }
    }
    if seeded == 0 {
        return img.clone();
    }
    let kernel = motion_blur_kernel(length, angle);
    let peak = kernel.weights.iter().cloned().fold(0.0f32, f32::max);
    let gain = match family {
        StreakFamily::Rain => RAIN_GAIN,
        StreakFamily::Snow => SNOW_GAIN,
    } as f32
        / peak.max(1e-6);
    let blurred = filter_plane(&field, h, w, &kernel);
    let veil = match family {
        StreakFamily::Rain => 0.0,
        StreakFamily::Snow => (SNOW_VEIL * density) as f32,
    };
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let add = (blurred[y * w + x] * gain).min(1.0);
            let px = img.pixel(y, x).map(|v| {
                let v = v + veil * (1.0 - v);
                v + add * (1.0 - v * 0.3)
            });
            out.set_pixel(y, x, px);
        }
    }
    out
}
