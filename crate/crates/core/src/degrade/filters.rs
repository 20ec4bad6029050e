//! Plane filters with edge clamping, and the blur kernels used by the bank.

/// Normalized 1-D Gaussian taps of radius `ceil(3σ)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| (v / total) as f32).collect()
}

/// Separable Gaussian blur of one `h × w` plane. `σ ≤ 1e-3` is the identity.
pub fn gaussian_blur_plane(plane: &[f32], h: usize, w: usize, sigma: f64) -> Vec<f32> {
    if sigma <= 1e-3 {
        return plane.to_vec();
    }
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as i64;
    let mut tmp = vec![0.0f32; h * w];
    for y in 0..h {
        let row = &plane[y * w..][..w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let sx = (x as i64 + k as i64 - r).clamp(0, w as i64 - 1) as usize;
                acc += t * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for (k, &t) in taps.iter().enumerate() {
            let sy = (y as i64 + k as i64 - r).clamp(0, h as i64 - 1) as usize;
            for (o, &v) in out[y * w..][..w].iter_mut().zip(&tmp[sy * w..][..w]) {
                *o += t * v;
            }
        }
    }
    out
}

/// Square 2-D kernel of odd side length, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    pub size: usize,
    pub weights: Vec<f32>,
}

impl Kernel2d {
    pub fn sum(&self) -> f64 {
        self.weights.iter().map(|&v| f64::from(v)).sum()
    }

    pub fn at(&self, dy: i64, dx: i64) -> f32 {
        let r = (self.size / 2) as i64;
        self.weights[((dy + r) * self.size as i64 + dx + r) as usize]
    }

    fn normalized(size: usize, mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        for v in &mut weights {
            *v /= total;
        }
        Self {
            size,
            weights: weights.into_iter().map(|v| v as f32).collect(),
        }
    }
}

/// Correlates a plane with `kernel`, clamping at the borders.
pub fn filter_plane(plane: &[f32], h: usize, w: usize, kernel: &Kernel2d) -> Vec<f32> {
    let r = (kernel.size / 2) as i64;
    let taps: Vec<(i64, i64, f32)> = (0..kernel.size)
        .flat_map(|ky| (0..kernel.size).map(move |kx| (ky, kx)))
        .filter_map(|(ky, kx)| {
            let wt = kernel.weights[ky * kernel.size + kx];
            (wt != 0.0).then_some((ky as i64 - r, kx as i64 - r, wt))
        })
        .collect();
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for &(dy, dx, wt) in &taps {
                let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                acc += wt * plane[sy * w + sx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Anti-aliased uniform disk of the given radius (pixel coverage approximated
/// by a one-pixel linear ramp at the rim).
pub fn disk_kernel(radius: f64) -> Kernel2d {
    let r = radius.max(0.0);
    let half = (r + 0.5).ceil() as i64;
    let size = (2 * half + 1) as usize;
    let mut w = Vec::with_capacity(size * size);
    for y in -half..=half {
        for x in -half..=half {
            let d = ((x * x + y * y) as f64).sqrt();
            w.push((r + 0.5 - d).clamp(0.0, 1.0));
        }
    }
    Kernel2d::normalized(size, w)
}

/// Line segment of the given length through the kernel center; each tap is
/// the length of segment inside that pixel's unit square, then normalized.
/// `angle = 0` is horizontal.
pub fn motion_blur_kernel(length: f64, angle: f64) -> Kernel2d {
    let length = length.max(1.0);
    let half = (length / 2.0 + 0.5).ceil() as i64;
    let size = (2 * half + 1) as usize;
    let (dx, dy) = (angle.cos(), -angle.sin());
    let (x0, y0) = (-dx * length / 2.0, -dy * length / 2.0);
    let mut w = Vec::with_capacity(size * size);
    for py in -half..=half {
        for px in -half..=half {
            let frac = clip_segment(x0, y0, dx * length, dy * length, px as f64, py as f64);
            w.push(frac * length);
        }
    }
    Kernel2d::normalized(size, w)
}

/// Fraction of the segment `p0 + t·d, t ∈ [0,1]` inside the unit square
/// centered at `(cx, cy)` (Liang-Barsky).
fn clip_segment(x0: f64, y0: f64, dx: f64, dy: f64, cx: f64, cy: f64) -> f64 {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-dx, x0 - (cx - 0.5)),
        (dx, (cx + 0.5) - x0),
        (-dy, y0 - (cy - 0.5)),
        (dy, (cy + 0.5) - y0),
    ] {
        if p.abs() < 1e-12 {
            if q < 0.0 {
                return 0.0;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t1 - t0).max(0.0)
}
