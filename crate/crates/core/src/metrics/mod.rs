//! Full-reference quality metrics and per-degradation evaluation tables.

mod report;

pub use report::{evaluate_table, format_sig, IdentityRestorer, MetricReport, MetricRow, Restorer};

use crate::error::{contract_err, Result};
use crate::image::ImageBuffer;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_same_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(contract_err!(
            "metric inputs differ in size: {:?} vs {:?}",
            a.dims(),
            b.dims()
        ));
    }
    Ok(())
}

/// Mean squared error over all samples.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10·log10(1 / MSE)` in dB; identical images give `+∞`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

/// Normalized Gaussian window taps.
pub fn ssim_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - r;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = taps.iter().sum();
    taps.map(|t| t / total)
}

/// BT.601 luma plane in f64.
pub fn luma_plane(img: &ImageBuffer) -> Vec<f64> {
    img.data()
        .chunks_exact(3)
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

/// Valid-region separable filtering of an `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &plane[y * w..][..w];
        for x in 0..ow {
            tmp[y * ow + x] = taps.iter().zip(&row[x..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * tmp[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM on luma with an 11×11 Gaussian window (σ = 1.5), no padding.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_dims(a, b)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(contract_err!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        ));
    }
    let x = luma_plane(a);
    let y = luma_plane(b);
    let taps = ssim_taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(&x, h, w, &taps);
    let mu_y = filter_valid(&y, h, w, &taps);
    let e_xx = filter_valid(&xx, h, w, &taps);
    let e_yy = filter_valid(&yy, h, w, &taps);
    let e_xy = filter_valid(&xy, h, w, &taps);
    let total: f64 = (0..mu_x.len())
        .map(|i| ssim_term(mu_x[i], mu_y[i], e_xx[i], e_yy[i], e_xy[i]))
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// Local SSIM from windowed first and second moments.
pub fn ssim_term(mu_x: f64, mu_y: f64, e_xx: f64, e_yy: f64, e_xy: f64) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let var_x = e_xx - mu_x * mu_x;
    let var_y = e_yy - mu_y * mu_y;
    let cov = e_xy - mu_x * mu_y;
    ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_sentinels() {
        let zero = ImageBuffer::filled(4, 4, [0.0; 3]).unwrap();
        let one = ImageBuffer::filled(4, 4, [1.0; 3]).unwrap();
        assert_eq!(psnr(&zero, &one).unwrap(), 0.0);
        assert_eq!(psnr(&zero, &zero).unwrap(), f64::INFINITY);
        let small = ImageBuffer::filled(3, 4, [0.0; 3]).unwrap();
        assert!(psnr(&zero, &small).is_err());
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = ImageBuffer::filled(10, 20, [0.5; 3]).unwrap();
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn taps_sum_to_one() {
        assert!((ssim_taps().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
