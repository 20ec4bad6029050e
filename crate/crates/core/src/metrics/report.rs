//! Per-degradation PSNR/SSIM tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{psnr, ssim};
use crate::degrade::{apply, hash64, DegradationKind, DegradationSpec, SeverityPreset};
use crate::error::{contract_err, Result};
use crate::image::ImageBuffer;

/// Anything that maps a degraded image back toward the clean one.
pub trait Restorer: Sync {
    /// `kind` is the degradation actually applied; restorers may use it to
    /// build a prompt or ignore it.
    fn restore(&self, degraded: &ImageBuffer, kind: DegradationKind) -> Result<ImageBuffer>;
}

impl<F> Restorer for F
where
    F: Fn(&ImageBuffer, DegradationKind) -> Result<ImageBuffer> + Sync,
{
    fn restore(&self, degraded: &ImageBuffer, kind: DegradationKind) -> Result<ImageBuffer> {
        self(degraded, kind)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRestorer;

impl Restorer for IdentityRestorer {
    fn restore(&self, degraded: &ImageBuffer, _kind: DegradationKind) -> Result<ImageBuffer> {
        Ok(degraded.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub kind: String,
    pub preset: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub average: MetricRow,
}

impl MetricReport {
    /// Builds the report; the average row is the arithmetic mean of the rows
    /// (PSNR averaged in dB).
    pub fn from_rows(rows: Vec<MetricRow>, preset: &str) -> Self {
        let k = rows.len().max(1) as f64;
        let average = MetricRow {
            kind: "average".into(),
            preset: preset.into(),
            psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / k,
            ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / k,
            n: rows.iter().map(|r| r.n).sum(),
        };
        Self { rows, average }
    }

    /// `kind,preset,psnr_db,ssim,n` with LF endings and a final average row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,preset,psnr_db,ssim,n\n");
        for r in self.rows.iter().chain(std::iter::once(&self.average)) {
            writeln!(out, "{},{},{},{},{}", r.kind, r.preset, format_sig(r.psnr_db), format_sig(r.ssim), r.n)
                .expect("writing to a String");
        }
        out
    }
}

/// Six significant digits in plain decimal notation; `+∞` prints as `inf`.
pub fn format_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Degrades every test image with every kind at `preset` (seed fixed per
/// image and kind), restores it, and averages PSNR/SSIM against the clean
/// image.
pub fn evaluate_table(
    restorer: &dyn Restorer,
    testset: &[ImageBuffer],
    kinds: &[DegradationKind],
    preset: SeverityPreset,
    seed: u64,
) -> Result<MetricReport> {
    if testset.is_empty() {
        return Err(contract_err!("evaluation needs at least one test image"));
    }
    let pairs: Vec<(usize, usize)> = (0..kinds.len())
        .flat_map(|k| (0..testset.len()).map(move |i| (k, i)))
        .collect();
    let scores: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(k, i)| {
            let kind = kinds[k];
            let spec = DegradationSpec::new(kind, preset.value(), hash64(&[seed, i as u64, kind as u64]))?;
            let clean = &testset[i];
            let degraded = apply(clean, &spec)?;
            let restored = restorer.restore(&degraded, kind)?;
            Ok((psnr(&restored, clean)?, ssim(&restored, clean)?))
        })
        .collect::<Result<_>>()?;
    let n = testset.len();
    let rows = kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| {
            let chunk = &scores[k * n..(k + 1) * n];
            MetricRow {
                kind: kind.name().into(),
                preset: preset.name().into(),
                psnr_db: chunk.iter().map(|s| s.0).sum::<f64>() / n as f64,
                ssim: chunk.iter().map(|s| s.1).sum::<f64>() / n as f64,
                n,
            }
        })
        .collect();
    Ok(MetricReport::from_rows(rows, preset.name()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(28.123456789), "28.1235");
        assert_eq!(format_sig(0.8123456), "0.812346");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(20.0), "20");
        assert_eq!(format_sig(123456.7), "123457");
        assert_eq!(format_sig(-1.5), "-1.5");
    }

    #[test]
    fn average_row_is_mean() {
        let row = |p: f64, s: f64| MetricRow {
            kind: "k".into(),
            preset: "heavy".into(),
            psnr_db: p,
            ssim: s,
            n: 2,
        };
        let r = MetricReport::from_rows(vec![row(20.0, 0.5), row(30.0, 0.7)], "heavy");
        assert_eq!(r.average.psnr_db, 25.0);
        assert!((r.average.ssim - 0.6).abs() < 1e-15);
        assert_eq!(r.average.n, 4);
        assert_eq!(r.to_csv().lines().last().unwrap(), "average,heavy,25,0.6,4");
    }
}
