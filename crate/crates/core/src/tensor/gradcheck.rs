//! Central finite-difference verification of tape gradients.

use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Knobs of [`grad_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Half-width of the central difference.
    pub eps: f64,
    /// Bound on the 95th-percentile relative error.
    pub tolerance: f64,
    /// Bound on the largest relative error.
    pub max_tolerance: f64,
    /// Largest number of coordinates probed per input; larger inputs are
    /// subsampled with a fixed stride pattern.
    pub max_coords_per_input: Option<usize>,
    /// Denominator floor of the relative error, so near-zero gradients are
    /// compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            tolerance: 1e-5,
            max_tolerance: 1e-3,
            max_coords_per_input: None,
            floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_err: f64,
    pub p95_rel_err: f64,
    pub max_abs_err: f64,
    pub tolerance: f64,
    pub max_tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.p95_rel_err <= self.tolerance && self.max_rel_err <= self.max_tolerance
    }
}

/// Relative error `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Compares the tape gradient of the scalar `f(inputs)` against central
/// differences, coordinate by coordinate, in double precision.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut errors = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*var, inputs[i].shape());
        for j in sample_coordinates(inputs[i].numel(), opts.max_coords_per_input) {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + opts.eps;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - opts.eps;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * opts.eps);
            let a = analytic.data()[j];
            max_abs = max_abs.max((a - numeric).abs());
            errors.push(relative_error(a, numeric, opts.floor));
        }
    }
    errors.sort_by(f64::total_cmp);
    let p95 = percentile(&errors, 0.95);
    Ok(GradCheckReport {
        coordinates: errors.len(),
        max_rel_err: errors.last().copied().unwrap_or(0.0),
        p95_rel_err: p95,
        max_abs_err: max_abs,
        tolerance: opts.tolerance,
        max_tolerance: opts.max_tolerance,
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn sample_coordinates(numel: usize, cap: Option<usize>) -> Vec<usize> {
    match cap {
        Some(cap) if numel > cap && cap > 0 => {
            // Odd stride walk so the sample mixes channels and positions.
            let step = (numel / cap) | 1;
            let mut seen = Vec::with_capacity(cap);
            let mut j = 0usize;
            while seen.len() < cap {
                seen.push(j % numel);
                j += step + seen.len() % 7;
            }
            seen.sort_unstable();
            seen.dedup();
            seen
        }
        _ => (0..numel).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn percentile_picks_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.95), 95.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn identity_has_zero_error() {
        let x = Tensor::from_fn(Shape::new(1, 1, 2, 3), |i| i as f64 * 0.3 - 0.4);
        let report = grad_check(|t, v| Ok(t.sum(v[0])), &[x], GradCheckOptions::default()).unwrap();
        assert_eq!(report.coordinates, 6);
        assert!(report.max_rel_err < 1e-9, "{report:?}");
    }

    #[test]
    fn detects_a_wrong_backward() {
        let x = Tensor::from_fn(Shape::new(1, 2, 2, 2), |i| i as f64 * 0.1 + 0.2);
        let report = grad_check(
            |t, v| {
                let y = t.scale_with_backward(v[0], 2.0, 2.02);
                Ok(t.sum(y))
            },
            &[x],
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(!report.passed());
        assert!(report.p95_rel_err > 5e-3);
    }

    #[test]
    fn subsampling_is_bounded_and_unique() {
        let idx = sample_coordinates(10_000, Some(50));
        assert!(idx.len() <= 50 && idx.len() > 40);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_coordinates(5, Some(50)), vec![0, 1, 2, 3, 4]);
    }
}
