//! Central finite-difference checks against reverse-mode gradients.

use super::tensor::Tensor;
use crate::error::Result;

/// Worst mismatch found by [`check_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Entries failing both the relative and the absolute tolerance.
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares `d f / d params` from [`Tensor::backward`] with central
/// differences of step `h`. An entry passes when its relative error is
/// below `rel_tol` or its absolute error is below `abs_floor`.
///
/// `f` must rebuild its graph from the current parameter values on every
/// call and return a scalar.
pub fn check_gradients(
    params: &[Tensor],
    f: impl Fn() -> Result<Tensor>,
    h: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<GradCheckReport> {
    params.iter().for_each(Tensor::zero_grad);
    f()?.backward()?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        failures: 0,
    };
    for (p, grad) in params.iter().zip(&analytic) {
        for i in 0..p.numel() {
            let orig = p.data()[i];
            p.update_data(|d| d[i] = orig + h);
            let up = f()?.item();
            p.update_data(|d| d[i] = orig - h);
            let down = f()?.item();
            p.update_data(|d| d[i] = orig);
            let numeric = (up - down) / (2.0 * h);
            let abs = (numeric - grad[i]).abs();
            let rel = abs / numeric.abs().max(grad[i].abs()).max(f64::MIN_POSITIVE);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            if abs > abs_floor {
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel >= rel_tol {
                    report.failures += 1;
                }
            }
        }
    }
    params.iter().for_each(Tensor::zero_grad);
    Ok(report)
}
