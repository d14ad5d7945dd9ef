use super::DenseMatrix;
use crate::error::{Error, Result};

/// Discrepancies below this are treated as agreement. Central differences
/// carry roundoff around `eps * |f| / step`, which swamps the relative error
/// of near-zero gradient entries.
pub const ABSOLUTE_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|)`, or 0 when `|a - b| <= ABSOLUTE_FLOOR`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= ABSOLUTE_FLOOR {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error within each tensor.
    pub per_tensor: Vec<f64>,
    pub max_error: f64,
    /// Number of coordinates compared.
    pub coordinates: usize,
    /// Coordinates where central differences disagreed but the analytic
    /// value matched a one-sided derivative (a ReLU exactly at zero, say).
    pub kinks: usize,
}

/// Relative error treated as agreement for one-sided derivatives at a kink.
const KINK_TOLERANCE: f64 = 1e-4;

/// Compares `analytic` gradients against central differences of `f`, one
/// coordinate at a time. `f` must be deterministic.
///
/// When a central difference disagrees, the coordinate may sit on a
/// non-differentiable point. Second-order one-sided differences are then
/// taken on both sides; if they differ from each other and the analytic
/// value matches one of them, the coordinate counts as agreeing and is
/// tallied in [`GradCheckReport::kinks`].
pub fn finite_diff_check<F>(
    mut f: F,
    params: &[DenseMatrix],
    analytic: &[DenseMatrix],
    step: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[DenseMatrix]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(Error::Length {
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step {step} must be positive"
        )));
    }
    let base = f(params)?;
    let mut work = params.to_vec();
    let mut kinks = 0;
    let mut per_tensor = Vec::with_capacity(params.len());
    let mut coordinates = 0;
    for (t, grad) in analytic.iter().enumerate() {
        if grad.shape() != params[t].shape() {
            return Err(Error::shape(
                "finite_diff_check",
                format!(
                    "tensor {t}: gradient {:?} vs parameter {:?}",
                    grad.shape(),
                    params[t].shape()
                ),
            ));
        }
        let mut worst: f64 = 0.0;
        for k in 0..params[t].len() {
            let orig = params[t].data()[k];
            work[t].data_mut()[k] = orig + step;
            let plus = f(&work)?;
            work[t].data_mut()[k] = orig - step;
            let minus = f(&work)?;
            work[t].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let analytic = grad.data()[k];
            let mut err = relative_error(analytic, numeric);
            if err > KINK_TOLERANCE {
                let mut at = |offset: f64| {
                    work[t].data_mut()[k] = orig + offset;
                    let v = f(&work);
                    work[t].data_mut()[k] = orig;
                    v
                };
                let right = (-3.0 * base + 4.0 * plus - at(2.0 * step)?) / (2.0 * step);
                let left = (3.0 * base - 4.0 * minus + at(-2.0 * step)?) / (2.0 * step);
                let one_sided = relative_error(analytic, right).min(relative_error(analytic, left));
                if relative_error(left, right) > KINK_TOLERANCE && one_sided <= KINK_TOLERANCE {
                    kinks += 1;
                    err = one_sided;
                }
            }
            worst = worst.max(err);
            coordinates += 1;
        }
        per_tensor.push(worst);
    }
    let max_error = per_tensor.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_tensor,
        max_error,
        coordinates,
        kinks,
    })
}
