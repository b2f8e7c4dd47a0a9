use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::sproc::integral_quadratic;

/// `(T_k z)(t) = z(t - k)` on the sample grid, zero on the first `k` samples.
/// The result is `k` samples longer, so nothing is truncated.
pub fn forward_shift(z: &[CVector], k: usize) -> Vec<CVector> {
    let dim = z.first().map(|v| v.len()).unwrap_or(0);
    let mut out = vec![CVector::zeros(dim); k];
    out.extend(z.iter().cloned());
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftStep {
    pub shift: usize,
    /// `|<T_k z, w>|` for each probe.
    pub inner_products: Vec<f64>,
    pub starts_at_zero: bool,
    /// Largest entry gap `|F_j(T_k z) - F_j(z)|` over all operators.
    pub operator_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftCheck {
    pub steps: Vec<ShiftStep>,
    /// Inner products with the probes vanish at the largest shift.
    pub orthogonality: bool,
    /// Every shifted signal starts at zero.
    pub invariance: bool,
    /// Every operator value is preserved.
    pub preservation: bool,
}

impl ShiftCheck {
    pub fn passed(&self) -> bool {
        self.orthogonality && self.invariance && self.preservation
    }
}

fn inner(a: &[CVector], b: &[CVector], dt: f64) -> C64 {
    let len = a.len().min(b.len());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..len {
        let w = if i == 0 || i + 1 == a.len().max(b.len()) { 0.5 * dt } else { dt };
        acc += b[i].dotc(&a[i]) * w;
    }
    acc
}

/// Checks the shift-system properties of `T_k` for the operators
/// `F_j(z) = He int F'_j z z^† F''_j^†` on a sampled signal starting at zero.
pub fn shift_system_check(
    operators: &[(CMatrix, CMatrix)],
    z: &[CVector],
    probes: &[Vec<CVector>],
    shifts: &[usize],
    dt: f64,
    tol: f64,
) -> Result<ShiftCheck> {
    if let Some(first) = z.first() {
        if first.iter().any(|c| *c != C64::new(0.0, 0.0)) {
            return Err(Error::Precondition("signal must start at zero".into()));
        }
    }
    let base: Vec<_> = operators
        .iter()
        .map(|(f1, f2)| integral_quadratic(f1, f2, z, dt))
        .collect::<Result<_>>()?;
    let scale = z.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt().max(1.0);
    let mut steps = Vec::with_capacity(shifts.len());
    for &k in shifts {
        let shifted = forward_shift(z, k);
        let inner_products = probes.iter().map(|w| inner(&shifted, w, dt).norm()).collect();
        let starts_at_zero = shifted
            .first()
            .is_none_or(|v| v.iter().all(|c| *c == C64::new(0.0, 0.0)));
        let mut operator_gap: f64 = 0.0;
        for ((f1, f2), b) in operators.iter().zip(&base) {
            let v = integral_quadratic(f1, f2, &shifted, dt)?;
            operator_gap = operator_gap.max(linalg::max_abs(&(v.as_matrix() - b.as_matrix())));
        }
        steps.push(ShiftStep {
            shift: k,
            inner_products,
            starts_at_zero,
            operator_gap,
        });
    }
    let largest = steps.iter().max_by_key(|s| s.shift);
    let orthogonality = largest.is_none_or(|s| s.inner_products.iter().all(|v| *v <= tol * scale));
    let invariance = steps.iter().all(|s| s.starts_at_zero);
    let preservation = steps.iter().all(|s| s.operator_gap <= tol * scale * scale);
    Ok(ShiftCheck {
        steps,
        orthogonality,
        invariance,
        preservation,
    })
}
