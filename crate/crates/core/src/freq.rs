//! Frequency sweep of `sigma(w) = G(jw)^* Pi G(jw)` with `G = [(jwI - A)^{-1} B; I]`.
//!
//! The sweep is a sampling check, not a certified global maximization: a
//! Chebyshev-Lobatto grid (dense near the band edges) is seeded with the
//! imaginary parts of in-band eigenvalues of `A`, and every local maximum is
//! refined by bracket bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, J};
use crate::model::{self, FrequencyBand, HermitianMatrix, StateSpace};

/// Relative threshold on `sigma_min(jwI - A)` below which `w` is treated as
/// an eigenfrequency.
pub const SINGULAR_REL_TOL: f64 = 1e-10;

/// `|worst_eig|` below this is flagged marginal.
pub const MARGINAL_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdiOptions {
    pub coarse_points: usize,
    pub refine_depth: usize,
    pub tol: f64,
}

impl Default for FdiOptions {
    fn default() -> Self {
        Self {
            coarse_points: 129,
            refine_depth: 30,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdiReport {
    pub holds: bool,
    pub worst_omega: f64,
    pub worst_eig: f64,
    pub worst_vec: Vec<C64>,
    /// Every evaluated `(w, lambda_max)`, sorted by `w`.
    pub samples: Vec<(f64, f64)>,
    pub marginal: bool,
    pub singular_frequencies: Vec<f64>,
}

/// `[(jwI - A)^{-1} B; I_m]`.
pub fn transfer_column(sys: &StateSpace, omega: f64) -> Result<CMatrix> {
    let n = sys.states();
    let m = sys.inputs();
    let mut shifted = -sys.a().clone();
    for i in 0..n {
        shifted[(i, i)] += J * omega;
    }
    let scale = linalg::spectral_norm(sys.a()).max(1.0);
    let smallest = linalg::singular_values(&shifted).last().copied().unwrap_or(f64::INFINITY);
    if smallest < SINGULAR_REL_TOL * scale {
        return Err(Error::SingularFrequency { omega });
    }
    let top = shifted
        .lu()
        .solve(sys.b())
        .ok_or(Error::SingularFrequency { omega })?;
    let mut g = CMatrix::zeros(n + m, m);
    g.view_mut((0, 0), (n, m)).copy_from(&top);
    g.view_mut((n, 0), (m, m)).fill_with_identity();
    Ok(g)
}

/// `sigma(w)`, an `m x m` Hermitian matrix.
pub fn fdi_value(sys: &StateSpace, pi: &HermitianMatrix, omega: f64) -> Result<HermitianMatrix> {
    model::check_supply_dims(sys, pi)?;
    let g = transfer_column(sys, omega)?;
    Ok(HermitianMatrix::symmetrize(&(g.adjoint() * pi.as_matrix() * g)))
}

fn lambda_max(sys: &StateSpace, pi: &HermitianMatrix, omega: f64) -> Option<f64> {
    fdi_value(sys, pi, omega).ok().map(|s| s.max_eigenvalue())
}

/// Chebyshev-Lobatto points mapped onto `[w1, w2]`, endpoints included.
pub fn chebyshev_grid(band: &FrequencyBand, points: usize) -> Vec<f64> {
    let c = band.center();
    let h = 0.5 * band.width();
    let last = (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points)
        .map(|k| c - h * (std::f64::consts::PI * k as f64 / last).cos())
        .collect();
    grid[0] = band.lower();
    grid[points - 1] = band.upper();
    grid
}

struct Sweep<'a> {
    sys: &'a StateSpace,
    pi: &'a HermitianMatrix,
    evaluated: Vec<(f64, Option<f64>)>,
}

impl Sweep<'_> {
    fn eval(&mut self, w: f64) -> f64 {
        let v = lambda_max(self.sys, self.pi, w);
        self.evaluated.push((w, v));
        v.unwrap_or(f64::NEG_INFINITY)
    }

    /// Shrinks `(a, m, b)` around the best of three points, halving the
    /// bracket each step.
    fn refine(&mut self, mut a: f64, mut m: f64, mut b: f64, mut fm: f64, depth: usize) -> (f64, f64) {
        for _ in 0..depth {
            let left = if m > a { Some(0.5 * (a + m)) } else { None };
            let right = if b > m { Some(0.5 * (m + b)) } else { None };
            let fl = left.map(|w| self.eval(w)).unwrap_or(f64::NEG_INFINITY);
            let fr = right.map(|w| self.eval(w)).unwrap_or(f64::NEG_INFINITY);
            if fl > fm && fl >= fr {
                b = m;
                m = left.unwrap();
                fm = fl;
            } else if fr > fm {
                a = m;
                m = right.unwrap();
                fm = fr;
            } else {
                a = left.unwrap_or(a);
                b = right.unwrap_or(b);
            }
        }
        (m, fm)
    }
}

/// Samples and refines `lambda_max(sigma(w))` over the band.
pub fn fdi_check(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    opts: &FdiOptions,
) -> Result<FdiReport> {
    model::check_supply_dims(sys, pi)?;
    if opts.coarse_points < 16 {
        return Err(Error::Input(format!(
            "coarse_points must be at least 16, got {}",
            opts.coarse_points
        )));
    }
    let mut grid = chebyshev_grid(band, opts.coarse_points);
    // Lightly damped modes produce narrow peaks near Im(lambda).
    for lam in linalg::eigenvalues(sys.a()) {
        if band.contains(lam.im) {
            grid.push(lam.im);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values: Vec<Option<f64>> = grid.par_iter().map(|&w| lambda_max(sys, pi, w)).collect();
    let mut sweep = Sweep {
        sys,
        pi,
        evaluated: grid.iter().copied().zip(values.iter().copied()).collect(),
    };
    if values.iter().all(Option::is_none) {
        return Err(Error::AllFrequenciesSingular);
    }

    let f = |i: usize| values[i].unwrap_or(f64::NEG_INFINITY);
    let last = grid.len() - 1;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for i in 0..grid.len() {
        if values[i].is_none() {
            continue;
        }
        let left_ok = i == 0 || f(i) >= f(i - 1);
        let right_ok = i == last || f(i) >= f(i + 1);
        if !(left_ok && right_ok) {
            continue;
        }
        let a = if i == 0 { grid[0] } else { grid[i - 1] };
        let b = if i == last { grid[last] } else { grid[i + 1] };
        let cand = sweep.refine(a, grid[i], b, f(i), opts.refine_depth);
        if cand.1 > best.1 {
            best = cand;
        }
    }
    let (worst_omega, worst_eig) = best;

    let sigma = fdi_value(sys, pi, worst_omega)?;
    let (vals, vecs) = sigma.eigh();
    let top = vals.len() - 1;
    let v: CVector = vecs.column(top).into_owned();
    let worst_vec = v.iter().copied().collect();

    let mut singular_frequencies: Vec<f64> = sweep
        .evaluated
        .iter()
        .filter(|(_, v)| v.is_none())
        .map(|(w, _)| *w)
        .collect();
    singular_frequencies.sort_by(f64::total_cmp);
    singular_frequencies.dedup();
    if !singular_frequencies.is_empty() {
        log::warn!("skipped singular frequencies {singular_frequencies:?}");
    }
    let mut samples: Vec<(f64, f64)> = sweep
        .evaluated
        .into_iter()
        .filter_map(|(w, v)| v.map(|v| (w, v)))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);

    Ok(FdiReport {
        holds: worst_eig <= opts.tol,
        worst_omega,
        worst_eig,
        worst_vec,
        samples,
        marginal: worst_eig.abs() < MARGINAL_BAND,
        singular_frequencies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use approx::assert_abs_diff_eq;

    fn scalar() -> StateSpace {
        StateSpace::from_real(1, 1, &[-1.0], &[1.0]).unwrap()
    }

    fn pi2(a: f64, b: f64, d: f64) -> HermitianMatrix {
        HermitianMatrix::from_real(&nalgebra::DMatrix::from_row_slice(2, 2, &[a, b, b, d])).unwrap()
    }

    #[test]
    fn transfer_column_examples() {
        let g = transfer_column(&scalar(), 0.0).unwrap();
        assert_eq!(g[(0, 0)], c(1.0, 0.0));
        assert_eq!(g[(1, 0)], c(1.0, 0.0));
        let g = transfer_column(&scalar(), 1.0).unwrap();
        assert_abs_diff_eq!(g[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 0)].im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn eigenfrequency_is_singular() {
        let a = CMatrix::from_row_slice(2, 2, &[J, c(0.0, 0.0), c(0.0, 0.0), -J]);
        let sys = StateSpace::new(a, CMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            transfer_column(&sys, 1.0),
            Err(Error::SingularFrequency { .. })
        ));
        assert!(transfer_column(&sys, 0.5).is_ok());
    }

    #[test]
    fn integrator_at_zero_is_singular() {
        let sys = StateSpace::from_real(1, 1, &[0.0], &[1.0]).unwrap();
        assert!(transfer_column(&sys, 0.0).is_err());
    }

    #[test]
    fn fdi_value_examples() {
        for w in [0.0, 0.7, 3.0] {
            let s = fdi_value(&scalar(), &pi2(0.0, 0.0, -1.0), w).unwrap();
            assert_abs_diff_eq!(s.as_matrix()[(0, 0)].re, -1.0, epsilon = 1e-15);
        }
        let s = fdi_value(&scalar(), &pi2(0.0, 1.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(s.as_matrix()[(0, 0)].re, 2.0, epsilon = 1e-15);
        let s = fdi_value(&scalar(), &pi2(1.0, 0.0, -1.0), 1.0).unwrap();
        assert_abs_diff_eq!(s.as_matrix()[(0, 0)].re, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn sweep_examples() {
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        let opts = FdiOptions::default();
        let r = fdi_check(&scalar(), &pi2(1.0, 0.0, -1.0), &band, &opts).unwrap();
        assert!(r.holds);
        assert_abs_diff_eq!(r.worst_omega, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.worst_eig, -0.5, epsilon = 1e-12);

        let r = fdi_check(&scalar(), &pi2(1.0, 0.0, -0.25), &band, &opts).unwrap();
        assert!(!r.holds && !r.marginal);
        assert_abs_diff_eq!(r.worst_omega, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.worst_eig, 0.25, epsilon = 1e-12);

        let r = fdi_check(&scalar(), &HermitianMatrix::zeros(2), &band, &opts).unwrap();
        assert!(r.holds && r.marginal);
        assert_eq!(r.worst_eig, 0.0);
    }

    #[test]
    fn interior_peak_is_refined() {
        // Lightly damped oscillator, resonance near w = 2 inside [0.5, 5].
        let sys = StateSpace::from_real(2, 1, &[0.0, 1.0, -4.0, -0.02], &[0.0, 1.0]).unwrap();
        let pi = HermitianMatrix::from_diagonal(&[1.0, 0.0, -1.0]);
        let band = FrequencyBand::new(0.5, 5.0).unwrap();
        let r = fdi_check(&sys, &pi, &band, &FdiOptions::default()).unwrap();
        // |G(jw)|^2 = 1 / ((4 - w^2)^2 + (0.02 w)^2) peaks just below w = 2.
        let dense = (0..200_001)
            .map(|k| 0.5 + 4.5 * k as f64 / 200_000.0)
            .map(|w| lambda_max(&sys, &pi, w).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(r.worst_eig >= dense - 1e-9 * dense.abs());
        assert!((r.worst_omega - 2.0).abs() < 1e-3);
    }

    #[test]
    fn refinement_is_monotone() {
        let sys = StateSpace::from_real(2, 1, &[0.0, 1.0, -3.0, -0.3], &[0.0, 1.0]).unwrap();
        let pi = HermitianMatrix::from_diagonal(&[1.0, 0.2, -0.5]);
        let band = FrequencyBand::new(-4.0, 4.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for depth in [0, 2, 5, 10, 30] {
            let opts = FdiOptions {
                refine_depth: depth,
                ..FdiOptions::default()
            };
            let r = fdi_check(&sys, &pi, &band, &opts).unwrap();
            assert!(r.worst_eig >= prev);
            prev = r.worst_eig;
        }
    }

    #[test]
    fn rejects_coarse_grid() {
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        let opts = FdiOptions {
            coarse_points: 8,
            ..FdiOptions::default()
        };
        assert!(fdi_check(&scalar(), &pi2(1.0, 0.0, -1.0), &band, &opts).is_err());
    }

    #[test]
    fn real_data_is_conjugate_symmetric() {
        let sys = StateSpace::from_real(2, 1, &[-0.3, 1.2, -0.7, -0.1], &[0.4, 1.0]).unwrap();
        let pi = pi3();
        for w in [0.1, 0.9, 2.5] {
            let a = lambda_max(&sys, &pi, w).unwrap();
            let b = lambda_max(&sys, &pi, -w).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    fn pi3() -> HermitianMatrix {
        HermitianMatrix::from_real(&nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.1, -0.3, 0.1, -0.2, 0.4, -0.3, 0.4, -0.6],
        ))
        .unwrap()
    }
}
