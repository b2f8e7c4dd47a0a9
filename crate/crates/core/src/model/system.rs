use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::ComplexMatrix;

/// Relative singular-value threshold for the Krylov rank test.
pub const CONTROLLABILITY_REL_TOL: f64 = 1e-9;

/// `x' = A x + B u` with `A` n x n and `B` n x m, complex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    #[serde(rename = "A")]
    a: ComplexMatrix,
    #[serde(rename = "B")]
    b: ComplexMatrix,
}

impl StateSpace {
    /// Validates shapes. Controllability is only logged: the equivalences assume it,
    /// but exploratory inputs are allowed through.
    pub fn new(a: CMatrix, b: CMatrix) -> Result<Self> {
        let sys = Self::unchecked(a, b)?;
        if !sys.is_controllable() {
            log::warn!(
                "pair (A, B) is not controllable (rank {} < {}); equivalences are not guaranteed",
                sys.controllability_rank(),
                sys.states()
            );
        }
        Ok(sys)
    }

    /// Like [`StateSpace::new`] but rejects uncontrollable pairs.
    pub fn controllable(a: CMatrix, b: CMatrix) -> Result<Self> {
        let sys = Self::unchecked(a, b)?;
        if !sys.is_controllable() {
            return Err(Error::Precondition(format!(
                "pair (A, B) is not controllable (rank {} < {})",
                sys.controllability_rank(),
                sys.states()
            )));
        }
        Ok(sys)
    }

    fn unchecked(a: CMatrix, b: CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dims("A", "square", format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::dims("B rows", a.nrows(), b.nrows()));
        }
        if a.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::Input("empty state or input dimension".into()));
        }
        Ok(Self {
            a: ComplexMatrix::new(a)?,
            b: ComplexMatrix::new(b)?,
        })
    }

    pub fn from_real(n: usize, m: usize, a: &[f64], b: &[f64]) -> Result<Self> {
        let a = ComplexMatrix::from_real(n, n, a)?.into_inner();
        let b = ComplexMatrix::from_real(n, m, b)?.into_inner();
        Self::new(a, b)
    }

    pub fn a(&self) -> &CMatrix {
        self.a.as_matrix()
    }

    pub fn b(&self) -> &CMatrix {
        self.b.as_matrix()
    }

    pub fn states(&self) -> usize {
        self.a.rows()
    }

    pub fn inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn is_real(&self) -> bool {
        self.a.is_real() && self.b.is_real()
    }

    /// `[B, AB, ..., A^{n-1}B]`.
    pub fn krylov_matrix(&self) -> CMatrix {
        let n = self.states();
        let m = self.inputs();
        let mut k = CMatrix::zeros(n, n * m);
        let mut block = self.b().clone();
        for i in 0..n {
            k.view_mut((0, i * m), (n, m)).copy_from(&block);
            block = self.a() * block;
        }
        k
    }

    /// Numerical rank of the Krylov matrix, counting singular values above
    /// `1e-9 * sigma_max`.
    pub fn controllability_rank(&self) -> usize {
        let sv = linalg::singular_values(&self.krylov_matrix());
        let top = sv.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > CONTROLLABILITY_REL_TOL * top).count()
    }

    pub fn is_controllable(&self) -> bool {
        self.controllability_rank() == self.states()
    }

    /// Largest real part over the eigenvalues of `A`.
    pub fn spectral_abscissa(&self) -> f64 {
        linalg::eigenvalues(self.a())
            .iter()
            .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_integrator_rank_one() {
        let sys = StateSpace::from_real(1, 1, &[0.0], &[1.0]).unwrap();
        assert_eq!(sys.controllability_rank(), 1);
    }

    #[test]
    fn double_integrator_rank_two() {
        let sys = StateSpace::from_real(2, 1, &[0.0, 1.0, 0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(sys.controllability_rank(), 2);
    }

    #[test]
    fn repeated_mode_is_uncontrollable() {
        let sys = StateSpace::from_real(2, 1, &[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(sys.controllability_rank(), 1);
        assert!(StateSpace::controllable(sys.a().clone(), sys.b().clone()).is_err());
    }

    #[test]
    fn shape_errors() {
        let a = CMatrix::zeros(2, 3);
        let b = CMatrix::zeros(2, 1);
        assert!(matches!(StateSpace::new(a, b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn json_uses_upper_case_keys() {
        let sys = StateSpace::from_real(1, 1, &[-1.0], &[1.0]).unwrap();
        let s = serde_json::to_string(&sys).unwrap();
        assert!(s.starts_with(r#"{"A":{"rows":1"#));
        let back: StateSpace = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sys);
    }
}
