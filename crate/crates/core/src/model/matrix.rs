use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, C64};

/// Dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(CMatrix);

impl ComplexMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !linalg::is_finite(&m) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Row-major construction.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dims("matrix entries", rows * cols, entries.len()));
        }
        Self::new(CMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let e: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(rows, cols, &e)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn is_real(&self) -> bool {
        linalg::is_real(&self.0)
    }
}

/// Complex square matrix stored exactly Hermitian.
///
/// Construction accepts inputs whose skew part is below
/// `1e-12 * (1 + max|M|)` and then replaces them by their Hermitian part, so
/// solver and quadrature output can be wrapped without drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianMatrix(CMatrix);

pub const HERMITIAN_REL_TOL: f64 = 1e-12;

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims(
                "Hermitian matrix",
                "square",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        if !linalg::is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let deviation = linalg::max_abs(&(&m - m.adjoint()));
        if deviation > HERMITIAN_REL_TOL * (1.0 + linalg::max_abs(&m)) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(linalg::hermitian_part(&m)))
    }

    /// Takes the Hermitian part of an arbitrary square matrix.
    pub fn symmetrize(m: &CMatrix) -> Self {
        Self(linalg::hermitian_part(m))
    }

    pub fn from_real(m: &RMatrix) -> Result<Self> {
        Self::new(linalg::to_complex(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn is_real(&self) -> bool {
        linalg::is_real(&self.0)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.0)
    }

    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        linalg::hermitian_eigh(&self.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self(self.0.map(|z| z * alpha))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dims("Hermitian sum", self.dim(), other.dim()));
        }
        Ok(Self::symmetrize(&(&self.0 + &other.0)))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
    ///
    /// Every eigenvalue of `H` appears twice in the spectrum of the result.
    pub fn realify(&self) -> RMatrix {
        let d = self.dim();
        let mut out = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let z = self.0[(i, j)];
                out[(i, j)] = z.re;
                out[(i + d, j + d)] = z.re;
                out[(i, j + d)] = -z.im;
                out[(i + d, j)] = z.im;
            }
        }
        out
    }
}

/// `{"rows": n, "cols": m, "data": [[re, im], ...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::dims(
                "matrix JSON data",
                self.rows * self.cols,
                self.data.len(),
            ));
        }
        let entries: Vec<C64> = self.data.iter().map(|p| C64::new(p[0], p[1])).collect();
        let m = CMatrix::from_row_slice(self.rows, self.cols, &entries);
        if !linalg::is_finite(&m) {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(value: MatrixJson) -> Result<Self> {
        HermitianMatrix::new(value.to_matrix()?)
    }
}

impl From<HermitianMatrix> for MatrixJson {
    fn from(value: HermitianMatrix) -> Self {
        MatrixJson::from_matrix(&value.0)
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let m = raw.to_matrix().map_err(serde::de::Error::custom)?;
        Ok(ComplexMatrix(m))
    }
}
