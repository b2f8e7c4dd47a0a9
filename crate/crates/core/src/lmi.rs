//! Generalized KYP inequality over a frequency band.
//!
//! For the band `[w1, w2]` with center `w0` the unknowns are Hermitian `P`
//! and `Q >= 0` with
//!
//! ```text
//! [A B; I 0]^* [[-Q, P + j w0 Q], [P - j w0 Q, -w1 w2 Q]] [A B; I 0] + Pi <= 0.
//! ```
//!
//! [`build_gkyp`] assembles this as an [`LmiSystem`] by pushing unit parameter
//! matrices through the congruence; [`verify_certificate`] recomputes the
//! left-hand side with plain matrix products and shares no code with the
//! assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, J};
use crate::model::{self, Certificate, FrequencyBand, HermitianMatrix, StateSpace};
use crate::sdp::{self, LmiSystem, SdpOptions, SdpOutcome, SdpStatus};

/// Real parametrization of an unknown Hermitian matrix.
///
/// Parameters run over the upper triangle row by row: a diagonal entry
/// contributes one real, an off-diagonal entry its real part and then (unless
/// restricted to real symmetric) its imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianParam {
    pub dim: usize,
    pub real_only: bool,
}

impl HermitianParam {
    pub fn new(dim: usize, real_only: bool) -> Self {
        Self { dim, real_only }
    }

    pub fn count(&self) -> usize {
        let d = self.dim;
        if self.real_only {
            d * (d + 1) / 2
        } else {
            d * d
        }
    }

    fn slots(&self) -> Vec<(usize, usize, bool)> {
        let mut out = Vec::with_capacity(self.count());
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push((i, j, false));
                if i != j && !self.real_only {
                    out.push((i, j, true));
                }
            }
        }
        out
    }

    /// Unit matrices, one per parameter.
    pub fn basis(&self) -> Vec<HermitianMatrix> {
        self.slots()
            .into_iter()
            .map(|(i, j, imag)| {
                let mut e = CMatrix::zeros(self.dim, self.dim);
                if i == j {
                    e[(i, i)] = C64::new(1.0, 0.0);
                } else if imag {
                    e[(i, j)] = J;
                    e[(j, i)] = -J;
                } else {
                    e[(i, j)] = C64::new(1.0, 0.0);
                    e[(j, i)] = C64::new(1.0, 0.0);
                }
                HermitianMatrix::symmetrize(&e)
            })
            .collect()
    }

    pub fn assemble(&self, params: &[f64]) -> Result<HermitianMatrix> {
        if params.len() != self.count() {
            return Err(Error::dims("Hermitian parameters", self.count(), params.len()));
        }
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for ((i, j, imag), &v) in self.slots().into_iter().zip(params) {
            if i == j {
                m[(i, i)] = C64::new(v, 0.0);
            } else if imag {
                m[(i, j)] += J * v;
                m[(j, i)] -= J * v;
            } else {
                m[(i, j)] += C64::new(v, 0.0);
                m[(j, i)] += C64::new(v, 0.0);
            }
        }
        Ok(HermitianMatrix::symmetrize(&m))
    }

    /// Inverse of [`HermitianParam::assemble`] (imaginary parts dropped in
    /// real mode).
    pub fn flatten(&self, h: &HermitianMatrix) -> Vec<f64> {
        let m = h.as_matrix();
        self.slots()
            .into_iter()
            .map(|(i, j, imag)| if imag { m[(i, j)].im } else { m[(i, j)].re })
            .collect()
    }

    /// Contribution of each parameter to the trace.
    pub fn trace_weights(&self) -> Vec<f64> {
        self.slots()
            .into_iter()
            .map(|(i, j, _)| if i == j { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Assembled inequality plus the variable layout `[P params, Q params]`.
#[derive(Debug, Clone)]
pub struct GkypProblem {
    pub system: LmiSystem,
    pub p_param: HermitianParam,
    pub q_param: Option<HermitianParam>,
}

impl GkypProblem {
    pub fn split(&self, y: &[f64]) -> Result<(HermitianMatrix, HermitianMatrix)> {
        let np = self.p_param.count();
        let p = self.p_param.assemble(&y[..np])?;
        let q = match self.q_param {
            Some(qp) => qp.assemble(&y[np..np + qp.count()])?,
            None => HermitianMatrix::zeros(self.p_param.dim),
        };
        Ok((p, q))
    }

    /// Decision vector for a given `(P, Q)`.
    pub fn join(&self, p: &HermitianMatrix, q: &HermitianMatrix) -> Vec<f64> {
        let mut y = self.p_param.flatten(p);
        if let Some(qp) = self.q_param {
            y.extend(qp.flatten(q));
        }
        y
    }
}

/// `[[A, B], [I, 0]]`.
fn outer_factor(sys: &StateSpace) -> CMatrix {
    let n = sys.states();
    let m = sys.inputs();
    let mut f = CMatrix::zeros(2 * n, n + m);
    f.view_mut((0, 0), (n, n)).copy_from(sys.a());
    f.view_mut((0, n), (n, m)).copy_from(sys.b());
    f.view_mut((n, 0), (n, n)).fill_with_identity();
    f
}

fn p_middle(e: &CMatrix) -> CMatrix {
    let n = e.nrows();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(e);
    m.view_mut((n, 0), (n, n)).copy_from(e);
    m
}

fn q_middle(e: &CMatrix, band: &FrequencyBand) -> CMatrix {
    let n = e.nrows();
    let w0 = band.center();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-e));
    m.view_mut((0, n), (n, n)).copy_from(&(e * (J * w0)));
    m.view_mut((n, 0), (n, n)).copy_from(&(e * (-J * w0)));
    m.view_mut((n, n), (n, n)).copy_from(&(e * C64::new(-band.product(), 0.0)));
    m
}

fn check_dims(sys: &StateSpace, pi: &HermitianMatrix) -> Result<()> {
    model::check_supply_dims(sys, pi)
}

/// Whether the real-symmetric restriction of `(P, Q)` is lossless: real
/// data and a band centered at zero.
pub fn real_mode_applies(sys: &StateSpace, pi: &HermitianMatrix, band: &FrequencyBand) -> bool {
    model::is_real_data(sys, pi) && band.is_centered()
}

/// Block 1 is `-(LeftSide(P, Q) + Pi) >= 0`, block 2 is `Q >= 0`.
pub fn build_gkyp(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    real_mode: bool,
) -> Result<GkypProblem> {
    check_dims(sys, pi)?;
    if real_mode && !real_mode_applies(sys, pi, band) {
        return Err(Error::Precondition(
            "real mode needs real A, B, Pi and a band centered at zero".into(),
        ));
    }
    let n = sys.states();
    let p_param = HermitianParam::new(n, real_mode);
    let q_param = HermitianParam::new(n, real_mode);
    let np = p_param.count();
    let nq = q_param.count();
    let f = outer_factor(sys);
    let fa = f.adjoint();

    let mut terms = Vec::with_capacity(np + nq);
    for (k, e) in p_param.basis().iter().enumerate() {
        let lhs = &fa * p_middle(e.as_matrix()) * &f;
        terms.push((k, HermitianMatrix::symmetrize(&(-lhs))));
    }
    for (k, e) in q_param.basis().iter().enumerate() {
        let lhs = &fa * q_middle(e.as_matrix(), band) * &f;
        terms.push((np + k, HermitianMatrix::symmetrize(&(-lhs))));
    }
    let mut system = LmiSystem::new(np + nq);
    system.add_sparse_block(pi.scale(-1.0), terms)?;
    let q_terms = q_param
        .basis()
        .into_iter()
        .enumerate()
        .map(|(k, e)| (np + k, e))
        .collect();
    system.add_sparse_block(HermitianMatrix::zeros(n), q_terms)?;
    Ok(GkypProblem {
        system,
        p_param,
        q_param: Some(q_param),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GkypOptions {
    pub sdp: SdpOptions,
    /// Tolerance used when re-verifying solver output.
    pub verify_tol: f64,
    /// Restrict `P`, `Q` to real symmetric when that is lossless.
    pub real_mode: bool,
}

impl Default for GkypOptions {
    fn default() -> Self {
        Self {
            sdp: SdpOptions::default(),
            verify_tol: 1e-6,
            real_mode: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GkypOutcome {
    pub outcome: SdpOutcome,
    pub certificate: Option<Certificate>,
    pub real_mode: bool,
}

impl GkypOutcome {
    pub fn status(&self) -> SdpStatus {
        self.outcome.status
    }
}

/// Solves the band LMI and, when feasible, returns `(P, Q)` with margins
/// recomputed by [`verify_certificate`].
pub fn gkyp_feasible(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    opts: &GkypOptions,
) -> Result<GkypOutcome> {
    let real_mode = opts.real_mode && real_mode_applies(sys, pi, band);
    let problem = build_gkyp(sys, pi, band, real_mode)?;
    let outcome = sdp::solve_feasibility(&problem.system, &opts.sdp)?;
    let certificate = if outcome.status.is_feasible() {
        let (p, q) = problem.split(&outcome.y)?;
        Some(certify(sys, pi, band, p, q)?)
    } else {
        None
    };
    Ok(GkypOutcome {
        outcome,
        certificate,
        real_mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub lmi_margin: f64,
    pub q_margin: f64,
    pub valid: bool,
}

/// Left-hand side of the band inequality by direct products.
pub fn left_side(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    p: &HermitianMatrix,
    q: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    check_dims(sys, pi)?;
    let n = sys.states();
    let m = sys.inputs();
    if p.dim() != n || q.dim() != n {
        return Err(Error::dims("certificate", n, p.dim().max(q.dim())));
    }
    let (a, b) = (sys.a(), sys.b());
    let (p, q) = (p.as_matrix(), q.as_matrix());
    let w0 = band.center();
    let w12 = band.product();
    let top_right = p + q * (J * w0);
    let bottom_left = p - q * (J * w0);
    // [A B; I 0]^* M [A B; I 0] written out blockwise.
    let ah = a.adjoint();
    let bh = b.adjoint();
    let xx = &ah * (-q) * a + &ah * &top_right + &bottom_left * a - q * C64::new(w12, 0.0);
    let xu = &ah * (-q) * b + &bottom_left * b;
    let ux = &bh * (-q) * a + &bh * &top_right;
    let uu = &bh * (-q) * b;
    let mut lhs = CMatrix::zeros(n + m, n + m);
    lhs.view_mut((0, 0), (n, n)).copy_from(&xx);
    lhs.view_mut((0, n), (n, m)).copy_from(&xu);
    lhs.view_mut((n, 0), (m, n)).copy_from(&ux);
    lhs.view_mut((n, n), (m, m)).copy_from(&uu);
    lhs += pi.as_matrix();
    Ok(HermitianMatrix::symmetrize(&lhs))
}

pub fn verify_certificate(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    p: &HermitianMatrix,
    q: &HermitianMatrix,
    tol: f64,
) -> Result<Verification> {
    let lmi_margin = left_side(sys, pi, band, p, q)?.max_eigenvalue();
    let q_margin = q.min_eigenvalue();
    Ok(Verification {
        lmi_margin,
        q_margin,
        valid: lmi_margin <= tol && q_margin >= -tol,
    })
}

/// Packages `(P, Q)` with freshly computed margins.
pub fn certify(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    p: HermitianMatrix,
    q: HermitianMatrix,
) -> Result<Certificate> {
    let v = verify_certificate(sys, pi, band, &p, &q, 0.0)?;
    Ok(Certificate {
        p,
        q,
        lmi_margin: v.lmi_margin,
        q_margin: v.q_margin,
    })
}

/// Full-frequency KYP inequality: `Q` pinned to zero, unknown `P` only.
pub fn classical_kyp(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    opts: &GkypOptions,
) -> Result<GkypOutcome> {
    check_dims(sys, pi)?;
    let real_mode = opts.real_mode && model::is_real_data(sys, pi);
    let p_param = HermitianParam::new(sys.states(), real_mode);
    let f = outer_factor(sys);
    let fa = f.adjoint();
    let terms = p_param
        .basis()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let lhs = &fa * p_middle(e.as_matrix()) * &f;
            (k, HermitianMatrix::symmetrize(&(-lhs)))
        })
        .collect();
    let mut system = LmiSystem::new(p_param.count());
    system.add_sparse_block(pi.scale(-1.0), terms)?;
    let outcome = sdp::solve_feasibility(&system, &opts.sdp)?;
    let certificate = if outcome.status.is_feasible() {
        let p = p_param.assemble(&outcome.y)?;
        let q = HermitianMatrix::zeros(sys.states());
        // With Q = 0 the band terms vanish; any band gives the same margins.
        let band = FrequencyBand::new(-1.0, 1.0)?;
        Some(certify(sys, pi, &band, p, q)?)
    } else {
        None
    };
    Ok(GkypOutcome {
        outcome,
        certificate,
        real_mode,
    })
}

/// Takes an S-procedure multiplier `tau >= 0` as the `Q` of a certificate.
///
/// The returned certificate is unverified (`lmi_margin = +inf`) until checked
/// with [`certify`] against a concrete system.
pub fn multiplier_to_certificate(
    tau: &HermitianMatrix,
    p: &HermitianMatrix,
    tol: f64,
) -> Result<Certificate> {
    if tau.dim() != p.dim() {
        return Err(Error::dims("multiplier", p.dim(), tau.dim()));
    }
    let q_margin = tau.min_eigenvalue();
    if q_margin < -tol {
        return Err(Error::NotPsd { min_eig: q_margin });
    }
    Ok(Certificate {
        p: p.clone(),
        q: tau.clone(),
        lmi_margin: f64::INFINITY,
        q_margin,
    })
}

/// Searches for `P` with `Q` held fixed (e.g. at a multiplier found by the
/// S-procedure).
pub fn storage_for_multiplier(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    q: &HermitianMatrix,
    opts: &GkypOptions,
) -> Result<GkypOutcome> {
    check_dims(sys, pi)?;
    let p_param = HermitianParam::new(sys.states(), false);
    let f = outer_factor(sys);
    let fa = f.adjoint();
    let fixed = &fa * q_middle(q.as_matrix(), band) * &f + pi.as_matrix();
    let terms = p_param
        .basis()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let lhs = &fa * p_middle(e.as_matrix()) * &f;
            (k, HermitianMatrix::symmetrize(&(-lhs)))
        })
        .collect();
    let mut system = LmiSystem::new(p_param.count());
    system.add_sparse_block(HermitianMatrix::symmetrize(&(-fixed)), terms)?;
    let outcome = sdp::solve_feasibility(&system, &opts.sdp)?;
    let certificate = if outcome.status.is_feasible() {
        let p = p_param.assemble(&outcome.y)?;
        Some(certify(sys, pi, band, p, q.clone())?)
    } else {
        None
    };
    Ok(GkypOutcome {
        outcome,
        certificate,
        real_mode: false,
    })
}

/// Left side evaluated for the decision vector `y` through the assembled
/// system (block 1 negated back).
pub fn assembled_left_side(problem: &GkypProblem, y: &[f64]) -> Result<HermitianMatrix> {
    Ok(problem.system.eval_block(0, y)?.scale(-1.0))
}

/// Largest entry-wise gap between two Hermitian matrices.
pub fn max_entry_gap(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    linalg::max_abs(&(a.as_matrix() - b.as_matrix()))
}
