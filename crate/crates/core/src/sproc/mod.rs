//! S-procedure: multiplier certificates for statement (B), randomized
//! falsifiers for statement (A), and integral quadratic operators on sampled
//! signals.

mod problem;
mod shift;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::lmi::HermitianParam;
use crate::model::HermitianMatrix;
use crate::sdp::{self, LmiSystem, SdpOptions, SdpStatus};

pub use problem::{MapJson, SprocProblem, SprocReport, SprocVerdict};
pub use shift::{forward_shift, shift_system_check, ShiftCheck, ShiftStep};

/// Matrix-valued quadratic map `M(z)_{pq} = z^† Phi_{pq} z`.
///
/// Kernels are stored row-major over `(p, q)` with `Phi_{qp} = Phi_{pq}^†`,
/// so `M(z)` is Hermitian for every `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    input_dim: usize,
    output_dim: usize,
    kernel: Vec<CMatrix>,
}

impl QuadraticMap {
    /// Builds a map from its `d * d` kernels. The lower triangle is replaced
    /// by the adjoints of the upper one after checking consistency.
    pub fn new(input_dim: usize, output_dim: usize, kernel: Vec<CMatrix>) -> Result<Self> {
        if output_dim == 0 || input_dim == 0 {
            return Err(Error::Input("quadratic map needs positive dimensions".into()));
        }
        if kernel.len() != output_dim * output_dim {
            return Err(Error::dims("quadratic map kernels", output_dim * output_dim, kernel.len()));
        }
        for k in &kernel {
            if k.nrows() != input_dim || k.ncols() != input_dim {
                return Err(Error::dims(
                    "quadratic map kernel",
                    format!("{input_dim}x{input_dim}"),
                    format!("{}x{}", k.nrows(), k.ncols()),
                ));
            }
            if !linalg::is_finite(k) {
                return Err(Error::NonFinite);
            }
        }
        let d = output_dim;
        let mut kernel = kernel;
        for p in 0..d {
            for q in p..d {
                let upper = kernel[p * d + q].clone();
                let lower = &kernel[q * d + p];
                let deviation = linalg::max_abs(&(lower - upper.adjoint()));
                if deviation > 1e-12 * (1.0 + linalg::max_abs(&upper)) {
                    return Err(Error::NotHermitian { deviation });
                }
                if p == q {
                    kernel[p * d + p] = linalg::hermitian_part(&upper);
                } else {
                    kernel[q * d + p] = upper.adjoint();
                }
            }
        }
        Ok(Self {
            input_dim,
            output_dim,
            kernel,
        })
    }

    /// Scalar form `z^† H z`.
    pub fn scalar(h: &HermitianMatrix) -> Self {
        Self {
            input_dim: h.dim(),
            output_dim: 1,
            kernel: vec![h.as_matrix().clone()],
        }
    }

    /// `He(F' z z^† F''^†)` for a single vector `z`.
    pub fn outer(f1: &CMatrix, f2: &CMatrix) -> Result<Self> {
        if f1.shape() != f2.shape() {
            return Err(Error::dims(
                "outer quadratic map",
                format!("{}x{}", f1.nrows(), f1.ncols()),
                format!("{}x{}", f2.nrows(), f2.ncols()),
            ));
        }
        let (d, k) = f1.shape();
        let mut kernel = Vec::with_capacity(d * d);
        for p in 0..d {
            for q in 0..d {
                // (F'z)_p conj((F''z)_q) = z^† (F''_q)^† F'_p z, averaged with its adjoint.
                let a = f2.row(q).adjoint() * f1.row(p);
                let b = f1.row(q).adjoint() * f2.row(p);
                kernel.push((a + b) * linalg::c(0.5, 0.0));
            }
        }
        Self::new(k, d, kernel)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kernel(&self, p: usize, q: usize) -> &CMatrix {
        &self.kernel[p * self.output_dim + q]
    }

    pub fn is_real(&self) -> bool {
        self.kernel.iter().all(linalg::is_real)
    }

    pub fn eval(&self, z: &CVector) -> Result<HermitianMatrix> {
        if z.len() != self.input_dim {
            return Err(Error::dims("quadratic map argument", self.input_dim, z.len()));
        }
        let d = self.output_dim;
        let m = CMatrix::from_fn(d, d, |p, q| z.dotc(&(self.kernel(p, q) * z)));
        Ok(HermitianMatrix::symmetrize(&m))
    }

    /// Kernel of the scalar form `z -> <tau, M(z)>`, i.e. `sum_{pq} tau_{qp} Phi_{pq}`.
    pub fn paired_kernel(&self, tau: &HermitianMatrix) -> Result<HermitianMatrix> {
        if tau.dim() != self.output_dim {
            return Err(Error::dims("multiplier", self.output_dim, tau.dim()));
        }
        let d = self.output_dim;
        let t = tau.as_matrix();
        let mut acc = CMatrix::zeros(self.input_dim, self.input_dim);
        for p in 0..d {
            for q in 0..d {
                acc += self.kernel(p, q) * t[(q, p)];
            }
        }
        Ok(HermitianMatrix::symmetrize(&acc))
    }
}

/// `Re tr(S M)`.
pub fn dual_pairing(s: &HermitianMatrix, m: &HermitianMatrix) -> Result<f64> {
    if s.dim() != m.dim() {
        return Err(Error::dims("dual pairing", s.dim(), m.dim()));
    }
    let a = s.as_matrix();
    let b = m.as_matrix();
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    Ok(acc)
}

/// Multipliers for statement (B): `tau_0 F - sum_j <tau_j, G_j> >= 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SprocCertificate {
    pub tau0: f64,
    pub multipliers: Vec<HermitianMatrix>,
    /// Smallest eigenvalue of the combined kernel.
    pub margin: f64,
    pub solver_status: SdpStatus,
}

impl SprocCertificate {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.tau0 >= 0.0
            && self.margin >= -tol
            && self.multipliers.iter().all(|t| t.min_eigenvalue() >= -tol)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertificateOptions {
    pub sdp: SdpOptions,
    /// Acceptance tolerance on the recovered kernel and multipliers.
    pub tol: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            sdp: SdpOptions::default(),
            tol: 1e-7,
        }
    }
}

fn check_inputs(f: &QuadraticMap, constraints: &[QuadraticMap]) -> Result<()> {
    if f.output_dim != 1 {
        return Err(Error::dims("objective map output", 1, f.output_dim));
    }
    for g in constraints {
        if g.input_dim != f.input_dim {
            return Err(Error::dims("constraint map input", f.input_dim, g.input_dim));
        }
    }
    Ok(())
}

/// `tau_0 F - sum_j <tau_j, G_j>` as a kernel matrix.
pub fn combined_kernel(
    f: &QuadraticMap,
    constraints: &[QuadraticMap],
    tau0: f64,
    multipliers: &[HermitianMatrix],
) -> Result<HermitianMatrix> {
    check_inputs(f, constraints)?;
    if multipliers.len() != constraints.len() {
        return Err(Error::dims("multiplier count", constraints.len(), multipliers.len()));
    }
    let mut acc = f.kernel(0, 0) * linalg::c(tau0, 0.0);
    for (g, t) in constraints.iter().zip(multipliers) {
        acc -= g.paired_kernel(t)?.as_matrix();
    }
    Ok(HermitianMatrix::symmetrize(&acc))
}

/// Searches for a statement-(B) certificate.
///
/// With `regular` the scale is fixed by `tau_0 = 1`; otherwise
/// `tau_0 = 1 - sum_j tr tau_j` with `tau_0 >= 0`, which excludes the zero
/// multiplier. Returns `None` when the solver finds no certificate.
pub fn find_certificate(
    f: &QuadraticMap,
    constraints: &[QuadraticMap],
    regular: bool,
    opts: &CertificateOptions,
) -> Result<Option<SprocCertificate>> {
    check_inputs(f, constraints)?;
    let real = f.is_real() && constraints.iter().all(QuadraticMap::is_real);
    let params: Vec<HermitianParam> = constraints
        .iter()
        .map(|g| HermitianParam::new(g.output_dim, real))
        .collect();
    let offsets: Vec<usize> = params
        .iter()
        .scan(0, |acc, p| {
            let start = *acc;
            *acc += p.count();
            Some(start)
        })
        .collect();
    let nv: usize = params.iter().map(HermitianParam::count).sum();
    let fk = HermitianMatrix::symmetrize(f.kernel(0, 0));

    let mut lmi = LmiSystem::new(nv);
    let mut main_terms = Vec::with_capacity(nv);
    for ((g, p), off) in constraints.iter().zip(&params).zip(&offsets) {
        let weights = p.trace_weights();
        for (k, basis) in p.basis().iter().enumerate() {
            let mut coef = g.paired_kernel(basis)?.scale(-1.0);
            if !regular {
                coef = coef.add(&fk.scale(-weights[k]))?;
            }
            main_terms.push((off + k, coef));
        }
    }
    lmi.add_sparse_block(fk.clone(), main_terms)?;
    for (p, off) in params.iter().zip(&offsets) {
        let terms = p.basis().into_iter().enumerate().map(|(k, b)| (off + k, b)).collect();
        lmi.add_sparse_block(HermitianMatrix::zeros(p.dim), terms)?;
    }
    if !regular {
        let mut terms = Vec::new();
        for (p, off) in params.iter().zip(&offsets) {
            for (k, w) in p.trace_weights().into_iter().enumerate() {
                terms.push((off + k, HermitianMatrix::from_diagonal(&[-w])));
            }
        }
        lmi.add_sparse_block(HermitianMatrix::identity(1), terms)?;
    }
    if nv == 0 {
        // No constraints: (B) reduces to F >= 0.
        let margin = fk.min_eigenvalue();
        if margin >= -opts.tol {
            return Ok(Some(SprocCertificate {
                tau0: 1.0,
                multipliers: Vec::new(),
                margin,
                solver_status: SdpStatus::MarginallyFeasible,
            }));
        }
        return Ok(None);
    }

    let out = sdp::solve_feasibility(&lmi, &opts.sdp)?;
    if !out.status.is_feasible() {
        return Ok(None);
    }
    let mut multipliers = Vec::with_capacity(params.len());
    for (p, off) in params.iter().zip(&offsets) {
        let raw = p.assemble(&out.y[*off..off + p.count()])?;
        multipliers.push(psd_projection(&raw));
    }
    let tau0 = if regular {
        1.0
    } else {
        (1.0 - multipliers.iter().map(HermitianMatrix::trace).sum::<f64>()).max(0.0)
    };
    let margin = combined_kernel(f, constraints, tau0, &multipliers)?.min_eigenvalue();
    let cert = SprocCertificate {
        tau0,
        multipliers,
        margin,
        solver_status: out.status,
    };
    Ok(cert.is_valid(opts.tol).then_some(cert))
}

/// Nearest PSD matrix in Frobenius norm.
fn psd_projection(h: &HermitianMatrix) -> HermitianMatrix {
    let (vals, vecs) = h.eigh();
    let mut acc = CMatrix::zeros(h.dim(), h.dim());
    for (k, v) in vals.iter().enumerate() {
        if *v > 0.0 {
            let col = vecs.column(k).into_owned();
            acc += linalg::outer(&col, &col) * linalg::c(*v, 0.0);
        }
    }
    HermitianMatrix::symmetrize(&acc)
}

#[derive(Debug, Clone, Copy)]
pub struct FalsifyOptions {
    /// Total number of objective evaluations across all restarts.
    pub budget: usize,
    pub restarts: usize,
    pub tol: f64,
    /// Weight of the constraint-violation penalty.
    pub penalty: f64,
    /// Restart `k` uses seed `seed + k`.
    pub seed: usize,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        Self {
            budget: 10_000,
            restarts: 64,
            tol: 1e-9,
            penalty: 100.0,
            seed: 0,
        }
    }
}

/// A unit vector violating statement (A).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatementAWitness {
    #[serde(with = "crate::model::vector_json")]
    pub z: CVector,
    pub objective: f64,
    /// Smallest eigenvalue of each constraint value at `z`.
    pub constraint_min_eigs: Vec<f64>,
    pub seed: usize,
}

struct Search<'a> {
    f: &'a QuadraticMap,
    constraints: &'a [QuadraticMap],
    penalty: f64,
}

impl Search<'_> {
    /// Penalized objective and its gradient with respect to `z`.
    fn value_grad(&self, z: &CVector) -> (f64, CVector) {
        let fk = self.f.kernel(0, 0);
        let fz = fk * z;
        let mut value = z.dotc(&fz).re;
        let mut grad = fz * linalg::c(2.0, 0.0);
        for g in self.constraints {
            let m = g.eval(z).expect("dimension checked");
            let (vals, vecs) = m.eigh();
            for (k, lam) in vals.iter().enumerate() {
                if *lam >= 0.0 {
                    continue;
                }
                value += self.penalty * lam * lam;
                let v = vecs.column(k).into_owned();
                let tau = HermitianMatrix::symmetrize(&linalg::outer(&v, &v));
                let kz = g.paired_kernel(&tau).expect("dimension checked").as_matrix() * z;
                grad += kz * linalg::c(4.0 * self.penalty * lam, 0.0);
            }
        }
        (value, grad)
    }

    fn witness(&self, z: &CVector, tol: f64, seed: usize) -> Option<StatementAWitness> {
        let objective = self.f.eval(z).ok()?.as_matrix()[(0, 0)].re;
        let constraint_min_eigs: Vec<f64> = self
            .constraints
            .iter()
            .map(|g| g.eval(z).map(|m| m.min_eigenvalue()).unwrap_or(f64::NEG_INFINITY))
            .collect();
        (objective < -tol && constraint_min_eigs.iter().all(|e| *e >= -tol)).then(|| {
            StatementAWitness {
                z: z.clone(),
                objective,
                constraint_min_eigs,
                seed,
            }
        })
    }

    fn run(&self, seed: usize, evaluations: usize, real: bool, tol: f64) -> Option<StatementAWitness> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let n = self.f.input_dim;
        let mut z = CVector::from_fn(n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
            C64::new(re, im)
        });
        z /= linalg::c(z.norm().max(f64::MIN_POSITIVE), 0.0);
        let (mut value, mut grad) = self.value_grad(&z);
        let mut best = self.witness(&z, tol, seed);
        let mut step = 0.5;
        let mut used = 1;
        while used < evaluations {
            // Tangential component; the sphere is the feasible manifold.
            let radial = z.dotc(&grad);
            let tangent = &grad - &z * radial;
            if tangent.norm() < 1e-14 {
                break;
            }
            let mut trial = &z - tangent * linalg::c(step, 0.0);
            if real {
                trial.iter_mut().for_each(|c| c.im = 0.0);
            }
            trial /= linalg::c(trial.norm(), 0.0);
            let (tv, tg) = self.value_grad(&trial);
            used += 1;
            if tv < value {
                z = trial;
                value = tv;
                grad = tg;
                step = (step * 1.5).min(4.0);
                if let Some(w) = self.witness(&z, tol, seed) {
                    if best.as_ref().is_none_or(|b| w.objective < b.objective) {
                        best = Some(w);
                    }
                }
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        best
    }
}

/// Randomized search for `z` with every `G_j(z) >= -tol I` and `F(z) < -tol`.
///
/// Restarts run in parallel; the most negative objective wins, ties going to
/// the lowest seed. `None` means no witness was found, not that none exists.
pub fn falsify_statement_a(
    f: &QuadraticMap,
    constraints: &[QuadraticMap],
    opts: &FalsifyOptions,
) -> Result<Option<StatementAWitness>> {
    check_inputs(f, constraints)?;
    let restarts = opts.restarts.max(1);
    let per = (opts.budget / restarts).max(1);
    let real = f.is_real() && constraints.iter().all(QuadraticMap::is_real);
    let search = Search {
        f,
        constraints,
        penalty: opts.penalty,
    };
    let found: Vec<Option<StatementAWitness>> = (0..restarts)
        .into_par_iter()
        .map(|k| search.run(opts.seed.wrapping_add(k), per, real, opts.tol))
        .collect();
    Ok(found.into_iter().flatten().fold(None, |best: Option<StatementAWitness>, w| match best {
        Some(b) if b.objective <= w.objective => Some(b),
        _ => Some(w),
    }))
}

/// `He(sum_i w_i F' z_i z_i^† F''^†)` with trapezoid weights, `He(X) = (X + X^†)/2`.
pub fn integral_quadratic(f1: &CMatrix, f2: &CMatrix, z: &[CVector], dt: f64) -> Result<HermitianMatrix> {
    if f1.shape() != f2.shape() {
        return Err(Error::dims(
            "integral quadratic factors",
            format!("{}x{}", f1.nrows(), f1.ncols()),
            format!("{}x{}", f2.nrows(), f2.ncols()),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::Input(format!("time step must be positive, got {dt}")));
    }
    let d = f1.nrows();
    let mut acc = CMatrix::zeros(d, d);
    let last = z.len().saturating_sub(1);
    for (i, zi) in z.iter().enumerate() {
        if zi.len() != f1.ncols() {
            return Err(Error::dims("signal sample", f1.ncols(), zi.len()));
        }
        let w = if i == 0 || i == last { 0.5 * dt } else { dt };
        let a = f1 * zi;
        let b = f2 * zi;
        acc += linalg::outer(&a, &b) * linalg::c(w, 0.0);
    }
    Ok(HermitianMatrix::symmetrize(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, v: &[f64]) -> CMatrix {
        linalg::to_complex(&crate::linalg::RMatrix::from_row_slice(rows, cols, v))
    }

    fn diag_map(v: &[f64]) -> QuadraticMap {
        QuadraticMap::scalar(&HermitianMatrix::from_diagonal(v))
    }

    #[test]
    fn pairing_examples() {
        let i2 = HermitianMatrix::identity(2);
        assert_eq!(dual_pairing(&i2, &i2).unwrap(), 2.0);
        let a = HermitianMatrix::from_diagonal(&[1.0, 0.0]);
        let b = HermitianMatrix::from_diagonal(&[0.0, 1.0]);
        assert_eq!(dual_pairing(&a, &b).unwrap(), 0.0);
        assert!(dual_pairing(&a, &HermitianMatrix::identity(3)).is_err());
    }

    #[test]
    fn paired_kernel_matches_pairing_of_values() {
        let f1 = CMatrix::from_fn(2, 3, |i, j| C64::new(i as f64 - j as f64, 0.3 * j as f64));
        let f2 = CMatrix::from_fn(2, 3, |i, j| C64::new(1.0 + (i * j) as f64, -0.2));
        let g = QuadraticMap::outer(&f1, &f2).unwrap();
        let z = CVector::from_vec(vec![C64::new(0.4, -1.0), C64::new(1.2, 0.1), C64::new(-0.7, 0.5)]);
        let tau = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(2.0, 0.0), C64::new(0.5, 0.3), C64::new(0.5, -0.3), C64::new(1.0, 0.0)],
        ))
        .unwrap();
        let direct = dual_pairing(&tau, &g.eval(&z).unwrap()).unwrap();
        let k = g.paired_kernel(&tau).unwrap();
        let via_kernel = z.dotc(&(k.as_matrix() * &z)).re;
        assert!((direct - via_kernel).abs() < 1e-12);
        // Outer map evaluates He(F'z (F''z)^†).
        let a = &f1 * &z;
        let b = &f2 * &z;
        let expected = linalg::hermitian_part(&linalg::outer(&a, &b));
        assert!(linalg::max_abs(&(g.eval(&z).unwrap().as_matrix() - expected)) < 1e-12);
    }

    #[test]
    fn inconsistent_kernel_rejected() {
        let k = vec![CMatrix::identity(2, 2), CMatrix::identity(2, 2) * linalg::c(0.0, 1.0), CMatrix::identity(2, 2), CMatrix::identity(2, 2)];
        assert!(matches!(QuadraticMap::new(2, 2, k), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn identical_forms_have_unit_multiplier() {
        let f = diag_map(&[1.0, 1.0]);
        let cert = find_certificate(&f, std::slice::from_ref(&f), true, &CertificateOptions::default())
            .unwrap()
            .expect("certificate");
        assert!(cert.margin >= -1e-7);
        assert!(cert.is_valid(1e-7));
    }

    #[test]
    fn scalar_pair_certificate_in_interval() {
        let f = diag_map(&[1.0, -1.0]);
        let g = diag_map(&[1.0, -2.0]);
        let cert = find_certificate(&f, std::slice::from_ref(&g), true, &CertificateOptions::default())
            .unwrap()
            .expect("certificate");
        let tau = cert.multipliers[0].as_matrix()[(0, 0)].re;
        assert!((0.5 - 1e-7..=1.0 + 1e-7).contains(&tau), "tau = {tau}");
        assert!(falsify_statement_a(&f, &[g], &FalsifyOptions::default()).unwrap().is_none());
    }

    #[test]
    fn negative_form_is_falsified_without_constraints() {
        let f = diag_map(&[-1.0, -1.0]);
        let w = falsify_statement_a(&f, &[], &FalsifyOptions::default()).unwrap().expect("witness");
        assert!((w.objective + 1.0).abs() < 1e-12);
        let again = falsify_statement_a(&f, &[], &FalsifyOptions::default()).unwrap().unwrap();
        assert_eq!(again.seed, w.seed);
        assert_eq!(again.z, w.z);
        assert!(find_certificate(&f, &[], true, &CertificateOptions::default()).unwrap().is_none());
    }

    #[test]
    fn homogeneous_search_normalizes() {
        let f = diag_map(&[1.0, -1.0]);
        let g = diag_map(&[1.0, -2.0]);
        let cert = find_certificate(&f, &[g], false, &CertificateOptions::default())
            .unwrap()
            .expect("certificate");
        let total = cert.tau0 + cert.multipliers[0].trace();
        assert!((total - 1.0).abs() < 1e-6, "total = {total}");
        assert!(cert.tau0 > 0.0);
    }

    #[test]
    fn integral_of_indicator() {
        let dt = 1e-3;
        let z: Vec<CVector> = (0..=2000)
            .map(|i| CVector::from_element(1, linalg::c(if (i as f64) * dt < 1.0 { 1.0 } else { 0.0 }, 0.0)))
            .collect();
        let one = CMatrix::identity(1, 1);
        let v = integral_quadratic(&one, &one, &z, dt).unwrap().as_matrix()[(0, 0)].re;
        assert!((v - 1.0).abs() <= dt, "v = {v}");
        let neg = integral_quadratic(&CMatrix::identity(2, 2), &(-CMatrix::identity(2, 2)), &vec![CVector::from_element(2, linalg::c(1.0, 0.0)); 3], dt).unwrap();
        assert!(neg.max_eigenvalue() <= 0.0);
        let zero = integral_quadratic(&one, &one, &vec![CVector::zeros(1); 4], dt).unwrap();
        assert_eq!(zero.trace(), 0.0);
    }

    #[test]
    fn matrix_constraint_reduces_to_scalar_pairing() {
        let g = QuadraticMap::outer(&real(2, 2, &[1.0, 0.0, 0.0, 1.0]), &real(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        let tau = HermitianMatrix::from_diagonal(&[1.0, 2.0]);
        let k = g.paired_kernel(&tau).unwrap();
        assert!(linalg::max_abs(&(k.as_matrix() - real(2, 2, &[1.0, 0.0, 0.0, -2.0]))) < 1e-15);
    }
}
