//! Dense phase-I feasibility solver for Hermitian linear matrix inequalities.
//!
//! Every problem has the form `F_k(y) = C_k + sum_i y_i A_{k,i} >= 0` for
//! blocks `k` and real decision variables `y`. The solver minimizes the
//! uniform slack `t` subject to `F_k(y) + t I >= 0` by log-barrier path
//! following with damped Newton steps on the real symmetric embedding of each
//! block. The sign of the optimal slack decides feasibility.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::model::HermitianMatrix;

/// One affine Hermitian-valued block `C + sum_i y_i A_i`, required `>= 0`.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    constant: HermitianMatrix,
    terms: Vec<(usize, HermitianMatrix)>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn constant(&self) -> &HermitianMatrix {
        &self.constant
    }

    /// Coefficient of variable `i`, if it appears in this block.
    pub fn coefficient(&self, i: usize) -> Option<&HermitianMatrix> {
        self.terms.iter().find(|(k, _)| *k == i).map(|(_, m)| m)
    }
}

/// A system of LMI blocks in `num_vars` real unknowns.
#[derive(Debug, Clone, Default)]
pub struct LmiSystem {
    num_vars: usize,
    blocks: Vec<LmiBlock>,
}

impl LmiSystem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            blocks: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn blocks(&self) -> &[LmiBlock] {
        &self.blocks
    }

    /// Adds a block with one coefficient matrix per variable.
    pub fn add_block(
        &mut self,
        constant: HermitianMatrix,
        coefficients: Vec<HermitianMatrix>,
    ) -> Result<usize> {
        if coefficients.len() != self.num_vars {
            return Err(Error::dims("LMI coefficients", self.num_vars, coefficients.len()));
        }
        let terms = coefficients.into_iter().enumerate().collect();
        self.add_sparse_block(constant, terms)
    }

    /// Adds a block listing only the variables that appear in it. Repeated
    /// variable indices are summed; all-zero coefficients are dropped.
    pub fn add_sparse_block(
        &mut self,
        constant: HermitianMatrix,
        terms: Vec<(usize, HermitianMatrix)>,
    ) -> Result<usize> {
        let d = constant.dim();
        let mut merged: Vec<(usize, HermitianMatrix)> = Vec::with_capacity(terms.len());
        for (i, m) in terms {
            if i >= self.num_vars {
                return Err(Error::dims("LMI variable index", self.num_vars, i));
            }
            if m.dim() != d {
                return Err(Error::dims("LMI coefficient", d, m.dim()));
            }
            if linalg::max_abs(m.as_matrix()) == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(k, _)| *k == i) {
                Some((_, acc)) => *acc = acc.add(&m)?,
                None => merged.push((i, m)),
            }
        }
        merged.sort_by_key(|(i, _)| *i);
        self.blocks.push(LmiBlock {
            constant,
            terms: merged,
        });
        Ok(self.blocks.len() - 1)
    }

    /// `C_k + sum_i y_i A_{k,i}`, symmetrized.
    pub fn eval_block(&self, block: usize, y: &[f64]) -> Result<HermitianMatrix> {
        if y.len() != self.num_vars {
            return Err(Error::dims("decision vector", self.num_vars, y.len()));
        }
        let b = self
            .blocks
            .get(block)
            .ok_or_else(|| Error::dims("block index", self.blocks.len(), block))?;
        let mut acc: CMatrix = b.constant.as_matrix().clone();
        for (i, m) in &b.terms {
            acc += m.as_matrix() * linalg::c(y[*i], 0.0);
        }
        Ok(HermitianMatrix::symmetrize(&acc))
    }

    /// Real symmetric embedding of every block.
    pub fn realified(&self) -> RealLmi {
        RealLmi {
            num_vars: self.num_vars,
            blocks: self
                .blocks
                .iter()
                .map(|b| RealBlock {
                    constant: b.constant.realify(),
                    terms: b.terms.iter().map(|(i, m)| (*i, m.realify())).collect(),
                })
                .collect(),
        }
    }
}

/// Realified problem; serializable for external cross-checking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealLmi {
    pub num_vars: usize,
    pub blocks: Vec<RealBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealBlock {
    #[serde(with = "dense")]
    pub constant: RMatrix,
    #[serde(with = "dense_terms")]
    pub terms: Vec<(usize, RMatrix)>,
}

impl RealBlock {
    fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

mod dense {
    use super::RMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &RMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RMatrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        if flat.len() != n * n {
            return Err(serde::de::Error::custom("block must be square"));
        }
        Ok(RMatrix::from_row_slice(n, n, &flat))
    }
}

mod dense_terms {
    use super::RMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Term {
        var: usize,
        matrix: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(t: &[(usize, RMatrix)], s: S) -> Result<S::Ok, S::Error> {
        let terms: Vec<Term> = t
            .iter()
            .map(|(i, m)| Term {
                var: *i,
                matrix: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
            })
            .collect();
        terms.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(usize, RMatrix)>, D::Error> {
        let terms = Vec::<Term>::deserialize(d)?;
        terms
            .into_iter()
            .map(|t| {
                let n = t.matrix.len();
                let flat: Vec<f64> = t.matrix.into_iter().flatten().collect();
                if flat.len() != n * n {
                    return Err(serde::de::Error::custom("term must be square"));
                }
                Ok((t.var, RMatrix::from_row_slice(n, n, &flat)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    StrictlyFeasible,
    MarginallyFeasible,
    Infeasible,
    NumericalFailure,
}

impl SdpStatus {
    pub fn is_feasible(self) -> bool {
        matches!(self, SdpStatus::StrictlyFeasible | SdpStatus::MarginallyFeasible)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpOutcome {
    pub status: SdpStatus,
    pub y: Vec<f64>,
    pub t_star: f64,
    /// Certified lower bound on the optimal slack from the last completed
    /// centering (`t - nu / s` there).
    pub t_lower: f64,
    /// Lower bound on the optimal slack over all `y` (no trust region), from
    /// a projected dual point; `-inf` when no dual point was found.
    pub dual_lower: f64,
    /// Total Newton steps.
    pub iterations: usize,
    /// Duality-gap bound `nu / s` at the last completed centering.
    pub gap: f64,
    pub converged: bool,
    pub trust_region_active: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    /// Cap on the total number of Newton steps.
    pub max_iter: usize,
    /// Relative duality-gap target.
    pub tol: f64,
    /// `t_star < -strict_margin` is strict feasibility, `|t_star| <= strict_margin` marginal.
    pub strict_margin: f64,
    pub trust_radius: f64,
    /// Largest admissible condition number of the (Jacobi-scaled) Newton system.
    pub max_condition: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iter: 600,
            tol: 1e-10,
            strict_margin: 1e-7,
            trust_radius: 1e6,
            max_condition: 1e14,
        }
    }
}

const BARRIER_GROWTH: f64 = 8.0;
const NEWTON_DECREMENT_TOL: f64 = 1e-10;
const ARMIJO: f64 = 0.25;
const LINE_SEARCH_FLOOR: f64 = 1e-6;

/// Minimizes `t` subject to `F_k(y) + t I >= 0` for every block and
/// `|y| <= trust_radius`.
pub fn solve_feasibility(prob: &LmiSystem, opts: &SdpOptions) -> Result<SdpOutcome> {
    if prob.blocks().is_empty() {
        return Err(Error::Input("LMI system has no blocks".into()));
    }
    let real = prob.realified();
    Ok(PhaseOne::new(&real, opts).run())
}

/// Solves an already realified problem.
pub fn solve_real(prob: &RealLmi, opts: &SdpOptions) -> Result<SdpOutcome> {
    if prob.blocks.is_empty() {
        return Err(Error::Input("LMI system has no blocks".into()));
    }
    Ok(PhaseOne::new(prob, opts).run())
}

struct PhaseOne<'a> {
    prob: &'a RealLmi,
    opts: &'a SdpOptions,
    /// Barrier parameter count: sum of realified block sizes plus the ball.
    nu: f64,
}

/// Barrier data at one point; `value` excludes the linear term `s t`,
/// which is handled exactly in the line search.
struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

enum Centering {
    Done,
    Stalled(String),
    IterationCap,
    IllConditioned(f64),
}

impl<'a> PhaseOne<'a> {
    fn new(prob: &'a RealLmi, opts: &'a SdpOptions) -> Self {
        let nu = prob.blocks.iter().map(|b| b.dim() as f64).sum::<f64>() + 1.0;
        Self { prob, opts, nu }
    }

    fn nv(&self) -> usize {
        self.prob.num_vars
    }

    fn slack_matrix(&self, block: &RealBlock, x: &DVector<f64>) -> RMatrix {
        let t = x[self.nv()];
        let mut s = block.constant.clone();
        for (i, a) in &block.terms {
            s += a * x[*i];
        }
        for k in 0..s.nrows() {
            s[(k, k)] += t;
        }
        s
    }

    fn ball_room(&self, x: &DVector<f64>) -> f64 {
        let r = self.opts.trust_radius;
        let y2: f64 = (0..self.nv()).map(|i| x[i] * x[i]).sum();
        r * r - y2
    }

    /// Barrier part of the objective (everything except `s t`), or `None`
    /// outside the domain.
    fn barrier(&self, x: &DVector<f64>) -> Option<f64> {
        let room = self.ball_room(x);
        if room <= 0.0 {
            return None;
        }
        let mut v = -room.ln();
        for b in &self.prob.blocks {
            let chol = Cholesky::new(self.slack_matrix(b, x))?;
            let l = chol.l_dirty();
            v -= 2.0 * (0..l.nrows()).map(|k| l[(k, k)].ln()).sum::<f64>();
        }
        Some(v)
    }

    fn local(&self, x: &DVector<f64>, s: f64) -> Option<Local> {
        let nv = self.nv();
        let dim = nv + 1;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        let room = self.ball_room(x);
        if room <= 0.0 {
            return None;
        }
        let mut value = -room.ln();
        grad[nv] = s;
        for i in 0..nv {
            grad[i] += 2.0 * x[i] / room;
            hess[(i, i)] += 2.0 / room;
            for j in 0..nv {
                hess[(i, j)] += 4.0 * x[i] * x[j] / (room * room);
            }
        }
        for b in &self.prob.blocks {
            let chol: Cholesky<f64, Dyn> = Cholesky::new(self.slack_matrix(b, x))?;
            let l = chol.l();
            value -= 2.0 * (0..l.nrows()).map(|k| l[(k, k)].ln()).sum::<f64>();
            // Whitened coefficients L^{-1} A L^{-T}; the slack variable has A = I.
            let mut whitened: Vec<(usize, RMatrix)> = Vec::with_capacity(b.terms.len() + 1);
            for (i, a) in &b.terms {
                whitened.push((*i, whiten(&l, a)?));
            }
            let eye = RMatrix::identity(b.dim(), b.dim());
            whitened.push((nv, whiten(&l, &eye)?));
            for (p, (i, wi)) in whitened.iter().enumerate() {
                grad[*i] -= wi.trace();
                for (j, wj) in whitened.iter().skip(p) {
                    let h = wi.dot(wj);
                    hess[(*i, *j)] += h;
                    if i != j {
                        hess[(*j, *i)] += h;
                    }
                }
            }
        }
        Some(Local { value, grad, hess })
    }

    fn run(&self) -> SdpOutcome {
        let nv = self.nv();
        let mut x = DVector::zeros(nv + 1);
        let start = self
            .prob
            .blocks
            .iter()
            .map(|b| linalg::symmetric_eigenvalues(&(-&b.constant)).last().copied().unwrap_or(0.0))
            .fold(f64::NEG_INFINITY, f64::max);
        x[nv] = start + 1.0;

        let mut s = 1.0 / x[nv].abs().max(1.0);
        let mut iterations = 0usize;
        let mut converged = false;
        let mut message = None;
        let mut t_lower = f64::NEG_INFINITY;
        let mut gap = f64::INFINITY;
        let mut dual_lower = f64::NEG_INFINITY;

        loop {
            let step = self.center(&mut x, s, &mut iterations);
            let t = x[nv];
            if let Some(d) = self.dual_bound(&x) {
                dual_lower = dual_lower.max(d);
            }
            match step {
                Centering::Done => {}
                Centering::Stalled(msg) => {
                    message = Some(msg);
                    break;
                }
                Centering::IterationCap => {
                    message = Some(format!("Newton step cap {} reached", self.opts.max_iter));
                    break;
                }
                Centering::IllConditioned(cond) => {
                    message = Some(format!("Newton system condition {cond:.2e}"));
                    break;
                }
            }
            gap = self.nu / s;
            t_lower = t - gap;
            if gap <= self.opts.tol * t.abs().max(1.0) {
                converged = true;
                break;
            }
            s *= BARRIER_GROWTH;
        }
        // An early stop late on the path is the usual end on degenerate
        // problems; it counts as converged when the bracket is already tight.
        if !converged && gap <= 1e3 * self.opts.tol * x[nv].abs().max(1.0) {
            converged = true;
        }

        let t_star = x[nv];
        let y: Vec<f64> = x.iter().take(nv).copied().collect();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let trust_region_active = y_norm >= 0.5 * self.opts.trust_radius;
        let margin = self.opts.strict_margin;
        // The optimum lies in [t_lower, t_star]; a verdict needs only the
        // side of the margin band that bracket falls on.
        let status = if t_star < -margin {
            SdpStatus::StrictlyFeasible
        } else if dual_lower > margin {
            SdpStatus::Infeasible
        } else if trust_region_active {
            SdpStatus::NumericalFailure
        } else if t_lower > margin {
            SdpStatus::Infeasible
        } else if converged && t_star <= margin {
            SdpStatus::MarginallyFeasible
        } else if converged {
            SdpStatus::Infeasible
        } else {
            SdpStatus::NumericalFailure
        };
        if trust_region_active && message.is_none() && status == SdpStatus::NumericalFailure {
            message = Some("decision vector reached the trust region".into());
        }
        SdpOutcome {
            status,
            y,
            t_star,
            t_lower,
            dual_lower,
            iterations,
            gap,
            converged,
            trust_region_active,
            message,
        }
    }

    /// Weak-duality bound from the barrier's dual point `Z_k ~ S_k^{-1}`.
    ///
    /// `Z` is normalized to unit total trace and projected onto
    /// `sum_k <A_{k,i}, Z_k> = 0`; if it stays positive semidefinite then
    /// every `y` has `t >= -sum_k <C_k, Z_k>`.
    fn dual_bound(&self, x: &DVector<f64>) -> Option<f64> {
        let mut z: Vec<RMatrix> = Vec::with_capacity(self.prob.blocks.len());
        for b in &self.prob.blocks {
            let chol = Cholesky::new(self.slack_matrix(b, x))?;
            z.push(linalg::symmetric_part(&chol.inverse()));
        }
        let total: f64 = z.iter().map(|m| m.trace()).sum();
        if !(total > 0.0) {
            return None;
        }
        for m in z.iter_mut() {
            *m /= total;
        }
        // The Z-weighted correction Z W Z keeps Z + ZWZ >= 0 for small W;
        // the plain one handles the case where Z is nearly singular.
        self.project_dual(&z, true).or_else(|| self.project_dual(&z, false))
    }

    /// Coefficient `i` of a block, with index `nv` standing for the trace.
    fn coefficient(&self, b: &RealBlock, i: usize) -> Option<RMatrix> {
        if i == self.nv() {
            Some(RMatrix::identity(b.dim(), b.dim()))
        } else {
            b.terms.iter().find(|(j, _)| *j == i).map(|(_, a)| a.clone())
        }
    }

    fn project_dual(&self, z: &[RMatrix], weighted: bool) -> Option<f64> {
        let nv = self.nv();
        let count = nv + 1;
        let blocks = &self.prob.blocks;
        let coeffs: Vec<Vec<Option<RMatrix>>> = blocks
            .iter()
            .map(|b| (0..count).map(|i| self.coefficient(b, i)).collect())
            .collect();
        // Correction directions D_{k,i}: Z A Z or A.
        let dirs: Vec<Vec<Option<RMatrix>>> = coeffs
            .iter()
            .zip(z)
            .map(|(cs, zk)| {
                cs.iter()
                    .map(|a| a.as_ref().map(|a| if weighted { zk * a * zk } else { a.clone() }))
                    .collect()
            })
            .collect();
        let residual = |z: &[RMatrix]| -> DVector<f64> {
            let mut r = DVector::<f64>::zeros(count);
            r[nv] = -1.0;
            for (k, zk) in z.iter().enumerate() {
                for i in 0..count {
                    if let Some(a) = &coeffs[k][i] {
                        r[i] += a.dot(zk);
                    }
                }
            }
            r
        };
        let mut gram = DMatrix::<f64>::zeros(count, count);
        for k in 0..blocks.len() {
            for i in 0..count {
                let Some(ai) = &coeffs[k][i] else { continue };
                for j in 0..count {
                    if let Some(dj) = &dirs[k][j] {
                        gram[(i, j)] += ai.dot(dj);
                    }
                }
            }
        }
        let eps = 1e-13 * gram.norm();
        let svd = gram.svd(true, true);
        let mut z = z.to_vec();
        // Repeated projection acts as iterative refinement on the
        // ill-conditioned weighted system.
        for _ in 0..8 {
            let r = residual(&z);
            if r.amax() <= 1e-13 {
                break;
            }
            let c = svd.solve(&r, eps).ok()?;
            for k in 0..blocks.len() {
                for i in 0..count {
                    if let Some(d) = &dirs[k][i] {
                        z[k] -= d * c[i];
                    }
                }
                z[k] = linalg::symmetric_part(&z[k]);
            }
        }
        if residual(&z).amax() > 1e-9 {
            return None;
        }
        let mut bound = 0.0;
        for (k, b) in blocks.iter().enumerate() {
            let lo = linalg::symmetric_eigenvalues(&z[k]).first().copied().unwrap_or(0.0);
            if lo < 0.0 {
                return None;
            }
            bound -= b.constant.dot(&z[k]);
        }
        Some(bound)
    }

    fn center(&self, x: &mut DVector<f64>, s: f64, iterations: &mut usize) -> Centering {
        loop {
            if *iterations >= self.opts.max_iter {
                return Centering::IterationCap;
            }
            *iterations += 1;
            let Some(local) = self.local(x, s) else {
                return Centering::Stalled("iterate left the barrier domain".into());
            };
            let step = match newton_direction(&local.hess, &local.grad, self.opts.max_condition) {
                Ok(d) => d,
                Err(cond) => return Centering::IllConditioned(cond),
            };
            let decrement = -local.grad.dot(&step);
            if decrement.is_nan() {
                return Centering::Stalled("non-finite Newton decrement".into());
            }
            // Below the resolution of the iterate the decrement is rounding noise.
            let negligible = step
                .iter()
                .zip(x.iter())
                .all(|(d, v)| d.abs() <= 4.0 * f64::EPSILON * v.abs().max(1.0));
            if decrement <= 2.0 * NEWTON_DECREMENT_TOL || negligible {
                return Centering::Done;
            }
            let mut alpha = 1.0;
            loop {
                let trial = &*x + &step * alpha;
                if trial == *x {
                    return Centering::Done;
                }
                if let Some(v) = self.barrier(&trial) {
                    let change = s * (trial[self.nv()] - x[self.nv()]) + (v - local.value);
                    if change <= -ARMIJO * alpha * decrement {
                        *x = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    // Near the center the log-det values carry less precision
                    // than the remaining decrease.
                    if decrement <= 2.0 * LINE_SEARCH_FLOOR {
                        return Centering::Done;
                    }
                    return Centering::Stalled("line search failed".into());
                }
            }
        }
    }
}

/// `L^{-1} A L^{-T}` for symmetric `A`.
fn whiten(l: &RMatrix, a: &RMatrix) -> Option<RMatrix> {
    let half = l.solve_lower_triangular(a)?;
    let full = l.solve_lower_triangular(&half.transpose())?;
    Some(linalg::symmetric_part(&full))
}

/// Newton step `-H^{-1} g` with Jacobi scaling; `Err` only if the system
/// carries no usable curvature.
fn newton_direction(
    hess: &DMatrix<f64>,
    grad: &DVector<f64>,
    max_condition: f64,
) -> std::result::Result<DVector<f64>, f64> {
    let n = grad.len();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = hess[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * scale[i] * scale[j]);
    let eig = linalg::symmetric_eigenvalues(&scaled);
    let lo = eig.first().copied().unwrap_or(0.0);
    let hi = eig.last().copied().unwrap_or(0.0);
    if !(hi > 0.0) || !hi.is_finite() {
        return Err(f64::INFINITY);
    }
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    // Past the limit the step is taken on a ridge-regularized system, which
    // is still a descent direction; the line search decides its worth.
    let mut scaled = scaled;
    if !(cond <= max_condition) {
        let ridge = hi / max_condition - lo.min(0.0);
        for i in 0..n {
            scaled[(i, i)] += ridge;
        }
    }
    let rhs = DVector::from_fn(n, |i, _| -grad[i] * scale[i]);
    let chol = Cholesky::new(scaled).ok_or(f64::INFINITY)?;
    let z = chol.solve(&rhs);
    Ok(DVector::from_fn(n, |i, _| z[i] * scale[i]))
}
