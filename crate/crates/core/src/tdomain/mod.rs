//! Time-domain side: exact-hold simulation, the dissipation integral, the
//! matrix integral quadratic constraint, and trajectory constructions.

mod falsify;
mod tones;
mod witness;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::model::{check_supply_dims, FrequencyBand, HermitianMatrix, StateSpace, Trajectory};

pub use falsify::{falsify_tdi, Falsification, FalsifyOptions, Attempt};
pub use tones::{
    in_band_multitone, run_tones, stabilizing_gain, ToneInput, TonePlan, ToneRun, TraceRow,
};
pub use witness::{decaying_exponential, regularity_witness, RegularityWitness};

/// Largest admissible `dt * |A|_2`.
pub const STEP_LIMIT: f64 = 0.1;

/// `exp([[A, B], [0, 0]] dt)` split into the state transition and the
/// held-input map.
pub(crate) fn zoh_maps(a: &CMatrix, b: &CMatrix, dt: f64) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = CMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * linalg::c(dt, 0.0)));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * linalg::c(dt, 0.0)));
    let e = linalg::expm(&aug);
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

pub(crate) fn check_step(a: &CMatrix, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Input(format!("time step must be positive, got {dt}")));
    }
    let product = dt * linalg::spectral_norm(a);
    if product > STEP_LIMIT {
        return Err(Error::StepTooLarge {
            product,
            limit: STEP_LIMIT,
        });
    }
    Ok(())
}

/// Simulates `x' = A x + B u` from `x(0) = 0` with `u` held constant on each
/// interval. `inputs[i]` is applied on `[t_i, t_{i+1})`; the last sample only
/// enters the derivative at the final grid point.
pub fn simulate(sys: &StateSpace, inputs: &[CVector], dt: f64) -> Result<Trajectory> {
    check_step(sys.a(), dt)?;
    if inputs.is_empty() {
        return Err(Error::Input("input signal has no samples".into()));
    }
    let m = sys.inputs();
    if let Some(bad) = inputs.iter().find(|u| u.len() != m) {
        return Err(Error::dims("input sample", m, bad.len()));
    }
    let (phi, gamma) = zoh_maps(sys.a(), sys.b(), dt);
    let mut states = Vec::with_capacity(inputs.len());
    let mut x = CVector::zeros(sys.states());
    states.push(x.clone());
    for u in &inputs[..inputs.len() - 1] {
        x = &phi * &x + &gamma * u;
        states.push(x.clone());
    }
    Trajectory::from_samples(sys, dt, states, inputs.to_vec())
}

/// Trapezoid accumulation of the dissipation integral and the IQC matrix,
/// one sample at a time.
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    pi: CMatrix,
    w1: f64,
    w2: f64,
    z: CVector,
    a: CVector,
    b: CVector,
    pub j_pi: f64,
    pub j_pi_imag: f64,
    pub iqc: CMatrix,
    /// `int |w1 x + j x'| |w2 x + j x'| dt`.
    pub iqc_scale: f64,
    /// `int |x|^2 + |u|^2 dt`.
    pub energy: f64,
    pub peak: f64,
    pub last: CVector,
}

impl Accumulator {
    pub fn new(n: usize, m: usize, pi: &HermitianMatrix, band: &FrequencyBand) -> Self {
        Self {
            pi: pi.as_matrix().clone(),
            w1: band.lower(),
            w2: band.upper(),
            z: CVector::zeros(n + m),
            a: CVector::zeros(n),
            b: CVector::zeros(n),
            j_pi: 0.0,
            j_pi_imag: 0.0,
            iqc: CMatrix::zeros(n, n),
            iqc_scale: 0.0,
            energy: 0.0,
            peak: 0.0,
            last: CVector::zeros(n),
        }
    }

    pub fn add(&mut self, x: &CVector, u: &CVector, xdot: &CVector, weight: f64) {
        let n = x.len();
        self.z.rows_mut(0, n).copy_from(x);
        self.z.rows_mut(n, u.len()).copy_from(u);
        let q = self.z.dotc(&(&self.pi * &self.z));
        self.j_pi += weight * q.re;
        self.energy += weight * self.z.norm_squared();
        self.j_pi_imag += weight * q.im;
        let j = C64::new(0.0, 1.0);
        for k in 0..n {
            self.a[k] = x[k] * self.w1 + j * xdot[k];
            self.b[k] = x[k] * self.w2 + j * xdot[k];
        }
        self.iqc.gerc(C64::new(weight, 0.0), &self.a, &self.b, C64::new(1.0, 0.0));
        self.iqc_scale += weight * self.a.norm() * self.b.norm();
        self.peak = self.peak.max(x.norm());
        self.last.copy_from(x);
    }

    pub fn iqc_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrize(&self.iqc)
    }

    pub fn terminal_decay(&self) -> f64 {
        if self.peak > 0.0 {
            self.last.norm() / self.peak
        } else {
            0.0
        }
    }
}

/// Values of the dissipation integral and the IQC on one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TdiResult {
    pub j_pi: f64,
    pub iqc_matrix: HermitianMatrix,
    pub iqc_max_eig: f64,
    /// `iqc_max_eig <= slack`.
    pub constraint_satisfied: bool,
    pub slack: f64,
    pub terminal_decay: f64,
    /// `int |x|^2 + |u|^2 dt`.
    pub energy: f64,
    #[serde(with = "crate::model::vector_json")]
    pub terminal_state: CVector,
    pub horizon: f64,
    pub dt: f64,
}

impl TdiResult {
    pub(crate) fn from_accumulator(acc: &Accumulator, slack: f64, horizon: f64, dt: f64) -> Self {
        let iqc_matrix = acc.iqc_matrix();
        let iqc_max_eig = iqc_matrix.max_eigenvalue();
        Self {
            j_pi: acc.j_pi,
            iqc_max_eig,
            constraint_satisfied: iqc_max_eig <= slack,
            iqc_matrix,
            slack,
            terminal_decay: acc.terminal_decay(),
            energy: acc.energy,
            terminal_state: acc.last.clone(),
            horizon,
            dt,
        }
    }

    /// Evaluates a sampled trajectory; the constraint counts as satisfied
    /// when the IQC's largest eigenvalue is at most `tol`.
    pub fn evaluate(
        traj: &Trajectory,
        sys: &StateSpace,
        pi: &HermitianMatrix,
        band: &FrequencyBand,
        tol: f64,
    ) -> Result<Self> {
        check_supply_dims(sys, pi)?;
        let acc = accumulate(traj, pi, band)?;
        Ok(Self::from_accumulator(&acc, tol, traj.horizon(), traj.dt()))
    }
}

fn accumulate(traj: &Trajectory, pi: &HermitianMatrix, band: &FrequencyBand) -> Result<Accumulator> {
    let n = traj.states()[0].len();
    let m = traj.inputs()[0].len();
    if pi.dim() != n + m {
        return Err(Error::dims("Pi", n + m, pi.dim()));
    }
    let mut acc = Accumulator::new(n, m, pi, band);
    for i in 0..=traj.steps() {
        acc.add(&traj.states()[i], &traj.inputs()[i], &traj.derivs()[i], traj.weight(i));
    }
    Ok(acc)
}

/// `int [x; u]^† Pi [x; u] dt` by the trapezoid rule.
pub fn tdi_value(traj: &Trajectory, pi: &HermitianMatrix) -> Result<f64> {
    // The band does not enter the dissipation integral.
    let band = FrequencyBand::new(0.0, 1.0)?;
    let acc = accumulate(traj, pi, &band)?;
    let scale = acc.j_pi.abs().max(1.0);
    if acc.j_pi_imag.abs() > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "dissipation integral has imaginary part {:.3e}",
            acc.j_pi_imag
        )));
    }
    Ok(acc.j_pi)
}

/// `He int (w1 x + j x')(w2 x + j x')^† dt` by the trapezoid rule.
pub fn iqc_value(traj: &Trajectory, band: &FrequencyBand) -> HermitianMatrix {
    let n = traj.states()[0].len();
    let m = traj.inputs()[0].len();
    let pi = HermitianMatrix::zeros(n + m);
    let mut acc = Accumulator::new(n, m, &pi, band);
    for i in 0..=traj.steps() {
        acc.add(&traj.states()[i], &traj.inputs()[i], &traj.derivs()[i], traj.weight(i));
    }
    acc.iqc_matrix()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlownessReport {
    /// `int x' x'^T dt`.
    pub lhs: HermitianMatrix,
    /// `int x x^T dt`.
    pub rhs: HermitianMatrix,
    /// Largest eigenvalue of `lhs - w^2 rhs`.
    pub max_eig: f64,
    pub satisfied: bool,
}

/// Checks `int x' x'^T <= w^2 int x x^T` on a real trajectory.
pub fn slowness_check(traj: &Trajectory, w: f64, tol: f64) -> Result<SlownessReport> {
    if !traj.is_real() {
        return Err(Error::Precondition("slowness check needs a real trajectory".into()));
    }
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::Input(format!("bound must be a non-negative number, got {w}")));
    }
    let n = traj.states()[0].len();
    let mut lhs = CMatrix::zeros(n, n);
    let mut rhs = CMatrix::zeros(n, n);
    for i in 0..=traj.steps() {
        let wt = C64::new(traj.weight(i), 0.0);
        let x = &traj.states()[i];
        let d = &traj.derivs()[i];
        lhs.gerc(wt, d, d, C64::new(1.0, 0.0));
        rhs.gerc(wt, x, x, C64::new(1.0, 0.0));
    }
    let lhs = HermitianMatrix::symmetrize(&lhs);
    let rhs = HermitianMatrix::symmetrize(&rhs);
    let max_eig = lhs.add(&rhs.scale(-w * w))?.max_eigenvalue();
    Ok(SlownessReport {
        lhs,
        rhs,
        max_eig,
        satisfied: max_eig <= tol,
    })
}
