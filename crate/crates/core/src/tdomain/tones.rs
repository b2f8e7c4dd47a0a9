use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::model::{check_supply_dims, FrequencyBand, HermitianMatrix, StateSpace};
use crate::tdomain::{check_step, Accumulator, TdiResult, STEP_LIMIT};

/// Slowest open-loop decay rate accepted without feedback.
pub const OPEN_LOOP_DECAY: f64 = 0.2;

/// Matrix sign function by scaled Newton iteration; `None` if an
/// eigenvalue sits on the imaginary axis.
fn matrix_sign(m: &CMatrix) -> Option<CMatrix> {
    let mut s = m.clone();
    for _ in 0..100 {
        let inv = s.clone().try_inverse()?;
        let mu = (inv.norm() / s.norm()).sqrt();
        let next = (&s * linalg::c(mu, 0.0) + inv * linalg::c(1.0 / mu, 0.0)) * linalg::c(0.5, 0.0);
        let change = (&next - &s).norm();
        s = next;
        if change <= 1e-13 * s.norm() {
            return linalg::is_finite(&s).then_some(s);
        }
    }
    None
}

/// Bass gain `K = -B^† Z^{-1}` with `(A + beta I) Z + Z (A + beta I)^† = 2 B B^†`,
/// which places every eigenvalue of `A + B K` on `Re = -beta` when
/// `A + beta I` is anti-stable.
fn bass_gain(a: &CMatrix, b: &CMatrix, rate: f64) -> Result<CMatrix> {
    let n = a.nrows();
    let min_re = linalg::eigenvalues(a).iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let beta = rate.max(rate - min_re);
    let shifted = a + CMatrix::identity(n, n) * linalg::c(beta, 0.0);
    let rhs = b * b.adjoint() * linalg::c(2.0, 0.0);
    let z = linalg::lyapunov(&shifted, &rhs)
        .ok_or_else(|| Error::Numerical("gain Lyapunov equation is singular".into()))?;
    let zinv = linalg::hermitian_part(&z)
        .cholesky()
        .ok_or_else(|| Error::Numerical("gain Gramian is not positive definite".into()))?
        .inverse();
    Ok(-(b.adjoint() * zinv))
}

/// State feedback that moves every eigenvalue of `A` with real part above
/// roughly `-rate` to real part `-rate` or below and leaves the others alone.
///
/// The slow modes are separated by the spectral projector from the matrix
/// sign function; the gain acts on the left invariant subspace only, so the
/// fast eigenvalues are kept and the gain stays small.
pub fn stabilizing_gain(sys: &StateSpace, rate: f64) -> Result<CMatrix> {
    let n = sys.states();
    let a = sys.a();
    let re: Vec<f64> = linalg::eigenvalues(a).iter().map(|z| z.re).collect();
    // Split line in [-1.5 rate, -0.5 rate], as far from the spectrum as possible.
    let split = (0..=20)
        .map(|k| -rate * (0.5 + k as f64 / 20.0))
        .max_by(|x, y| {
            let gap = |s: f64| re.iter().map(|r| (r - s).abs()).fold(f64::INFINITY, f64::min);
            gap(*x).total_cmp(&gap(*y))
        })
        .unwrap_or(-rate);
    let slow = re.iter().filter(|r| **r > split).count();
    if slow == 0 {
        return Ok(CMatrix::zeros(sys.inputs(), n));
    }
    let w = if slow == n {
        CMatrix::identity(n, n)
    } else {
        let sign = matrix_sign(&(a - CMatrix::identity(n, n) * linalg::c(split, 0.0)))
            .ok_or_else(|| Error::Numerical("spectral projector did not converge".into()))?;
        let proj = (CMatrix::identity(n, n) + sign) * linalg::c(0.5, 0.0);
        let svd = proj.adjoint().svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Numerical("projector SVD failed".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|i, j| svd.singular_values[*j].total_cmp(&svd.singular_values[*i]));
        CMatrix::from_fn(n, slow, |i, k| u[(i, order[k])])
    };
    let a_slow = w.adjoint() * a * &w;
    let b_slow = w.adjoint() * sys.b();
    Ok(bass_gain(&a_slow, &b_slow, rate)? * w.adjoint())
}

/// Sum of windowed tones. Tone `k` is designed so that the plant input in
/// steady state is `inputs[k] e^{j omegas[k] t}`; the envelope is
/// `sin^2(pi t / window)` on `[0, window]` and zero afterwards.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToneInput {
    pub omegas: Vec<f64>,
    #[serde(with = "vectors_json")]
    pub inputs: Vec<CVector>,
    pub window: f64,
}

mod vectors_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::{CVector, C64};

    pub fn serialize<S: Serializer>(v: &[CVector], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = v.iter().map(|x| x.iter().map(|z| [z.re, z.im]).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVector>, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| CVector::from_iterator(r.len(), r.iter().map(|p| C64::new(p[0], p[1]))))
            .collect())
    }
}

/// Integration settings for [`run_tones`].
#[derive(Debug, Clone)]
pub struct TonePlan {
    pub dt: f64,
    /// Length of the zero-reference tail after the window.
    pub tail: f64,
    /// State feedback `u = r + K x`, if any.
    pub gain: Option<CMatrix>,
    /// Approximate number of rows kept in the trace.
    pub trace_rows: usize,
}

impl TonePlan {
    /// Picks feedback, step and tail for the given tone frequencies: feedback
    /// only when the open loop decays slower than [`OPEN_LOOP_DECAY`],
    /// `dt = step_scale / max(|w|, 1)` capped by the step guard, and a tail
    /// long enough for the state to decay by `1e-6`.
    pub fn for_system(sys: &StateSpace, omegas: &[f64], step_scale: f64) -> Result<Self> {
        let slowest = -sys.spectral_abscissa();
        let (gain, decay) = if slowest > OPEN_LOOP_DECAY {
            (None, slowest)
        } else {
            let k = stabilizing_gain(sys, 1.0)?;
            let decay = -linalg::eigenvalues(&closed_loop(sys, Some(&k)))
                .iter()
                .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re));
            if !(decay > 0.0) {
                return Err(Error::Numerical(format!("feedback left a closed-loop decay of {decay:.3e}")));
            }
            (Some(k), decay)
        };
        let a_cl = closed_loop(sys, gain.as_ref());
        let fastest = omegas.iter().fold(1.0f64, |acc, w| acc.max(w.abs()));
        // The hold is exact for the loop, so the step only has to resolve the
        // tones and the loop modes; the plant keeps the usual guard.
        let radius = linalg::eigenvalues(&a_cl).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let dt = (step_scale / fastest)
            .min(0.999 * STEP_LIMIT / radius.max(linalg::spectral_norm(sys.a())));
        Ok(Self {
            dt,
            tail: (1e6f64).ln() / decay,
            gain,
            trace_rows: 0,
        })
    }

    pub fn halved(&self) -> Self {
        Self {
            dt: 0.5 * self.dt,
            ..self.clone()
        }
    }
}

fn closed_loop(sys: &StateSpace, gain: Option<&CMatrix>) -> CMatrix {
    match gain {
        Some(k) => sys.a() + sys.b() * k,
        None => sys.a().clone(),
    }
}

/// `(t, |x|, |u|, running dissipation integral)`.
pub type TraceRow = [f64; 4];

#[derive(Debug, Clone)]
pub struct ToneRun {
    pub result: TdiResult,
    pub trace: Vec<TraceRow>,
    pub steps: usize,
}

/// Simulates the tone input with first-order hold on the reference and exact
/// discretization of the (possibly closed) loop, accumulating the
/// dissipation integral and the IQC on the fly.
///
/// The slack reported with the result is `int |w1 x + j x'| |w2 x + j x'| dt / T^2`.
pub fn run_tones(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    input: &ToneInput,
    plan: &TonePlan,
) -> Result<ToneRun> {
    check_supply_dims(sys, pi)?;
    let n = sys.states();
    let m = sys.inputs();
    if input.omegas.len() != input.inputs.len() {
        return Err(Error::dims("tone inputs", input.omegas.len(), input.inputs.len()));
    }
    if let Some(bad) = input.inputs.iter().find(|v| v.len() != m) {
        return Err(Error::dims("tone input vector", m, bad.len()));
    }
    if !(input.window > 0.0) {
        return Err(Error::Input("tone window must be positive".into()));
    }
    let a_cl = closed_loop(sys, plan.gain.as_ref());
    let dt = plan.dt;
    check_step(sys.a(), dt)?;

    // Reference amplitudes that produce the requested plant input.
    let mut refs = Vec::with_capacity(input.omegas.len());
    for (w, v) in input.omegas.iter().zip(&input.inputs) {
        let r = match &plan.gain {
            Some(k) => {
                let jw = CMatrix::identity(n, n) * C64::new(0.0, *w) - sys.a();
                let x = jw
                    .lu()
                    .solve(&(sys.b() * v))
                    .ok_or(Error::SingularFrequency { omega: *w })?;
                v - k * x
            }
            None => v.clone(),
        };
        refs.push(r);
    }

    // exp([[A_cl, B, 0], [0, 0, I], [0, 0, 0]] dt): x, r and r' blocks.
    let mut aug = CMatrix::zeros(n + 2 * m, n + 2 * m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&a_cl * linalg::c(dt, 0.0)));
    aug.view_mut((0, n), (n, m)).copy_from(&(sys.b() * linalg::c(dt, 0.0)));
    for i in 0..m {
        aug[(n + i, n + m + i)] = linalg::c(dt, 0.0);
    }
    let e = linalg::expm(&aug);
    let phi = e.view((0, 0), (n, n)).into_owned();
    let g0 = e.view((0, n), (n, m)).into_owned();
    let g1 = e.view((0, n + m), (n, m)).into_owned() * linalg::c(1.0 / dt, 0.0);

    let window = input.window;
    let steps = ((window + plan.tail) / dt).ceil() as usize;
    let reference = |t: f64, out: &mut CVector| {
        out.fill(C64::new(0.0, 0.0));
        if t >= window {
            return;
        }
        let env = (std::f64::consts::PI * t / window).sin().powi(2);
        for (w, r) in input.omegas.iter().zip(&refs) {
            out.axpy(C64::from_polar(env, w * t), r, C64::new(1.0, 0.0));
        }
    };

    let mut acc = Accumulator::new(n, m, pi, band);
    let stride = match steps.checked_div(plan.trace_rows) {
        Some(s) => s.max(1),
        None => usize::MAX
    };
    let mut trace = Vec::new();
    let mut x = CVector::zeros(n);
    let mut next = CVector::zeros(n);
    let mut r = CVector::zeros(m);
    let mut r_next = CVector::zeros(m);
    let mut u = CVector::zeros(m);
    let mut xdot = CVector::zeros(n);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    reference(0.0, &mut r);
    for i in 0..=steps {
        let t = i as f64 * dt;
        u.copy_from(&r);
        if let Some(k) = &plan.gain {
            u.gemv(one, k, &x, one);
        }
        xdot.gemv(one, sys.a(), &x, zero);
        xdot.gemv(one, sys.b(), &u, one);
        let weight = if i == 0 || i == steps { 0.5 * dt } else { dt };
        acc.add(&x, &u, &xdot, weight);
        if i % stride == 0 || (plan.trace_rows > 0 && i == steps) {
            trace.push([t, x.norm(), u.norm(), acc.j_pi]);
        }
        if i == steps {
            break;
        }
        reference(t + dt, &mut r_next);
        next.gemv(one, &phi, &x, zero);
        next.gemv(one, &g0, &r, one);
        // Slope of the reference over the interval.
        r -= &r_next;
        next.gemv(-one, &g1, &r, one);
        std::mem::swap(&mut x, &mut next);
        std::mem::swap(&mut r, &mut r_next);
    }
    let slack = acc.iqc_scale / (window * window);
    Ok(ToneRun {
        result: TdiResult::from_accumulator(&acc, slack, steps as f64 * dt, dt),
        trace,
        steps,
    })
}

/// Equally spaced interior tone frequencies with spacing `band.width() / (count + 1)`.
pub(crate) fn tone_grid(band: &FrequencyBand, count: usize) -> (Vec<f64>, f64) {
    let spacing = band.width() / (count + 1) as f64;
    let omegas = (1..=count).map(|k| band.lower() + spacing * k as f64).collect();
    (omegas, spacing)
}

/// Shortest window that is a multiple of `6 pi / spacing`; tones on a grid
/// of that spacing then have vanishing windowed cross terms.
pub(crate) fn base_window(spacing: f64) -> f64 {
    6.0 * std::f64::consts::PI / spacing
}

/// Random in-band multi-tone: `n + 1` grid frequencies, each with a random
/// complex input direction of random magnitude in `[0.5, 1.5]`.
pub fn in_band_multitone<R: Rng>(sys: &StateSpace, band: &FrequencyBand, rng: &mut R) -> ToneInput {
    let (omegas, spacing) = tone_grid(band, sys.states() + 1);
    let m = sys.inputs();
    let inputs = omegas
        .iter()
        .map(|_| {
            let v = CVector::from_fn(m, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            let scale = rng.gen_range(0.5..1.5) / v.norm().max(f64::MIN_POSITIVE);
            v * C64::new(scale, 0.0)
        })
        .collect();
    ToneInput {
        omegas,
        inputs,
        window: base_window(spacing),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_places_real_parts() {
        let sys = StateSpace::from_real(2, 1, &[0.5, 1.0, 0.0, 0.3], &[0.0, 1.0]).unwrap();
        let k = stabilizing_gain(&sys, 1.0).unwrap();
        let cl = sys.a() + sys.b() * k;
        for z in linalg::eigenvalues(&cl) {
            assert!((z.re + 1.0).abs() < 1e-8, "eigenvalue {z}");
        }
    }

    #[test]
    fn gain_keeps_fast_modes() {
        // Eigenvalues 0.4 and -20: only the unstable one moves.
        let sys = StateSpace::from_real(2, 1, &[0.4, 1.0, 0.0, -20.0], &[1.0, 1.0]).unwrap();
        let k = stabilizing_gain(&sys, 1.0).unwrap();
        let mut re: Vec<f64> = linalg::eigenvalues(&(sys.a() + sys.b() * &k)).iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 20.0).abs() < 1e-8, "{re:?}");
        assert!((re[1] + 1.0).abs() < 1e-8, "{re:?}");
        assert!(linalg::spectral_norm(&k) < 5.0);
    }

    #[test]
    fn single_tone_reaches_steady_state_input() {
        // Unstable scalar plant under feedback still sees u = e^{jwt} in the bulk.
        let sys = StateSpace::from_real(1, 1, &[0.5], &[1.0]).unwrap();
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        let input = ToneInput {
            omegas: vec![1.5],
            inputs: vec![CVector::from_element(1, linalg::c(1.0, 0.0))],
            window: 200.0,
        };
        let mut plan = TonePlan::for_system(&sys, &input.omegas, 0.01).unwrap();
        assert!(plan.gain.is_some());
        plan.trace_rows = 100;
        let pi = HermitianMatrix::from_diagonal(&[0.0, 1.0]);
        let run = run_tones(&sys, &pi, &band, &input, &plan).unwrap();
        // int sin^4 over the window is 3T/8.
        let expected = 3.0 * 200.0 / 8.0;
        assert!((run.result.j_pi - expected).abs() < 1e-2 * expected, "j = {}", run.result.j_pi);
        assert!(run.result.terminal_decay < 1e-3);
        assert!(run.result.iqc_max_eig < 0.0);
        assert!(!run.trace.is_empty());
    }
}
