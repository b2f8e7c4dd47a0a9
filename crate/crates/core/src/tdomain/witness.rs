use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::model::{FrequencyBand, HermitianMatrix, StateSpace, Trajectory};
use crate::tdomain::tones::{stabilizing_gain, OPEN_LOOP_DECAY};
use crate::tdomain::{check_step, iqc_value};

/// Cap on samples of one witness candidate.
const MAX_STEPS: usize = 4_000_000;

/// A trajectory from rest whose matrix IQC is negative definite.
#[derive(Debug, Clone)]
pub struct RegularityWitness {
    pub trajectory: Trajectory,
    pub iqc_matrix: HermitianMatrix,
    /// `-lambda_max` of the IQC.
    pub delta: f64,
    /// Largest relative mismatch between the closed-form derivative and `A x + B u`.
    pub residual: f64,
    /// Exponents `s_k` of the decaying modes.
    pub exponents: Vec<C64>,
}

/// `(sI - A)^{-1} B v`, or `SingularShift`.
fn resolvent(sys: &StateSpace, s: C64, v: &CVector) -> Result<CVector> {
    let n = sys.states();
    let shifted = CMatrix::identity(n, n) * s - sys.a();
    let scale = linalg::spectral_norm(sys.a()).max(1.0);
    let smallest = linalg::singular_values(&shifted).last().copied().unwrap_or(0.0);
    if smallest <= 1e-10 * scale {
        return Err(Error::SingularShift { shift: format!("{s}") });
    }
    shifted
        .lu()
        .solve(&(sys.b() * v))
        .ok_or_else(|| Error::SingularShift { shift: format!("{s}") })
}

/// The free response `x = -(A + mu I)^{-1} B v e^{-mu t}`, `u = v e^{-mu t}`.
///
/// It starts away from rest, and its IQC integrand is `(w1 w2 + mu^2) x x^†`,
/// which is negative only when `mu^2 < -w1 w2`.
pub fn decaying_exponential(
    sys: &StateSpace,
    mu: f64,
    v: &CVector,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    if v.len() != sys.inputs() {
        return Err(Error::dims("input direction", sys.inputs(), v.len()));
    }
    let x0 = resolvent(sys, C64::new(-mu, 0.0), v)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let e = C64::new((-mu * i as f64 * dt).exp(), 0.0);
        states.push(&x0 * e);
        inputs.push(v * e);
    }
    Trajectory::with_initial_state(sys, dt, states, inputs)
}

/// Frequencies `mu, mu + d, mu - d, mu + 2d, ...` packed inside the band.
fn frequencies(band: &FrequencyBand, mu: f64, count: usize) -> Vec<f64> {
    let room = (mu - band.lower()).min(band.upper() - mu);
    let d = room / count as f64;
    (0..count)
        .map(|k| {
            let step = k.div_ceil(2) as f64;
            if k % 2 == 1 {
                mu + step * d
            } else {
                mu - step * d
            }
        })
        .collect()
}

/// Builds a trajectory from rest, in `L2`, whose IQC is negative definite.
///
/// The trajectory is a sum of decaying modes `x_k e^{s_k t}` with
/// `s_k = -rho_k + j mu_k`, `mu_k` interior, `x_k = (s_k I - A)^{-1} B e_i`,
/// `n` frequencies per input direction; each mode alone has IQC integrand
/// `((w1 - mu_k)(w2 - mu_k) + rho_k^2) x x^†`, negative for
/// `rho_k^2 < (mu_k - w1)(w2 - mu_k)`. The initial state is cancelled by a
/// free response of the (stabilized) plant. Modes start one after another so
/// that their cross terms are negligible; decay rates are halved if the
/// corrections still spoil definiteness.
pub fn regularity_witness(sys: &StateSpace, band: &FrequencyBand, mu: f64) -> Result<RegularityWitness> {
    if !(mu > 0.0) {
        return Err(Error::Precondition(format!("mu must be positive, got {mu}")));
    }
    if !band.contains_interior(mu) {
        return Err(Error::Precondition(format!(
            "mu = {mu} is not inside ({}, {})",
            band.lower(),
            band.upper()
        )));
    }
    let n = sys.states();
    let m = sys.inputs();
    let gain = if -sys.spectral_abscissa() > OPEN_LOOP_DECAY {
        None
    } else {
        Some(stabilizing_gain(sys, 1.0)?)
    };
    let a_cl = match &gain {
        Some(k) => sys.a() + sys.b() * k,
        None => sys.a().clone(),
    };
    let decay = -linalg::eigenvalues(&a_cl)
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re));

    let omegas = frequencies(band, mu, n * m);
    let mut factor = 0.5;
    let mut last_delta = f64::NEG_INFINITY;
    for _ in 0..12 {
        let exponents: Vec<C64> = omegas
            .iter()
            .map(|&w| {
                let rho = factor * ((w - band.lower()) * (band.upper() - w)).sqrt();
                C64::new(-rho, w)
            })
            .collect();
        let mut modes = Vec::with_capacity(exponents.len());
        for (k, s) in exponents.iter().enumerate() {
            let mut e = CVector::zeros(m);
            e[k % m] = C64::new(1.0, 0.0);
            let x = resolvent(sys, *s, &e)?;
            // Unit state amplitude per mode.
            let scale = C64::new(1.0 / x.norm().max(f64::MIN_POSITIVE), 0.0);
            modes.push((*s, x * scale, e * scale));
        }
        let slowest = exponents.iter().map(|s| -s.re).fold(f64::INFINITY, f64::min);
        let fastest = omegas.iter().fold(1.0f64, |acc, w| acc.max(w.abs()));
        // Samples are exact; the step only sets the quadrature accuracy.
        let dt = 0.05 / linalg::spectral_norm(&a_cl).max(fastest);
        check_step(sys.a(), dt)?;
        // Each mode starts once the previous ones have decayed by 1e-4.
        let spacing = ((1e4f64).ln() / slowest.min(decay) / dt).ceil() as usize;
        let starts: Vec<usize> = (0..modes.len()).map(|k| k * spacing).collect();
        let horizon = (1e8f64).ln() / slowest.min(decay);
        let steps = starts.last().copied().unwrap_or(0) + (horizon / dt).ceil() as usize;
        if steps > MAX_STEPS {
            return Err(Error::HorizonExhausted { steps });
        }

        let phi = linalg::expm(&(&a_cl * C64::new(dt, 0.0)));
        let mut h = CVector::zeros(n);
        let mut states = Vec::with_capacity(steps + 1);
        let mut inputs = Vec::with_capacity(steps + 1);
        let mut residual: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for i in 0..=steps {
            let mut x = CVector::zeros(n);
            let mut xdot = CVector::zeros(n);
            let mut u = CVector::zeros(m);
            for ((s, xk, ek), &start) in modes.iter().zip(&starts) {
                if i < start {
                    break;
                }
                if i == start {
                    h += xk;
                }
                let e = (s * ((i - start) as f64 * dt)).exp();
                x.axpy(e, xk, C64::new(1.0, 0.0));
                xdot.axpy(s * e, xk, C64::new(1.0, 0.0));
                u.axpy(e, ek, C64::new(1.0, 0.0));
            }
            x -= &h;
            xdot -= &a_cl * &h;
            if let Some(k) = &gain {
                u -= k * &h;
            }
            if i == 0 {
                x.fill(C64::new(0.0, 0.0));
            }
            let model = sys.a() * &x + sys.b() * &u;
            residual = residual.max((&model - &xdot).norm());
            peak = peak.max(xdot.norm());
            states.push(x);
            inputs.push(u);
            h = &phi * h;
        }
        let trajectory = Trajectory::from_samples(sys, dt, states, inputs)?;
        let iqc_matrix = iqc_value(&trajectory, band);
        let delta = -iqc_matrix.max_eigenvalue();
        let residual = residual / peak.max(1.0);
        if delta > 0.0 {
            return Ok(RegularityWitness {
                trajectory,
                iqc_matrix,
                delta,
                residual,
                exponents,
            });
        }
        last_delta = delta;
        factor *= 0.5;
    }
    Err(Error::Numerical(format!(
        "no strictly interior witness found, last margin {last_delta:.3e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_exponential_matches_closed_form() {
        let sys = StateSpace::from_real(1, 1, &[-1.0], &[1.0]).unwrap();
        let v = CVector::from_element(1, C64::new(1.0, 0.0));
        let traj = decaying_exponential(&sys, 1.5, &v, 0.01, 200).unwrap();
        for (i, x) in traj.states().iter().enumerate() {
            let exact = -2.0 * (-1.5 * i as f64 * 0.01).exp();
            assert!((x[0].re - exact).abs() < 1e-14);
            // x' = -1.5 x must agree with A x + B u.
            assert!((traj.derivs()[i][0].re + 1.5 * x[0].re).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_shift_is_reported() {
        let sys = StateSpace::from_real(1, 1, &[-1.5], &[1.0]).unwrap();
        let v = CVector::from_element(1, C64::new(1.0, 0.0));
        assert!(matches!(
            decaying_exponential(&sys, 1.5, &v, 0.01, 10),
            Err(Error::SingularShift { .. })
        ));
    }

    #[test]
    fn scalar_witness_is_interior() {
        let sys = StateSpace::from_real(1, 1, &[-1.0], &[1.0]).unwrap();
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        let w = regularity_witness(&sys, &band, 1.5).unwrap();
        assert!(w.delta > 0.0);
        assert!(w.residual < 1e-8);
        assert!(w.trajectory.terminal_decay() < 1e-3);
    }

    #[test]
    fn edge_frequency_is_refused() {
        let sys = StateSpace::from_real(1, 1, &[-1.0], &[1.0]).unwrap();
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        assert!(matches!(regularity_witness(&sys, &band, 2.0), Err(Error::Precondition(_))));
        assert!(matches!(regularity_witness(&sys, &band, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn multi_input_unstable_witness() {
        let sys = StateSpace::from_real(3, 2, &[0.3, 1.0, 0.0, -1.0, 0.2, 0.5, 0.0, 0.0, 0.1], &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])
            .unwrap();
        let band = FrequencyBand::new(-0.5, 2.0).unwrap();
        let w = regularity_witness(&sys, &band, 0.7).unwrap();
        assert!(w.delta > 0.0);
        assert!(w.residual < 1e-8);
        assert!(w.iqc_matrix.eigenvalues().iter().all(|l| *l < 0.0));
    }
}
