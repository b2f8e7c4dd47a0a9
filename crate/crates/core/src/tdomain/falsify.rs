use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{fdi_value, FdiReport};
use crate::linalg::{CVector, C64};
use crate::model::{check_supply_dims, FrequencyBand, HermitianMatrix, StateSpace};
use crate::tdomain::tones::{base_window, run_tones, ToneInput, TonePlan, TraceRow};
use crate::tdomain::TdiResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FalsifyOptions {
    /// Cap on integration steps for a single attempt.
    pub max_steps: usize,
    /// Smallest FDI violation the falsifier accepts as a precondition.
    pub min_margin: f64,
    /// `dt = step_scale / max(|A_cl|, |w|max, 1)`.
    pub step_scale: f64,
    /// Largest terminal decay accepted for the final trajectory.
    pub max_terminal_decay: f64,
    /// Rows kept in the trace of the final attempt; 0 disables the trace.
    pub trace_rows: usize,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        Self {
            max_steps: 2_000_000,
            min_margin: 1e-4,
            step_scale: 0.01,
            max_terminal_decay: 0.1,
            trace_rows: 0,
        }
    }
}

/// One window length tried by [`falsify_tdi`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attempt {
    pub window: f64,
    pub steps: usize,
    pub j_pi: f64,
    pub iqc_max_eig: f64,
    pub slack: f64,
    pub terminal_decay: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Falsification {
    pub result: TdiResult,
    /// Frequency of the main tone.
    pub omega: f64,
    pub window: f64,
    /// Whether the input was generated through stabilizing state feedback.
    pub feedback: bool,
    pub attempts: Vec<Attempt>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// `-(w - w1)(w - w2) / (width / 2)^2`: 1 at the center, 0 at the edges.
fn depth(band: &FrequencyBand, w: f64) -> f64 {
    let half = 0.5 * band.width();
    -(w - band.lower()) * (w - band.upper()) / (half * half)
}

fn top_eig(sys: &StateSpace, pi: &HermitianMatrix, w: f64) -> Option<(f64, CVector)> {
    let sigma = fdi_value(sys, pi, w).ok()?;
    let (vals, vecs) = sigma.eigh();
    let top = vals.len() - 1;
    Some((vals[top], vecs.column(top).into_owned()))
}

/// Interior frequency maximizing `lambda_max(sigma) * depth`.
fn pick_frequency(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    report: &FdiReport,
) -> Option<(f64, f64, CVector)> {
    let best = report
        .samples
        .iter()
        .filter(|(w, lam)| *lam > 0.0 && band.contains_interior(*w))
        .map(|&(w, lam)| (w, lam * depth(band, w)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((w, _)) = best {
        if let Some((lam, v)) = top_eig(sys, pi, w) {
            if lam > 0.0 {
                return Some((w, lam, v));
            }
        }
    }
    // The violation sits at an edge: walk inwards.
    let mut step = 0.5;
    for _ in 0..60 {
        let w = report.worst_omega + step * (band.center() - report.worst_omega);
        if band.contains_interior(w) {
            if let Some((lam, v)) = top_eig(sys, pi, w) {
                if lam > 0.0 {
                    return Some((w, lam, v));
                }
            }
        }
        step *= 0.5;
    }
    None
}

/// Builds the tone set: the main tone along the top eigenvector and, with
/// amplitude `eta`, `n * m` further tones on a common grid, tone `k` along
/// input direction `k mod m`. Distinct frequencies keep the weak tones
/// incoherent with each other. Returns the input and the grid spacing.
fn design_tones(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    omega: f64,
    lambda: f64,
    dir: CVector,
) -> (ToneInput, f64) {
    let n = sys.states();
    let m = sys.inputs();
    let below = omega - band.lower();
    let above = band.upper() - omega;
    let (room, sign) = if above >= below { (above, 1.0) } else { (below, -1.0) };
    let count = n * m;
    let spacing = room / (count + 1) as f64;
    let mut aux = Vec::new();
    let mut loss = 0.0;
    for k in 0..count {
        let w = omega + sign * spacing * (k + 1) as f64;
        let Ok(sigma) = fdi_value(sys, pi, w) else { continue };
        let i = k % m;
        loss += (-sigma.as_matrix()[(i, i)].re).max(0.0);
        aux.push((w, i));
    }
    let eta2 = if loss > 0.0 { (0.25 * lambda / loss).min(0.25) } else { 0.25 };
    let eta = eta2.sqrt();
    log::debug!("main tone {omega:.4} (lambda {lambda:.3e}), {} weak tones, eta^2 {eta2:.3e}", aux.len());
    let mut omegas = vec![omega];
    let mut inputs = vec![dir];
    for (w, i) in aux {
        let mut e = CVector::zeros(m);
        e[i] = C64::new(eta, 0.0);
        omegas.push(w);
        inputs.push(e);
    }
    let window = base_window(spacing);
    (ToneInput { omegas, inputs, window }, spacing)
}

/// Constructs a trajectory that satisfies the matrix IQC up to a slack
/// shrinking with the window while violating the dissipation inequality.
///
/// The input is a Hann-windowed tone at an interior frequency where
/// `sigma` has a positive eigenvalue, along the corresponding eigenvector,
/// plus weaker tones cycling through the input directions so that the IQC is
/// negative in all state directions. The window is doubled until `j_pi > 0` and
/// `lambda_max(IQC) <= slack`. Unstable plants are driven through a
/// stabilizing state feedback designed to leave the plant input unchanged in
/// steady state.
pub fn falsify_tdi(
    sys: &StateSpace,
    pi: &HermitianMatrix,
    band: &FrequencyBand,
    report: &FdiReport,
    opts: &FalsifyOptions,
) -> Result<Falsification> {
    check_supply_dims(sys, pi)?;
    if report.holds || !(report.worst_eig > opts.min_margin) {
        return Err(Error::Precondition(format!(
            "falsifier needs an FDI violation above {:.1e}, worst eigenvalue is {:.3e}",
            opts.min_margin, report.worst_eig
        )));
    }
    let (omega, lambda, dir) = pick_frequency(sys, pi, band, report)
        .ok_or_else(|| Error::Numerical("no interior frequency with a positive FDI value".into()))?;
    let (mut input, _) = design_tones(sys, pi, band, omega, lambda, dir);
    let mut plan = TonePlan::for_system(sys, &input.omegas, opts.step_scale)?;
    let base = input.window;

    let mut attempts = Vec::new();
    let mut window = base;
    loop {
        input.window = window;
        let steps = ((window + plan.tail) / plan.dt).ceil() as usize;
        if steps > opts.max_steps {
            log::warn!("falsifier stopped at window {window:.3e} after {} attempts", attempts.len());
            return Err(Error::HorizonExhausted { steps });
        }
        plan.trace_rows = opts.trace_rows;
        let run = run_tones(sys, pi, band, &input, &plan)?;
        let r = &run.result;
        log::debug!(
            "window {window:.3e}: j = {:.3e}, iqc = {:.3e}, slack = {:.3e}",
            r.j_pi,
            r.iqc_max_eig,
            r.slack
        );
        attempts.push(Attempt {
            window,
            steps: run.steps,
            j_pi: r.j_pi,
            iqc_max_eig: r.iqc_max_eig,
            slack: r.slack,
            terminal_decay: r.terminal_decay,
        });
        if r.j_pi > 0.0 && r.constraint_satisfied && r.terminal_decay <= opts.max_terminal_decay {
            return Ok(Falsification {
                omega,
                window,
                feedback: plan.gain.is_some(),
                attempts,
                trace: run.trace,
                result: run.result,
            });
        }
        if r.terminal_decay > opts.max_terminal_decay {
            plan.tail *= 2.0;
        }
        window *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::{fdi_check, FdiOptions};

    fn scalar_case(a: f64, gamma2: f64) -> (StateSpace, HermitianMatrix, FrequencyBand) {
        (
            StateSpace::from_real(1, 1, &[a], &[1.0]).unwrap(),
            HermitianMatrix::from_diagonal(&[1.0, -gamma2]),
            FrequencyBand::new(1.0, 2.0).unwrap(),
        )
    }

    #[test]
    fn stable_scalar_instance_is_falsified() {
        let (sys, pi, band) = scalar_case(-1.0, 0.25);
        let report = fdi_check(&sys, &pi, &band, &FdiOptions::default()).unwrap();
        assert!(!report.holds);
        let f = falsify_tdi(&sys, &pi, &band, &report, &FalsifyOptions::default()).unwrap();
        assert!(f.result.j_pi > 0.0);
        assert!(f.result.iqc_max_eig <= f.result.slack);
        assert!(band.contains_interior(f.omega));
        // sigma(w) = 1/(1 + w^2) - 1/4 must be positive at the chosen tone.
        assert!(f.omega < 3f64.sqrt());
        assert!(!f.feedback);
    }

    #[test]
    fn unstable_plant_goes_through_feedback() {
        let (sys, pi, band) = scalar_case(0.5, 0.1);
        let report = fdi_check(&sys, &pi, &band, &FdiOptions::default()).unwrap();
        assert!(!report.holds);
        let f = falsify_tdi(&sys, &pi, &band, &report, &FalsifyOptions::default()).unwrap();
        assert!(f.feedback);
        assert!(f.result.j_pi > 0.0 && f.result.constraint_satisfied);
        assert!(f.result.terminal_decay <= 0.1);
    }

    #[test]
    fn refuses_when_fdi_holds() {
        let (sys, _, band) = scalar_case(-1.0, 0.0);
        let pi = HermitianMatrix::from_diagonal(&[-1.0, -1.0]);
        let report = fdi_check(&sys, &pi, &band, &FdiOptions::default()).unwrap();
        assert!(report.holds);
        let err = falsify_tdi(&sys, &pi, &band, &report, &FalsifyOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn horizon_cap_is_reported() {
        let (sys, pi, band) = scalar_case(-1.0, 0.25);
        let report = fdi_check(&sys, &pi, &band, &FdiOptions::default()).unwrap();
        let opts = FalsifyOptions {
            max_steps: 10,
            ..FalsifyOptions::default()
        };
        let err = falsify_tdi(&sys, &pi, &band, &report, &opts).unwrap_err();
        assert!(matches!(err, Error::HorizonExhausted { .. }));
    }
}
