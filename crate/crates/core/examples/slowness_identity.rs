//! For real trajectories and the band `[-w, w]` the matrix IQC is
//! `int x' x'^T - w^2 int x x^T`: a bound on how fast the state moves.

use gkyp::linalg::{self, CVector};
use gkyp::tdomain::{iqc_value, simulate, slowness_check};
use gkyp::{FrequencyBand, StateSpace};

fn main() -> gkyp::Result<()> {
    let sys = StateSpace::from_real(2, 1, &[-0.5, 1.0, -1.0, -0.5], &[0.0, 1.0])?;
    let dt = 1e-3;
    for w0 in [0.5, 3.0] {
        let inputs: Vec<CVector> = (0..40_000)
            .map(|i| {
                let t = i as f64 * dt;
                let env = (std::f64::consts::PI * t / 40.0).sin().powi(2);
                CVector::from_element(1, linalg::c(env * (w0 * t).sin(), 0.0))
            })
            .collect();
        let traj = simulate(&sys, &inputs, dt)?;
        let w = 1.0;
        let slow = slowness_check(&traj, w, 0.0)?;
        let iqc = iqc_value(&traj, &FrequencyBand::symmetric(w)?);
        let form = slow.lhs.add(&slow.rhs.scale(-w * w))?;
        let gap = linalg::max_abs(&(iqc.as_matrix() - form.as_matrix()));
        println!(
            "input at w0 = {w0}: slow {} (max eig {:+.4e}), gap to the IQC {gap:.1e}",
            slow.satisfied, slow.max_eig
        );
    }
    Ok(())
}
