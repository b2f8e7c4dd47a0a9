//! Builds a trajectory that satisfies the band IQC and violates the
//! dissipation inequality, starting from a failed frequency sweep.

use gkyp::freq::{fdi_check, FdiOptions};
use gkyp::tdomain::{falsify_tdi, FalsifyOptions};
use gkyp::{FrequencyBand, HermitianMatrix, StateSpace};

fn main() -> gkyp::Result<()> {
    env_logger::init();
    // Unstable plant: the tones run through a stabilizing feedback.
    let sys = StateSpace::from_real(2, 1, &[0.3, 1.0, -2.0, 0.1], &[0.0, 1.0])?;
    let pi = HermitianMatrix::from_diagonal(&[1.0, 0.0, -0.05]);
    let band = FrequencyBand::new(1.0, 2.0)?;
    let report = fdi_check(&sys, &pi, &band, &FdiOptions::default())?;
    println!("sweep: holds {}, worst {:+.4e} at w = {:.4}", report.holds, report.worst_eig, report.worst_omega);

    let f = falsify_tdi(&sys, &pi, &band, &report, &FalsifyOptions::default())?;
    for a in &f.attempts {
        println!(
            "window {:9.2}: j_pi {:+.4e}, iqc max eig {:+.3e} (slack {:.1e}), decay {:.1e}",
            a.window, a.j_pi, a.iqc_max_eig, a.slack, a.terminal_decay
        );
    }
    println!("main tone w = {:.4}, feedback {}", f.omega, f.feedback);
    Ok(())
}
