//! Frequency sweep of `G(jw)^* Pi G(jw)` for a lightly damped resonator
//! whose peak sits inside or outside the band.

use gkyp::freq::{fdi_check, FdiOptions};
use gkyp::{FrequencyBand, HermitianMatrix, StateSpace};

fn main() -> gkyp::Result<()> {
    // x'' + 0.2 x' + 4 x = u, resonance near w = 2.
    let sys = StateSpace::from_real(2, 1, &[0.0, 1.0, -4.0, -0.2], &[0.0, 1.0])?;
    // |x|^2 <= gamma^2 |u|^2 on the band.
    let pi = HermitianMatrix::from_diagonal(&[1.0, 0.0, -0.5]);
    for (w1, w2) in [(0.0, 1.0), (1.5, 2.5), (3.0, 6.0)] {
        let band = FrequencyBand::new(w1, w2)?;
        let report = fdi_check(&sys, &pi, &band, &FdiOptions::default())?;
        println!(
            "band [{w1}, {w2}]: holds {}, worst lambda {:+.4e} at w = {:.4}, {} samples",
            report.holds,
            report.worst_eig,
            report.worst_omega,
            report.samples.len()
        );
    }
    Ok(())
}
