//! The whole-axis KYP inequality against its band-limited version: a gain
//! bound that fails at low frequency can still hold on `[1, 2]`.

use gkyp::freq::{fdi_check, FdiOptions};
use gkyp::lmi::{classical_kyp, gkyp_feasible, GkypOptions};
use gkyp::{FrequencyBand, HermitianMatrix, StateSpace};

fn main() -> gkyp::Result<()> {
    let sys = StateSpace::from_real(1, 1, &[-1.0], &[1.0])?;
    let pi = HermitianMatrix::from_diagonal(&[1.0, -0.6]);
    let opts = GkypOptions::default();

    let whole = classical_kyp(&sys, &pi, &opts)?;
    println!("whole axis: {:?} (|G(0)|^2 = 1 > 0.6)", whole.status());

    let band = FrequencyBand::new(1.0, 2.0)?;
    let banded = gkyp_feasible(&sys, &pi, &band, &opts)?;
    let fdi = fdi_check(&sys, &pi, &band, &FdiOptions::default())?;
    println!(
        "band [1, 2]: {:?}, sweep holds {} (worst {:+.4e} at w = {:.3})",
        banded.status(),
        fdi.holds,
        fdi.worst_eig,
        fdi.worst_omega
    );
    Ok(())
}
