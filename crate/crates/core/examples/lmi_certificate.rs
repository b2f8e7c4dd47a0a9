//! Band LMI certificate for the scalar family `1 / (s + 1)` on `[1, 2]` and a
//! bisection for the smallest feasible gain, which is `1 / sqrt(2)`.

use gkyp::lmi::{gkyp_feasible, left_side, GkypOptions};
use gkyp::{FrequencyBand, HermitianMatrix, StateSpace};

fn main() -> gkyp::Result<()> {
    let sys = StateSpace::from_real(1, 1, &[-1.0], &[1.0])?;
    let band = FrequencyBand::new(1.0, 2.0)?;
    let opts = GkypOptions::default();
    let supply = |gamma: f64| HermitianMatrix::from_diagonal(&[1.0, -gamma * gamma]);

    let pi = supply(0.8);
    let out = gkyp_feasible(&sys, &pi, &band, &opts)?;
    println!("gamma 0.8: {:?}, t_star {:.4e}", out.status(), out.outcome.t_star);
    if let Some(cert) = &out.certificate {
        println!("P = {:.6}", cert.p.as_matrix()[(0, 0)].re);
        println!("Q = {:.6}", cert.q.as_matrix()[(0, 0)].re);
        let lhs = left_side(&sys, &pi, &band, &cert.p, &cert.q)?;
        println!("largest eigenvalue of the left side: {:.3e}", lhs.max_eigenvalue());
    }

    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if gkyp_feasible(&sys, &supply(mid), &band, &opts)?.status().is_feasible() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    println!("smallest feasible gamma {hi:.6} (1/sqrt 2 = {:.6})", 0.5f64.sqrt());
    Ok(())
}
