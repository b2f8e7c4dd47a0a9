//! Conic S-procedure: a certificate for a scalar pair, and a real triple
//! where the constrained inequality holds but no multipliers exist.

use gkyp::linalg;
use gkyp::sproc::{falsify_statement_a, find_certificate, CertificateOptions, FalsifyOptions, QuadraticMap};
use gkyp::HermitianMatrix;
use nalgebra::DMatrix;

fn form(rows: &[f64]) -> QuadraticMap {
    let d = (rows.len() as f64).sqrt() as usize;
    let m = DMatrix::from_row_slice(d, d, rows);
    QuadraticMap::scalar(&HermitianMatrix::new(linalg::to_complex(&m)).unwrap())
}

fn main() -> gkyp::Result<()> {
    let cert_opts = CertificateOptions::default();
    let search = FalsifyOptions::default();

    // x1^2 - x2^2 >= 0 whenever x1^2 - 2 x2^2 >= 0.
    let f = form(&[1.0, 0.0, 0.0, -1.0]);
    let g = vec![form(&[1.0, 0.0, 0.0, -2.0])];
    match find_certificate(&f, &g, true, &cert_opts)? {
        Some(c) => println!("pair: tau0 {:.3}, tau1 {:.4}, margin {:.3e}", c.tau0, c.multipliers[0].trace(), c.margin),
        None => println!("pair: no certificate"),
    }

    // F = (0.1 x1 + x2)(x1 - 0.9 x2) on the sector x1 x2 >= 0, x1^2 >= x2^2.
    let f = form(&[0.1, 0.455, 0.455, -0.9]);
    let g = vec![form(&[0.0, 0.5, 0.5, 0.0]), form(&[1.0, 0.0, 0.0, -1.0])];
    let cert = find_certificate(&f, &g, false, &cert_opts)?;
    let witness = falsify_statement_a(&f, &g, &search)?;
    println!(
        "triple: certificate {}, witness {}",
        if cert.is_some() { "found" } else { "none" },
        match &witness {
            Some(w) => format!("objective {:.3e}", w.objective),
            None => "none".into(),
        }
    );
    Ok(())
}
