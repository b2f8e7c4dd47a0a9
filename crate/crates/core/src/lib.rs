//! Decision procedures for finite-frequency frequency-domain inequalities.
//!
//! A frequency-domain inequality (FDI) over a band `[w1, w2]` is checked three
//! independent ways, and the routes are cross-validated against each other:
//!
//! * [`freq`] samples `G(jw)^* Pi G(jw)` over the band and refines local maxima.
//! * [`lmi`] assembles the generalized KYP matrix inequality in the unknowns
//!   `(P, Q)` and hands it to the dense phase-I solver in [`sdp`].
//! * [`tdomain`] simulates trajectories and evaluates the dissipation integral
//!   together with the matrix integral quadratic constraint that encodes the band.
//!
//! [`sproc`] holds the conic S-procedure machinery (matrix multipliers,
//! falsifiers, shift-invariant integral operators) and [`harness`] runs the
//! randomized equivalence suite.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod freq;
pub mod harness;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod sdp;
pub mod sproc;
pub mod tdomain;

pub use error::{Error, Result};
pub use model::{
    Certificate, ComplexMatrix, FrequencyBand, HermitianMatrix, StateSpace, Trajectory,
};
