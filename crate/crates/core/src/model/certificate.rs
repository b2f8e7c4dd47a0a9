use serde::{Deserialize, Serialize};

use crate::model::HermitianMatrix;

/// A `(P, Q)` pair for the generalized KYP inequality together with its
/// recomputed margins.
///
/// `lmi_margin` is the largest eigenvalue of the left-hand side (must be
/// `<= tol`), `q_margin` the smallest eigenvalue of `Q` (must be `>= -tol`).
/// A certificate whose inequality was never evaluated carries
/// `lmi_margin = +inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "P")]
    pub p: HermitianMatrix,
    #[serde(rename = "Q")]
    pub q: HermitianMatrix,
    #[serde(with = "nonfinite")]
    pub lmi_margin: f64,
    pub q_margin: f64,
}

impl Certificate {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.q_margin >= -tol && self.lmi_margin <= tol
    }
}

/// JSON has no infinities; unverified margins are written as `null`.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
