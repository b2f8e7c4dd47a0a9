//! Domain types shared by all routes and their JSON file forms.

mod band;
mod certificate;
mod matrix;
mod system;
mod trajectory;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use band::{BandJson, FrequencyBand};
pub use certificate::Certificate;
pub use matrix::{ComplexMatrix, HermitianMatrix, MatrixJson, HERMITIAN_REL_TOL};
pub use system::{StateSpace, CONTROLLABILITY_REL_TOL};
pub use trajectory::Trajectory;

use crate::error::{Error, Result};
use crate::linalg::RMatrix;

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: &str = "1.0";

/// `{"Pi": matrix}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyRate {
    #[serde(rename = "Pi")]
    pub pi: HermitianMatrix,
}

/// Real symmetric embedding of a Hermitian matrix.
pub fn realify(h: &HermitianMatrix) -> RMatrix {
    h.realify()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Checks that `Pi` has dimension `n + m` for the given system.
pub fn check_supply_dims(sys: &StateSpace, pi: &HermitianMatrix) -> Result<()> {
    let expected = sys.states() + sys.inputs();
    if pi.dim() != expected {
        return Err(Error::dims("Pi", expected, pi.dim()));
    }
    Ok(())
}

/// True when `A`, `B` and `Pi` are all real.
pub fn is_real_data(sys: &StateSpace, pi: &HermitianMatrix) -> bool {
    sys.is_real() && pi.is_real()
}

/// Serde form of a complex vector as `[[re, im], ...]`.
pub mod vector_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::{CVector, C64};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_iterator(pairs.len(), pairs.iter().map(|p| C64::new(p[0], p[1]))))
    }
}
