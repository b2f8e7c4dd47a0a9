use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HermitianMatrix, MatrixJson, SCHEMA_VERSION};
use crate::sproc::{
    falsify_statement_a, find_certificate, CertificateOptions, FalsifyOptions, QuadraticMap,
    SprocCertificate, StatementAWitness,
};

/// Constraint map in JSON: `output_dim` and its `output_dim^2` kernels,
/// row-major over the output entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapJson {
    pub output_dim: usize,
    pub kernels: Vec<MatrixJson>,
}

/// `{"F": matrix, "constraints": [...], "regular": bool}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SprocProblem {
    #[serde(rename = "F")]
    pub f: HermitianMatrix,
    #[serde(default)]
    pub constraints: Vec<MapJson>,
    #[serde(default = "default_regular")]
    pub regular: bool,
}

fn default_regular() -> bool {
    true
}

impl SprocProblem {
    pub fn maps(&self) -> Result<(QuadraticMap, Vec<QuadraticMap>)> {
        let f = QuadraticMap::scalar(&self.f);
        let mut out = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let kernels = c.kernels.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
            let g = QuadraticMap::new(self.f.dim(), c.output_dim, kernels)?;
            out.push(g);
        }
        Ok((f, out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SprocVerdict {
    /// A statement-(B) certificate was found.
    Certified,
    /// A statement-(A) witness was found.
    Falsified,
    /// Neither; the S-procedure may be lossy here.
    Undecided,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SprocReport {
    pub schema_version: String,
    pub verdict: SprocVerdict,
    pub certificate: Option<SprocCertificate>,
    pub witness: Option<StatementAWitness>,
}

impl SprocReport {
    pub fn solve(
        problem: &SprocProblem,
        cert_opts: &CertificateOptions,
        falsify_opts: &FalsifyOptions,
    ) -> Result<Self> {
        let (f, gs) = problem.maps()?;
        if problem.constraints.iter().any(|c| c.output_dim == 0) {
            return Err(Error::Input("constraint output_dim must be positive".into()));
        }
        let certificate = find_certificate(&f, &gs, problem.regular, cert_opts)?;
        let witness = if certificate.is_some() {
            None
        } else {
            falsify_statement_a(&f, &gs, falsify_opts)?
        };
        let verdict = match (&certificate, &witness) {
            (Some(_), _) => SprocVerdict::Certified,
            (None, Some(_)) => SprocVerdict::Falsified,
            (None, None) => SprocVerdict::Undecided,
        };
        Ok(Self {
            schema_version: SCHEMA_VERSION.into(),
            verdict,
            certificate,
            witness,
        })
    }
}
