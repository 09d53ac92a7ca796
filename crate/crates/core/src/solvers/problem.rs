use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine as _;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{GapConfig, L1Config, RecoveryResult, RecoveryStatus};
use crate::error::{ensure_dim, Error, Result};
use crate::io::{f64_from_le_bytes, f64_to_le_bytes, read_vector};
use crate::model::DEFAULT_ZERO_TOL;
use crate::operators::{AnalysisOperator, MeasurementDescriptor, MeasurementSystem, OperatorDescriptor};

/// Measurement vector given inline as base64 of little-endian `f64`, or by file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSource {
    Base64(String),
    Path(PathBuf),
}

impl VectorSource {
    pub fn inline(v: &DVector<f64>) -> Self {
        VectorSource::Base64(base64::engine::general_purpose::STANDARD.encode(f64_to_le_bytes(v.as_slice())))
    }

    pub fn load(&self, base: &Path) -> Result<DVector<f64>> {
        match self {
            VectorSource::Base64(s) => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(s.trim())
                    .map_err(|e| Error::Parse(format!("bad base64 vector: {e}")))?;
                Ok(DVector::from_vec(f64_from_le_bytes(&bytes)?))
            }
            VectorSource::Path(p) => read_vector(&base.join(p)),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}

/// JSON recovery problem.
///
/// ```json
/// {
///   "operator": {"kind": "tight_frame", "p": 240, "d": 200, "seed": 1},
///   "measurement": {"kind": "gaussian", "m": 150, "d": 200, "seed": 2},
///   "y": {"path": "y.f64"},
///   "gap": {"selection_factor": 1.0}
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDescriptor {
    pub operator: OperatorDescriptor,
    pub measurement: MeasurementDescriptor,
    pub y: VectorSource,
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub l1: L1Config,
    /// Apply debiasing after ℓ1.
    #[serde(default = "default_true")]
    pub debias: bool,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
}

impl ProblemDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Builds `(M, Ω, y)`; relative paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<(MeasurementSystem, AnalysisOperator, DVector<f64>)> {
        let m = self.measurement.build(base)?;
        let omega = self.operator.build(base)?;
        let y = self.y.load(base)?;
        ensure_dim("measurement vector", m.m(), y.len())?;
        ensure_dim("analysis operator signal dimension", m.d(), omega.d())?;
        Ok((m, omega, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gap,
    L1,
}

/// JSON result of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub algorithm: Algorithm,
    pub x_hat_path: PathBuf,
    pub cosupport: Vec<usize>,
    pub cosparsity: usize,
    pub status: RecoveryStatus,
    pub iterations: usize,
    pub indeterminate: bool,
    /// `‖M x̂ − y‖₂ / ‖y‖₂`.
    pub relative_residual: f64,
    pub warnings: Vec<String>,
}

impl ResultSummary {
    pub fn new(algorithm: Algorithm, x_hat_path: PathBuf, r: &RecoveryResult, relative_residual: f64) -> Self {
        Self {
            algorithm,
            x_hat_path,
            cosupport: r.estimated_cosupport.indices().to_vec(),
            cosparsity: r.estimated_cosupport.len(),
            status: r.status,
            iterations: r.iterations,
            indeterminate: r.indeterminate,
            relative_residual,
            warnings: r.warnings.clone(),
        }
    }
}

/// Per-iteration CSV: `iteration,eliminated_count,eliminated` with the
/// eliminated row indices space-separated.
pub fn write_trace_csv(path: &Path, trace: &[Vec<usize>]) -> Result<()> {
    let mut s = String::from("iteration,eliminated_count,eliminated\n");
    for (k, rows) in trace.iter().enumerate() {
        let list: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
        writeln!(s, "{},{},{}", k + 1, rows.len(), list.join(" ")).expect("write to String");
    }
    fs::write(path, s)?;
    Ok(())
}
