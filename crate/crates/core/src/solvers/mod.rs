//! Cosparse pursuits: greedy analysis pursuit (GAP), analysis ℓ1 minimization,
//! the shared least-squares subproblems and debiasing.

mod debias;
mod gap;
mod l1;
mod ls;
mod problem;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::Cosupport;
use crate::numerics::LinearMap;
use crate::operators::AnalysisOperator;

pub use debias::{debias, debias_with};
pub use gap::{gap_solve, GapConfig, LsMode};
pub use l1::{analysis_l1_solve, analysis_l1_solve_with, L1Config, L1Outcome};
pub use ls::{
    constrained_analysis_ls, constrained_analysis_ls_kkt, default_lambda, regularized_analysis_ls,
    stacked_ls_dense, LsOutcome,
};
pub use problem::{
    write_trace_csv, Algorithm, ProblemDescriptor, ResultSummary, VectorSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryStatus {
    Converged,
    MaxIter,
    StaticStop,
}

impl RecoveryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecoveryStatus::Converged => "converged",
            RecoveryStatus::MaxIter => "max-iter",
            RecoveryStatus::StaticStop => "static-stop",
        }
    }
}

/// Estimate returned by a pursuit.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub x_hat: DVector<f64>,
    pub estimated_cosupport: Cosupport,
    pub iterations: usize,
    pub status: RecoveryStatus,
    /// Row indices eliminated at each iteration; `trace.len() == iterations`.
    pub trace: Vec<Vec<usize>>,
    /// Set when the final stacked system was rank deficient and a minimum-norm
    /// solution was returned.
    pub indeterminate: bool,
    /// Non-fatal solver conditions, such as an inner CG run hitting its cap.
    pub warnings: Vec<String>,
}

/// `Ω` with rows outside a mask zeroed: `‖masked(x)‖ = ‖Ω_Λ x‖`.
pub(crate) struct MaskedAnalysis<'a> {
    pub op: &'a AnalysisOperator,
    pub mask: &'a [bool],
}

impl LinearMap for MaskedAnalysis<'_> {
    fn in_dim(&self) -> usize {
        self.op.d()
    }
    fn out_dim(&self) -> usize {
        self.op.p()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut a = LinearMap::apply(self.op, x);
        for (v, &keep) in a.iter_mut().zip(self.mask) {
            if !keep {
                *v = 0.0;
            }
        }
        a
    }
    fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut z = y.clone();
        for (v, &keep) in z.iter_mut().zip(self.mask) {
            if !keep {
                *v = 0.0;
            }
        }
        LinearMap::apply_adjoint(self.op, &z)
    }
}

pub(crate) fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    let n = new.norm();
    let diff = (new - old).norm();
    if n == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / n
    }
}
