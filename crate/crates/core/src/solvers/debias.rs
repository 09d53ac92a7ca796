use nalgebra::DVector;

use super::ls::{regularized_ls_iterative, stacked_ls_dense};
use super::{MaskedAnalysis, RecoveryResult, RecoveryStatus};
use crate::error::{ensure_dim, Result};
use crate::model::cosupport_of;
use crate::numerics::select_rows;
use crate::operators::{AnalysisOperator, MeasurementSystem};

/// Re-estimates `x` on the cosupport read off `x_raw`: rows with
/// `|(Ω x_raw)_i| ≤ zero_tol·‖x_raw‖` form `Λ̂`, and `x̂` is the least-squares
/// solution of `[M; Ω_Λ̂] x = [y; 0]`.
pub fn debias(
    x_raw: &DVector<f64>,
    omega: &AnalysisOperator,
    m: &MeasurementSystem,
    y: &DVector<f64>,
    zero_tol: f64,
) -> Result<RecoveryResult> {
    debias_with(x_raw, omega, m, y, zero_tol, 1e-13, 20_000)
}

/// [`debias`] with explicit CGLS settings for the matrix-free path.
pub fn debias_with(
    x_raw: &DVector<f64>,
    omega: &AnalysisOperator,
    m: &MeasurementSystem,
    y: &DVector<f64>,
    zero_tol: f64,
    cg_tol: f64,
    cg_max_iter: usize,
) -> Result<RecoveryResult> {
    ensure_dim("debias input", omega.d(), x_raw.len())?;
    ensure_dim("measurement vector", m.m(), y.len())?;
    ensure_dim("analysis operator signal dimension", m.d(), omega.d())?;
    let cos = cosupport_of(omega, x_raw, zero_tol)?;
    let mut warnings = Vec::new();
    let (x_hat, indeterminate) = match (m.dense(), omega.dense()) {
        (Some(md), Some(od)) => stacked_ls_dense(md, &select_rows(od, cos.indices()), y)?,
        _ => {
            let mask = cos.to_mask();
            let q = MaskedAnalysis { op: omega, mask: &mask };
            let out = regularized_ls_iterative(m, &q, y, 1.0, Some(x_raw), cg_tol, cg_max_iter)?;
            if !out.converged {
                warnings.push(format!("CGLS stopped at its cap of {} iterations", out.iterations));
            }
            (out.x, false)
        }
    };
    if indeterminate {
        warnings.push("stacked system is rank deficient; minimum-norm solution returned".into());
    }
    Ok(RecoveryResult {
        x_hat,
        estimated_cosupport: cos,
        iterations: 0,
        status: RecoveryStatus::Converged,
        trace: Vec::new(),
        indeterminate,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_cosparse_signal, DEFAULT_ZERO_TOL};
    use crate::operators::{gaussian_measurement, random_tight_frame_operator};
    use crate::solvers::{analysis_l1_solve_with, L1Config};
    use nalgebra::DMatrix;

    #[test]
    fn cosparse_input_is_a_fixed_point() {
        let om = random_tight_frame_operator(30, 20, 1).unwrap();
        let m = gaussian_measurement(12, 20, 2).unwrap();
        let x0 = generate_cosparse_signal(&om, 16, 3).unwrap().x;
        let y = m.apply(&x0).unwrap();
        let r = debias(&x0, &om, &m, &y, DEFAULT_ZERO_TOL).unwrap();
        assert!(!r.indeterminate);
        assert!((&r.x_hat - &x0).norm() <= 1e-10 * x0.norm());
    }

    #[test]
    fn empty_cosupport_inverts_square_system() {
        let m = gaussian_measurement(4, 4, 5).unwrap();
        let om = AnalysisOperator::from_dense(DMatrix::identity(4, 4)).unwrap();
        let x_raw = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let y = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        let r = debias(&x_raw, &om, &m, &y, DEFAULT_ZERO_TOL).unwrap();
        assert!(r.estimated_cosupport.is_empty());
        let direct = m.dense().unwrap().clone().lu().solve(&y).unwrap();
        assert!((r.x_hat - direct).norm() < 1e-10);
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let m = gaussian_measurement(2, 4, 5).unwrap();
        let om = AnalysisOperator::from_dense(DMatrix::identity(4, 4)).unwrap();
        let x_raw = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let y = DVector::from_vec(vec![0.1, 0.2]);
        let r = debias(&x_raw, &om, &m, &y, DEFAULT_ZERO_TOL).unwrap();
        assert!(r.indeterminate);
    }

    #[test]
    fn l1_then_debias_recovers() {
        let om = random_tight_frame_operator(40, 30, 11).unwrap();
        let m = gaussian_measurement(22, 30, 12).unwrap();
        let x0 = generate_cosparse_signal(&om, 26, 13).unwrap().x;
        let y = m.apply(&x0).unwrap();
        let raw = analysis_l1_solve_with(&m, &y, &om, &L1Config::default()).unwrap();
        let r = debias(&raw.x, &om, &m, &y, DEFAULT_ZERO_TOL).unwrap();
        assert!((&r.x_hat - &x0).norm() <= 1e-6 * x0.norm());
        // matrix-free stacked solve agrees
        let (mf, of) = (m.clone(), om.clone());
        let mask = r.estimated_cosupport.to_mask();
        let q = MaskedAnalysis { op: &of, mask: &mask };
        let it = regularized_ls_iterative(&mf, &q, &y, 1.0, Some(&raw.x), 1e-14, 5000).unwrap();
        assert!((it.x - &x0).norm() <= 1e-6 * x0.norm());
    }
}
