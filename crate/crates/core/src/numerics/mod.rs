//! Dense and matrix-free linear algebra substrate.
//!
//! Dense matrices are `nalgebra::DMatrix<f64>`; every entry point checks that its
//! inputs are finite. Rank decisions use a single relative tolerance
//! [`RANK_RTOL`] against the largest singular value (or the largest pivot for
//! the pivoted QR).

mod cg;
mod cholesky;
mod dense;
mod linear_map;
mod qr;

pub use cg::{cg_least_squares, cg_least_squares_from, CgOutcome};
pub use cholesky::DowndatableCholesky;
pub use dense::{
    least_squares_min_norm, lstsq_with_rank, numerical_rank, op_norm_1_1, op_norm_inf_inf,
    pseudo_inverse, singular_values, thin_svd, ThinSvd,
};
pub use linear_map::{adjoint_mismatch, operator_norm_estimate, LinearMap, ScaledStack};
pub use qr::{null_space_basis, null_space_of, PivotedQr};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_RTOL: f64 = 1e-12;

pub(crate) fn ensure_finite_matrix(context: &'static str, a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

pub(crate) fn ensure_finite_vector(context: &'static str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// Largest absolute entry, 0 for an empty matrix.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `‖v‖_∞`, 0 for an empty vector.
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Builds a matrix from the rows of `a` listed in `rows`, in that order.
pub fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Builds a vector from the entries of `v` listed in `idx`.
pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}
