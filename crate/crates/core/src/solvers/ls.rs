use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::numerics::{
    cg_least_squares_from, least_squares_min_norm, lstsq_with_rank, operator_norm_estimate,
    select_rows, LinearMap, ScaledStack,
};
use crate::operators::{AnalysisOperator, MeasurementSystem};

/// Solution of one least-squares subproblem and whether its iterative solver
/// reached tolerance (always true on dense paths).
#[derive(Debug, Clone)]
pub struct LsOutcome {
    pub x: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Default regularization `λ = 1e-6 · ‖M‖² / ‖Ω‖²` (spectral norms by power iteration).
pub fn default_lambda(m: &MeasurementSystem, omega: &AnalysisOperator) -> f64 {
    let nm = operator_norm_estimate(m, 50, 0x5eed);
    let no = operator_norm_estimate(omega, 50, 0x5eed);
    if no == 0.0 || nm == 0.0 {
        1e-6
    } else {
        1e-6 * (nm * nm) / (no * no)
    }
}

fn check_dims(m: &MeasurementSystem, omega: &AnalysisOperator, y: &DVector<f64>) -> Result<()> {
    ensure_dim("analysis operator signal dimension", m.d(), omega.d())?;
    ensure_dim("measurement vector", m.m(), y.len())
}

/// Minimizer of `‖y − Mx‖² + λ‖Ω_active x‖²`.
///
/// Dense inputs are solved as the stacked least-squares problem
/// `[M; √λ Ω_active] x ≈ [y; 0]`; otherwise CGLS runs on the same stack.
pub fn regularized_analysis_ls(
    m: &MeasurementSystem,
    omega_active: &AnalysisOperator,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<LsOutcome> {
    check_dims(m, omega_active, y)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    let d = m.d();
    let p = omega_active.p();
    if let (Some(md), Some(od)) = (m.dense(), omega_active.dense()) {
        let mut stack = DMatrix::zeros(md.nrows() + p, d);
        stack.rows_mut(0, md.nrows()).copy_from(md);
        stack.rows_mut(md.nrows(), p).copy_from(&(od * lambda.sqrt()));
        let mut rhs = DVector::zeros(md.nrows() + p);
        rhs.rows_mut(0, y.len()).copy_from(y);
        return Ok(LsOutcome {
            x: least_squares_min_norm(&stack, &rhs)?,
            converged: true,
            iterations: 0,
        });
    }
    regularized_ls_iterative(m, omega_active, y, lambda, None, 1e-12, 10_000)
}

pub(crate) fn regularized_ls_iterative(
    m: &dyn LinearMap,
    omega: &dyn LinearMap,
    y: &DVector<f64>,
    lambda: f64,
    x0: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<LsOutcome> {
    let stack = ScaledStack::new(vec![(m, 1.0), (omega, lambda.sqrt())]);
    let mut rhs = DVector::zeros(m.out_dim() + omega.out_dim());
    rhs.rows_mut(0, y.len()).copy_from(y);
    let out = cg_least_squares_from(&stack, &rhs, x0, tol, max_iter)?;
    Ok(LsOutcome {
        x: out.x,
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Exact constrained minimizer `argmin ‖Ω_active x‖₂ s.t. Mx = y` through the
/// null-space parametrization `x = M†y + Wα` (dense `M` and `Ω`).
///
/// When `Ω_active W` is rank deficient the minimum-norm `α` is used.
pub fn constrained_analysis_ls(
    m: &MeasurementSystem,
    omega_active: &AnalysisOperator,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(m, omega_active, y)?;
    let w = m
        .null_basis()
        .ok_or_else(|| invalid("exact constrained solve needs a dense measurement system"))?;
    let xp = m.min_norm_solution(y)?;
    if w.ncols() == 0 || omega_active.p() == 0 {
        return Ok(xp);
    }
    let b = omega_active.apply_to_columns(w)?;
    let c = omega_active.apply(&xp)?;
    let alpha = least_squares_min_norm(&b, &(-c))?;
    Ok(xp + w * alpha)
}

/// Same minimizer via the KKT system `[[ΩᵀΩ, Mᵀ], [M, 0]] [x; ν] = [0; y]`,
/// solved in the minimum-norm least-squares sense.
pub fn constrained_analysis_ls_kkt(
    m: &MeasurementSystem,
    omega_active: &AnalysisOperator,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(m, omega_active, y)?;
    let md = m.to_dense()?;
    let od = omega_active.to_dense()?;
    let (mm, d) = md.shape();
    let mut k = DMatrix::zeros(d + mm, d + mm);
    k.view_mut((0, 0), (d, d)).copy_from(&(od.transpose() * &od));
    k.view_mut((0, d), (d, mm)).copy_from(&md.transpose());
    k.view_mut((d, 0), (mm, d)).copy_from(&md);
    let mut rhs = DVector::zeros(d + mm);
    rhs.rows_mut(d, mm).copy_from(y);
    let sol = least_squares_min_norm(&k, &rhs)?;
    Ok(sol.rows(0, d).into_owned())
}

/// Least-squares solution of `[M; Ω_Λ] x ≈ [y; 0]` with a flag for a rank-deficient stack.
pub fn stacked_ls_dense(
    m: &DMatrix<f64>,
    omega_rows: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, bool)> {
    let d = m.ncols();
    if omega_rows.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "stacked system columns",
            expected: d,
            found: omega_rows.ncols(),
        });
    }
    let (mr, orows) = (m.nrows(), omega_rows.nrows());
    let mut stack = DMatrix::zeros(mr + orows, d);
    stack.rows_mut(0, mr).copy_from(m);
    stack.rows_mut(mr, orows).copy_from(omega_rows);
    let mut rhs = DVector::zeros(mr + orows);
    rhs.rows_mut(0, mr).copy_from(y);
    let (x, rank) = lstsq_with_rank(&stack, &rhs)?;
    Ok((x, rank < d))
}

/// Normal equations `G α = r` of a least-squares problem with a fixed block and
/// a set of removable rows, `G = FᵀF + Σ_{i active} a_i a_iᵀ`, `r = Fᵀf + Σ a_i f_i`.
/// Removing a row downdates the Cholesky factor in `O(n²)`; the factor is rebuilt
/// periodically and whenever a downdate loses definiteness.
pub(crate) struct DowndatedNormalSystem {
    rows: DMatrix<f64>,
    rhs_rows: DVector<f64>,
    fixed: Option<(DMatrix<f64>, DVector<f64>)>,
    fixed_gram: Option<DMatrix<f64>>,
    fixed_rhs: DVector<f64>,
    active: Vec<bool>,
    chol: Option<crate::numerics::DowndatableCholesky>,
    r: DVector<f64>,
    since_refactor: usize,
}

const REFACTOR_EVERY: usize = 64;

impl DowndatedNormalSystem {
    pub fn new(rows: DMatrix<f64>, rhs_rows: DVector<f64>, fixed: Option<(&DMatrix<f64>, &DVector<f64>)>) -> Self {
        let n = rows.ncols();
        let (fixed_gram, fixed_rhs) = match fixed {
            Some((f, fr)) => (Some(f.transpose() * f), f.tr_mul(fr)),
            None => (None, DVector::zeros(n)),
        };
        let active = vec![true; rows.nrows()];
        let mut s = Self {
            rows,
            rhs_rows,
            fixed: fixed.map(|(f, fr)| (f.clone(), fr.clone())),
            fixed_gram,
            fixed_rhs,
            active,
            chol: None,
            r: DVector::zeros(n),
            since_refactor: 0,
        };
        s.refactor();
        s
    }

    fn refactor(&mut self) {
        let idx: Vec<usize> = (0..self.active.len()).filter(|&i| self.active[i]).collect();
        let a = select_rows(&self.rows, &idx);
        let mut g = a.transpose() * &a;
        if let Some(f) = &self.fixed_gram {
            g += f;
        }
        let fr = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.rhs_rows[i]));
        self.r = a.tr_mul(&fr) + &self.fixed_rhs;
        self.chol = crate::numerics::DowndatableCholesky::new(g);
        self.since_refactor = 0;
    }

    pub fn remove(&mut self, rows: &[usize]) {
        for &i in rows {
            if !self.active[i] {
                continue;
            }
            self.active[i] = false;
            let row: Vec<f64> = self.rows.row(i).iter().copied().collect();
            let fi = self.rhs_rows[i];
            for (rj, aj) in self.r.iter_mut().zip(&row) {
                *rj -= aj * fi;
            }
            if let Some(ch) = self.chol.as_mut() {
                if !ch.downdate(&row) {
                    self.chol = None;
                }
            }
            self.since_refactor += 1;
        }
        if self.chol.is_none() || self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    /// `α = G⁻¹ r`, or the minimum-norm least-squares solution of the active
    /// stack when `G` is singular.
    pub fn solve(&self) -> Result<DVector<f64>> {
        if let Some(ch) = &self.chol {
            return Ok(ch.solve(&self.r));
        }
        self.solve_direct()
    }

    /// Orthogonal-factorization solve of the active stack, bypassing the normal equations.
    pub fn solve_direct(&self) -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..self.active.len()).filter(|&i| self.active[i]).collect();
        let a = select_rows(&self.rows, &idx);
        let fr = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.rhs_rows[i]));
        match &self.fixed {
            None => least_squares_min_norm(&a, &fr),
            Some((f, fv)) => {
                let (fr_n, ar_n) = (f.nrows(), a.nrows());
                let mut stack = DMatrix::zeros(fr_n + ar_n, a.ncols());
                stack.rows_mut(0, fr_n).copy_from(f);
                stack.rows_mut(fr_n, ar_n).copy_from(&a);
                let mut rhs = DVector::zeros(fr_n + ar_n);
                rhs.rows_mut(0, fr_n).copy_from(fv);
                rhs.rows_mut(fr_n, ar_n).copy_from(&fr);
                least_squares_min_norm(&stack, &rhs)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{gaussian_measurement, random_tight_frame_operator};

    #[test]
    fn empty_analysis_rows_give_inverse() {
        let m = gaussian_measurement(5, 5, 1).unwrap();
        let om = random_tight_frame_operator(7, 5, 2).unwrap().restrict_rows(&[]).unwrap();
        let y = DVector::from_fn(5, |i, _| i as f64 - 1.0);
        let x = regularized_analysis_ls(&m, &om, &y, 1e-3).unwrap().x;
        let direct = m.dense().unwrap().clone().lu().solve(&y).unwrap();
        assert!((x - direct).norm() < 1e-10);
    }

    #[test]
    fn ridge_limit() {
        let m = gaussian_measurement(3, 6, 1).unwrap();
        let id = AnalysisOperator::from_dense(DMatrix::identity(6, 6)).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = regularized_analysis_ls(&m, &id, &y, 1e12).unwrap().x;
        assert!(x.norm() < 1e-9);
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let m = gaussian_measurement(4, 6, 3).unwrap();
        let om = random_tight_frame_operator(8, 6, 4).unwrap();
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let lambda = 0.7;
        let md = m.dense().unwrap();
        let od = om.dense().unwrap();
        let h = md.transpose() * md + od.transpose() * od * lambda;
        let oracle = h.try_inverse().unwrap() * md.transpose() * &y;
        let x = regularized_analysis_ls(&m, &om, &y, lambda).unwrap().x;
        assert!((&x - &oracle).norm() <= 1e-10 * oracle.norm());
        // the iterative path agrees
        let it = regularized_ls_iterative(&m, &om, &y, lambda, None, 1e-14, 1000).unwrap();
        assert!((it.x - oracle).norm() <= 1e-8 * x.norm());
    }

    #[test]
    fn constrained_paths_agree() {
        let m = gaussian_measurement(10, 20, 5).unwrap();
        let om = random_tight_frame_operator(24, 20, 6).unwrap();
        let y = DVector::from_fn(10, |i, _| (i as f64).cos());
        let sub = om.restrict_rows(&(0..15).collect::<Vec<_>>()).unwrap();
        let a = constrained_analysis_ls(&m, &sub, &y).unwrap();
        let b = constrained_analysis_ls_kkt(&m, &sub, &y).unwrap();
        assert!((&a - &b).norm() <= 1e-9 * a.norm());
        assert!((m.apply(&a).unwrap() - &y).norm() <= 1e-10 * y.norm());
    }

    #[test]
    fn lambda_continuity() {
        let m = gaussian_measurement(6, 10, 7).unwrap();
        let om = random_tight_frame_operator(12, 10, 8).unwrap();
        let y = DVector::from_fn(6, |i, _| 1.0 + i as f64);
        let x1 = regularized_analysis_ls(&m, &om, &y, 1e-4).unwrap().x;
        let x2 = regularized_analysis_ls(&m, &om, &y, 5e-5).unwrap().x;
        let exact = constrained_analysis_ls(&m, &om, &y).unwrap();
        assert!((&x1 - &x2).norm() <= 1e-2 * x1.norm());
        assert!((&x2 - &exact).norm() <= (&x1 - &exact).norm());
    }

    #[test]
    fn downdated_system_tracks_direct_solves() {
        let mut rng_rows = crate::operators::gaussian_matrix(30, 6, 11);
        rng_rows.row_mut(0).scale_mut(3.0);
        let f = DVector::from_fn(30, |i, _| (i as f64 * 0.3).sin());
        let mut sys = DowndatedNormalSystem::new(rng_rows.clone(), f.clone(), None);
        let mut removed = Vec::new();
        for step in 0..20 {
            let r = (step * 7) % 30;
            if removed.contains(&r) {
                continue;
            }
            removed.push(r);
            sys.remove(&[r]);
            let keep: Vec<usize> = (0..30).filter(|i| !removed.contains(i)).collect();
            let a = select_rows(&rng_rows, &keep);
            let fr = DVector::from_iterator(keep.len(), keep.iter().map(|&i| f[i]));
            let oracle = least_squares_min_norm(&a, &fr).unwrap();
            assert!((sys.solve().unwrap() - &oracle).norm() <= 1e-9 * oracle.norm().max(1.0));
        }
    }
}
