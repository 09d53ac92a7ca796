use nalgebra::DVector;

use super::LinearMap;
use crate::error::{ensure_dim, Result};

/// Outcome of a conjugate-gradient least-squares run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// `‖Aᵀ(Ax − b)‖₂` at the returned iterate.
    pub normal_residual: f64,
    /// False when `max_iter` was exhausted before reaching the tolerance; `x`
    /// is then the iterate with the smallest normal residual seen.
    pub converged: bool,
}

/// CGLS: conjugate gradients on `AᵀA x = Aᵀb` without forming `AᵀA`.
///
/// Stops once `‖Aᵀ(Ax − b)‖₂ ≤ tol · ‖Aᵀb‖₂`.
pub fn cg_least_squares(
    a: &dyn LinearMap,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    cg_least_squares_from(a, b, None, tol, max_iter)
}

/// CGLS with an optional warm start.
pub fn cg_least_squares_from(
    a: &dyn LinearMap,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    ensure_dim("cg_least_squares right-hand side", a.out_dim(), b.len())?;
    let n = a.in_dim();
    let target = tol * a.apply_adjoint(b).norm();

    let mut x = match x0 {
        Some(x0) => {
            ensure_dim("cg_least_squares initial guess", n, x0.len())?;
            x0.clone()
        }
        None => DVector::zeros(n),
    };
    let mut r = b - a.apply(&x);
    let mut s = a.apply_adjoint(&r);
    let mut p = s.clone();
    let mut gamma = s.norm_squared();

    let mut best_x = x.clone();
    let mut best_res = gamma.sqrt();
    if best_res <= target {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            normal_residual: best_res,
            converged: true,
        });
    }

    for it in 1..=max_iter {
        let q = a.apply(&p);
        let qq = q.norm_squared();
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        s = a.apply_adjoint(&r);
        let gamma_new = s.norm_squared();
        let res = gamma_new.sqrt();
        if res < best_res {
            best_res = res;
            best_x.copy_from(&x);
        }
        if res <= target {
            return Ok(CgOutcome {
                x,
                iterations: it,
                normal_residual: res,
                converged: true,
            });
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p *= beta;
        p += &s;
    }

    Ok(CgOutcome {
        x: best_x,
        iterations: max_iter,
        normal_residual: best_res,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::least_squares_min_norm;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_returns_rhs() {
        let a = DMatrix::<f64>::identity(5, 5);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 0.0]);
        let out = cg_least_squares(&a, &b, 1e-12, 10).unwrap();
        assert!(out.converged);
        assert!((out.x - b).norm() < 1e-12);
    }

    #[test]
    fn dense_oracle_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(20, 10, |_, _| StandardNormal.sample(&mut rng));
        let b = DVector::from_fn(20, |_, _| StandardNormal.sample(&mut rng));
        let out = cg_least_squares(&a, &b, 1e-12, 200).unwrap();
        let oracle = least_squares_min_norm(&a, &b).unwrap();
        assert!((out.x - &oracle).norm() <= 1e-6 * oracle.norm());
    }

    #[test]
    fn consistent_system_recovers_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = DMatrix::from_fn(30, 12, |_, _| StandardNormal.sample(&mut rng));
        let x_star = DVector::from_fn(12, |i, _| (i as f64).sin());
        let out = cg_least_squares(&a, &(&a * &x_star), 1e-12, 500).unwrap();
        assert!((out.x - &x_star).norm() <= 1e-9 * x_star.norm());
    }

    #[test]
    fn exhausted_iterations_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(40, 30, |_, _| StandardNormal.sample(&mut rng));
        let b = DVector::from_fn(40, |_, _| StandardNormal.sample(&mut rng));
        let out = cg_least_squares(&a, &b, 1e-14, 2).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
