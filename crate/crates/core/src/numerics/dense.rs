use nalgebra::{DMatrix, DVector, SVD};

use super::{ensure_finite_matrix, ensure_finite_vector, RANK_RTOL};
use crate::error::{ensure_dim, Error, Result};

/// Thin singular value decomposition `A = U diag(s) Vᵀ` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    /// Number of singular values above `rtol · σ_max`.
    pub fn rank(&self, rtol: f64) -> usize {
        let smax = self.singular_values.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        self.singular_values.iter().filter(|&&s| s > rtol * smax).count()
    }

    fn inverted_values(&self, rtol: f64) -> Vec<f64> {
        let smax = self.singular_values.iter().cloned().fold(0.0, f64::max);
        self.singular_values
            .iter()
            .map(|&s| if smax > 0.0 && s > rtol * smax { 1.0 / s } else { 0.0 })
            .collect()
    }
}

/// Relative Frobenius reconstruction error accepted from one SVD attempt.
const SVD_CHECK_TOL: f64 = 1e-12;

fn svd_attempt(a: &DMatrix<f64>, eps: f64) -> Option<(ThinSvd, f64)> {
    let SVD {
        u,
        v_t,
        singular_values,
    } = SVD::try_new(a.clone(), true, true, eps, 0)?;
    let svd = ThinSvd {
        u: u.expect("requested U"),
        singular_values,
        v_t: v_t.expect("requested Vt"),
    };
    let mut us = svd.u.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    let err = (us * &svd.v_t - a).norm() / a.norm().max(f64::MIN_POSITIVE);
    Some((svd, err))
}

// nalgebra's bidiagonal iteration occasionally deflates too early at the
// tightest tolerance and returns factors off by ~1e-7; every result is checked
// against the input and recomputed with looser deflation or on the transpose.
fn svd_square_or_small(a: DMatrix<f64>) -> Result<ThinSvd> {
    let mut best: Option<(ThinSvd, f64)> = None;
    for (eps, transpose) in [(f64::EPSILON, false), (1e-14, false), (f64::EPSILON, true), (1e-13, true)] {
        let attempt = if transpose {
            svd_attempt(&a.transpose(), eps).map(|(t, e)| {
                let svd = ThinSvd {
                    u: t.v_t.transpose(),
                    singular_values: t.singular_values,
                    v_t: t.u.transpose(),
                };
                (svd, e)
            })
        } else {
            svd_attempt(&a, eps)
        };
        if let Some((svd, err)) = attempt {
            if err <= SVD_CHECK_TOL {
                return Ok(svd);
            }
            if best.as_ref().map_or(true, |(_, e)| err < *e) {
                best = Some((svd, err));
            }
        }
    }
    best.map(|(s, _)| s).ok_or_else(|| Error::Numerical("SVD did not converge".into()))
}

/// Thin SVD. Markedly tall (or wide) inputs are first reduced by a QR factorization
/// so the bidiagonalization only runs on the square triangle.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    ensure_finite_matrix("thin_svd input", a)?;
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(r, 0),
            singular_values: DVector::zeros(0),
            v_t: DMatrix::zeros(0, c),
        });
    }
    if r >= c + c / 2 && r > 8 {
        let qr = a.clone().qr();
        let q = qr.q();
        let rr = qr.r();
        let inner = svd_square_or_small(rr)?;
        Ok(ThinSvd {
            u: q * inner.u,
            singular_values: inner.singular_values,
            v_t: inner.v_t,
        })
    } else if c >= r + r / 2 && c > 8 {
        let t = thin_svd(&a.transpose())?;
        Ok(ThinSvd {
            u: t.v_t.transpose(),
            singular_values: t.singular_values,
            v_t: t.u.transpose(),
        })
    } else {
        svd_square_or_small(a.clone())
    }
}

/// Singular values in the order returned by the decomposition.
pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(thin_svd(a)?.singular_values)
}

/// Rank with singular values below `RANK_RTOL · σ_max` treated as zero.
pub fn numerical_rank(a: &DMatrix<f64>) -> Result<usize> {
    Ok(thin_svd(a)?.rank(RANK_RTOL))
}

/// Moore–Penrose pseudo-inverse via the SVD.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = thin_svd(a)?;
    let inv = svd.inverted_values(RANK_RTOL);
    // A† = V diag(inv) Uᵀ
    let mut v_scaled = svd.v_t.transpose();
    for (j, s) in inv.iter().enumerate() {
        v_scaled.column_mut(j).scale_mut(*s);
    }
    Ok(v_scaled * svd.u.transpose())
}

/// Minimum-norm least-squares solution together with the numerical rank of `a`.
pub fn lstsq_with_rank(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
    ensure_dim("least squares right-hand side", a.nrows(), b.len())?;
    ensure_finite_vector("least squares right-hand side", b)?;
    let svd = thin_svd(a)?;
    let inv = svd.inverted_values(RANK_RTOL);
    let mut coeffs = svd.u.tr_mul(b);
    for (c, s) in coeffs.iter_mut().zip(inv.iter()) {
        *c *= s;
    }
    let rank = inv.iter().filter(|&&s| s != 0.0).count();
    Ok((svd.v_t.tr_mul(&coeffs), rank))
}

/// The minimum-ℓ2-norm minimizer of `‖Ax − b‖₂`.
pub fn least_squares_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    lstsq_with_rank(a, b).map(|(x, _)| x)
}

/// `‖A‖_{∞→∞}`: the largest row ℓ1-norm.
pub fn op_norm_inf_inf(a: &DMatrix<f64>) -> Result<f64> {
    ensure_finite_matrix("op_norm_inf_inf input", a)?;
    // Entries of row i are visited in column order j = 0, 1, ...
    let mut best = 0.0_f64;
    for i in 0..a.nrows() {
        let mut s = 0.0;
        for j in 0..a.ncols() {
            s += a[(i, j)].abs();
        }
        best = best.max(s);
    }
    Ok(best)
}

/// `‖A‖_{1→1}`: the largest column ℓ1-norm, equal to `op_norm_inf_inf(Aᵀ)`.
pub fn op_norm_1_1(a: &DMatrix<f64>) -> Result<f64> {
    ensure_finite_matrix("op_norm_1_1 input", a)?;
    // Same summation order as op_norm_inf_inf on the transpose.
    let mut best = 0.0_f64;
    for j in 0..a.ncols() {
        let mut s = 0.0;
        for i in 0..a.nrows() {
            s += a[(i, j)].abs();
        }
        best = best.max(s);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn svd_recovers_from_early_deflation() {
        // a matrix on which a single bidiagonal pass at machine epsilon is off by ~1e-7
        let a = crate::operators::gaussian_matrix(200, 200, 11060054383245517889);
        let s = thin_svd(&a).unwrap();
        let mut us = s.u.clone();
        for (j, v) in s.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*v);
        }
        assert!((us * &s.v_t - &a).norm() <= 1e-12 * a.norm());
    }

    fn gaussian(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identity_least_squares() {
        let x = least_squares_min_norm(&DMatrix::identity(3, 3), &DVector::from_vec(vec![1., 2., 3.]))
            .unwrap();
        assert!((x - DVector::from_vec(vec![1., 2., 3.])).norm() < 1e-14);
    }

    #[test]
    fn rank_one_min_norm() {
        let a = dmatrix![1.0, 0.0; 0.0, 0.0];
        let x = least_squares_min_norm(&a, &DVector::from_vec(vec![2.0, 5.0])).unwrap();
        assert!((x - DVector::from_vec(vec![2.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn normal_equations_closed_form() {
        // AᵀA = [[2,2],[2,3]], Aᵀb = (2,3); inverse by the 2x2 adjugate formula.
        let a = dmatrix![1.0, 1.0; 1.0, 1.0; 0.0, 1.0];
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let (g11, g12, g22) = (2.0, 2.0, 3.0);
        let det: f64 = g11 * g22 - g12 * g12;
        let (r1, r2) = (2.0, 3.0);
        let expected = DVector::from_vec(vec![(g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det]);
        let x = least_squares_min_norm(&a, &b).unwrap();
        assert!((x - expected).norm() < 1e-13);
    }

    #[test]
    fn least_squares_rejects_bad_input() {
        let a = DMatrix::identity(3, 3);
        assert!(matches!(
            least_squares_min_norm(&a, &DVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = a.clone();
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(
            least_squares_min_norm(&bad, &DVector::zeros(3)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn pinv_examples() {
        let p = pseudo_inverse(&(DMatrix::identity(2, 2) * 2.0)).unwrap();
        assert!((p - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
        let col = dmatrix![3.0; 4.0];
        let p = pseudo_inverse(&col).unwrap();
        assert!((p - dmatrix![3.0 / 25.0, 4.0 / 25.0]).norm() < 1e-15);
        let a = gaussian(5, 3, 7);
        let p = pseudo_inverse(&a).unwrap();
        assert!((p * a - DMatrix::identity(3, 3)).norm() < 1e-9);
    }

    #[test]
    fn tall_and_wide_svd_paths_agree() {
        for &(r, c) in &[(40, 6), (6, 40), (12, 12), (30, 20)] {
            let a = gaussian(r, c, (r * 100 + c) as u64);
            let svd = thin_svd(&a).unwrap();
            let mut us = svd.u.clone();
            for (j, s) in svd.singular_values.iter().enumerate() {
                us.column_mut(j).scale_mut(*s);
            }
            assert!((us * &svd.v_t - &a).norm() < 1e-11 * a.norm());
            let k = r.min(c);
            assert!((svd.u.tr_mul(&svd.u) - DMatrix::identity(k, k)).norm() < 1e-12);
        }
    }

    #[test]
    fn operator_norm_examples() {
        let a = dmatrix![1.0, -2.0; 3.0, 0.0];
        assert_eq!(op_norm_inf_inf(&a).unwrap(), 3.0);
        assert_eq!(op_norm_1_1(&a).unwrap(), 4.0);
        assert_eq!(op_norm_inf_inf(&DMatrix::identity(5, 5)).unwrap(), 1.0);
        assert_eq!(op_norm_1_1(&DMatrix::identity(5, 5)).unwrap(), 1.0);
        let b = gaussian(5, 3, 3);
        assert_eq!(op_norm_1_1(&b).unwrap(), op_norm_inf_inf(&b.transpose()).unwrap());
    }

    #[test]
    fn inf_norm_attained_at_sign_vectors() {
        let a = gaussian(4, 4, 11);
        let mut best = 0.0_f64;
        for mask in 0..16u32 {
            let s = DVector::from_fn(4, |j, _| if mask >> j & 1 == 1 { 1.0 } else { -1.0 });
            best = best.max((&a * s).amax());
        }
        assert!((op_norm_inf_inf(&a).unwrap() - best).abs() < 1e-13);
    }

    #[test]
    fn rank_of_empty_and_zero() {
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 4)).unwrap(), 0);
        assert_eq!(numerical_rank(&DMatrix::zeros(0, 4)).unwrap(), 0);
        let p = pseudo_inverse(&DMatrix::zeros(0, 3)).unwrap();
        assert_eq!(p.shape(), (3, 0));
    }
}
