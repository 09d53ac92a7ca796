use nalgebra::{DMatrix, DVector};

/// Lower Cholesky factor `G = L Lᵀ` supporting rank-one downdates
/// `G ← G − v vᵀ`.
#[derive(Debug, Clone)]
pub struct DowndatableCholesky {
    l: DMatrix<f64>,
}

impl DowndatableCholesky {
    /// Factors a symmetric positive definite matrix; `None` if it is not.
    pub fn new(g: DMatrix<f64>) -> Option<Self> {
        let n = g.nrows();
        if n == 0 {
            return Some(Self { l: g });
        }
        let chol = g.cholesky()?;
        let l = chol.unpack();
        let dmax = l.diagonal().amax();
        let dmin = l.diagonal().iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));
        // pivots this small relative to the leading one make the solve meaningless
        if !(dmin > 1e-7 * dmax) {
            return None;
        }
        Some(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Applies `G ← G − v vᵀ`. Returns `false` (leaving the factor in an
    /// unspecified state) if the result would not be positive definite.
    pub fn downdate(&mut self, v: &[f64]) -> bool {
        let n = self.l.nrows();
        let mut v = v.to_vec();
        let dmax = self.l.diagonal().amax();
        for k in 0..n {
            let lkk = self.l[(k, k)];
            let r2 = lkk * lkk - v[k] * v[k];
            if !(r2 > 0.0) {
                return false;
            }
            let r = r2.sqrt();
            if r < 1e-7 * dmax {
                return false;
            }
            let c = r / lkk;
            let s = v[k] / lkk;
            self.l[(k, k)] = r;
            for i in (k + 1)..n {
                let lik = (self.l[(i, k)] - s * v[i]) / c;
                v[i] = c * v[i] - s * lik;
                self.l[(i, k)] = lik;
            }
        }
        true
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        if self.l.nrows() == 0 {
            return DVector::zeros(0);
        }
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("nonzero diagonal checked at construction");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("nonzero diagonal checked at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn downdate_matches_refactorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = DMatrix::from_fn(30, 6, |_, _| StandardNormal.sample(&mut rng));
        let mut chol = DowndatableCholesky::new(b.tr_mul(&b)).unwrap();
        let rhs = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        for r in 0..10 {
            let row: Vec<f64> = b.row(r).iter().cloned().collect();
            assert!(chol.downdate(&row));
        }
        let rest = b.rows(10, 20).into_owned();
        let direct = (rest.tr_mul(&rest)).cholesky().unwrap().solve(&rhs);
        assert!((chol.solve(&rhs) - &direct).norm() < 1e-10 * direct.norm());
    }

    #[test]
    fn downdate_to_singular_fails() {
        let v = [1.0, 0.0];
        let mut chol = DowndatableCholesky::new(DMatrix::identity(2, 2)).unwrap();
        assert!(!chol.downdate(&v));
    }
}
