use nalgebra::DMatrix;

use super::{ensure_finite_matrix, RANK_RTOL};
use crate::error::{Error, Result};

/// Householder QR with column pivoting, `A P = Q R`.
///
/// Reflectors are kept implicitly so the full orthogonal factor (and in
/// particular the orthogonal complement of the column space) can be formed
/// without materializing `Q`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    // column-major; R on and above the diagonal, reflector tails below
    data: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        ensure_finite_matrix("pivoted QR input", a)?;
        let (m, n) = a.shape();
        let mut data: Vec<f64> = a.as_slice().to_vec();
        let k = m.min(n);
        let mut tau = vec![0.0; k];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n)
            .map(|j| data[j * m..(j + 1) * m].iter().map(|v| v * v).sum())
            .collect();

        for j in 0..k {
            // pivot on the largest remaining column; recompute norms exactly to
            // avoid downdating drift
            for c in j..n {
                norms[c] = data[c * m + j..(c + 1) * m].iter().map(|v| v * v).sum();
            }
            let p = (j..n)
                .max_by(|&a, &b| norms[a].total_cmp(&norms[b]))
                .unwrap_or(j);
            if p != j {
                for i in 0..m {
                    data.swap(j * m + i, p * m + i);
                }
                perm.swap(j, p);
                norms.swap(j, p);
            }

            let (head, tail) = data.split_at_mut((j + 1) * m);
            let col = &mut head[j * m + j..(j + 1) * m];
            let x0 = col[0];
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                tau[j] = 0.0;
                continue;
            }
            let beta = if x0 >= 0.0 { -norm } else { norm };
            let t = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            for v in col[1..].iter_mut() {
                *v *= scale;
            }
            col[0] = beta;
            tau[j] = t;

            let v_tail = &col[1..];
            for c in 0..(n - j - 1) {
                let target = &mut tail[c * m + j..(c + 1) * m];
                let mut w = target[0];
                for (a, b) in target[1..].iter().zip(v_tail) {
                    w += a * b;
                }
                w *= t;
                target[0] -= w;
                for (a, b) in target[1..].iter_mut().zip(v_tail) {
                    *a -= w * b;
                }
            }
        }

        Ok(Self {
            rows: m,
            cols: n,
            data,
            tau,
            perm,
        })
    }

    /// Absolute values of the diagonal of `R`, non-increasing up to rounding.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|j| self.data[j * self.rows + j].abs())
            .collect()
    }

    /// Number of pivots above `rtol` times the leading pivot.
    pub fn rank(&self, rtol: f64) -> usize {
        let diag = self.r_diagonal();
        let lead = diag.first().copied().unwrap_or(0.0);
        if lead == 0.0 {
            return 0;
        }
        diag.iter().filter(|&&d| d > rtol * lead).count()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Columns `start..rows` of the full orthogonal factor `Q`.
    pub fn q_columns_from(&self, start: usize) -> DMatrix<f64> {
        let m = self.rows;
        let count = m.saturating_sub(start);
        let mut out = vec![0.0; m * count];
        for c in 0..count {
            out[c * m + start + c] = 1.0;
        }
        // Q e = H_0 H_1 ... H_{k-1} e
        for j in (0..self.tau.len()).rev() {
            let t = self.tau[j];
            if t == 0.0 {
                continue;
            }
            let v_tail = &self.data[j * m + j + 1..(j + 1) * m];
            for c in 0..count {
                let target = &mut out[c * m + j..(c + 1) * m];
                let mut w = target[0];
                for (a, b) in target[1..].iter().zip(v_tail) {
                    w += a * b;
                }
                if w == 0.0 {
                    continue;
                }
                w *= t;
                target[0] -= w;
                for (a, b) in target[1..].iter_mut().zip(v_tail) {
                    *a -= w * b;
                }
            }
        }
        DMatrix::from_vec(m, count, out)
    }
}

/// Orthonormal basis (as columns) of `Null(A)`, using pivoted QR of `Aᵀ`.
pub fn null_space_of(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (_, n) = a.shape();
    if a.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let qr = PivotedQr::new(&a.transpose())?;
    let rank = qr.rank(RANK_RTOL);
    Ok(qr.q_columns_from(rank))
}

/// Orthonormal `d × (d − m)` basis of `Null(M)` for a full-row-rank `M`.
///
/// A rank-deficient `M` means the measurements are not linearly independent,
/// which the uniqueness and recovery statements assume; it is reported as
/// [`Error::RankDeficient`].
pub fn null_space_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if rows > cols {
        return Err(Error::InvalidArgument(format!(
            "null_space_basis expects rows <= cols, got {rows}x{cols}"
        )));
    }
    if rows == 0 {
        return Ok(DMatrix::identity(cols, cols));
    }
    let qr = PivotedQr::new(&m.transpose())?;
    let rank = qr.rank(RANK_RTOL);
    if rank < rows {
        return Err(Error::RankDeficient {
            context: "measurement matrix (rows must be linearly independent)".into(),
            rank,
            required: rows,
        });
    }
    Ok(qr.q_columns_from(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn single_row() {
        let w = null_space_basis(&dmatrix![1.0, 0.0]).unwrap();
        assert_eq!(w.shape(), (2, 1));
        assert!(w[(0, 0)].abs() < 1e-15);
        assert!((w[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn padded_identity() {
        let mut m = DMatrix::zeros(3, 5);
        for i in 0..3 {
            m[(i, i)] = 1.0;
        }
        let w = null_space_basis(&m).unwrap();
        assert_eq!(w.shape(), (5, 2));
        // basis spans e3, e4
        for i in 0..3 {
            assert!(w.row(i).norm() < 1e-15);
        }
        let block = w.rows(3, 2).into_owned();
        assert!((block.tr_mul(&block) - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn random_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let d = rng.random_range(2..30);
            let m = rng.random_range(1..d);
            let a = gaussian(m, d, &mut rng);
            let w = null_space_basis(&a).unwrap();
            assert_eq!(w.shape(), (d, d - m));
            let res = (&a * &w).amax();
            assert!(res <= 1e-10 * a.amax(), "residual {res}");
            assert!((w.tr_mul(&w) - DMatrix::identity(d - m, d - m)).amax() < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_rejected() {
        let a = dmatrix![1.0, 2.0, 3.0; 2.0, 4.0, 6.0];
        assert!(matches!(null_space_basis(&a), Err(Error::RankDeficient { .. })));
        // the general routine still reports the 2-dimensional null space
        let n = null_space_of(&a).unwrap();
        assert_eq!(n.ncols(), 2);
        assert!((&a * n).amax() < 1e-14);
    }
}
