use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PixelGraph;
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::numerics::{ensure_finite_matrix, select_rows, LinearMap};

/// Largest lattice side for which the finite-difference operator may be
/// materialized densely.
pub const MAX_DENSE_DIF_SIDE: usize = 64;

/// Iteration cap of the alternating-projection tight-frame construction.
pub const TIGHT_FRAME_MAX_ITER: usize = 2000;
const TIGHT_FRAME_TOL: f64 = 1e-9;
const TIGHT_FRAME_ACCEPT: f64 = 1e-8;

#[derive(Debug, Clone)]
enum Repr {
    /// Explicit rows; already restricted if `active` is set.
    Dense(Arc<DMatrix<f64>>),
    Dif2d(PixelGraph),
}

/// An analysis operator `Ω`, possibly restricted to a subset of its rows.
#[derive(Debug, Clone)]
pub struct AnalysisOperator {
    repr: Repr,
    /// Parent row indices of the rows of this operator, in order.
    active: Option<Arc<Vec<usize>>>,
    parent_rows: usize,
}

impl AnalysisOperator {
    /// Wraps an explicit `p × d` matrix.
    pub fn from_dense(matrix: DMatrix<f64>) -> Result<Self> {
        ensure_finite_matrix("analysis operator", &matrix)?;
        let parent_rows = matrix.nrows();
        Ok(Self {
            repr: Repr::Dense(Arc::new(matrix)),
            active: None,
            parent_rows,
        })
    }

    /// The horizontal-then-vertical finite-difference operator on the `n × n`
    /// lattice: `p = 2n(n−1)`, `d = n²`.
    pub fn finite_difference_2d(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("finite-difference lattice side must be >= 2, got {n}")));
        }
        let g = PixelGraph::new(n);
        Ok(Self {
            repr: Repr::Dif2d(g),
            active: None,
            parent_rows: g.edge_count(),
        })
    }

    /// Number of rows of this (possibly restricted) operator.
    pub fn p(&self) -> usize {
        match &self.active {
            Some(a) => a.len(),
            None => self.parent_rows,
        }
    }

    /// Signal dimension.
    pub fn d(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.ncols(),
            Repr::Dif2d(g) => g.vertex_count(),
        }
    }

    /// Row count of the unrestricted parent operator.
    pub fn parent_rows(&self) -> usize {
        self.parent_rows
    }

    pub fn is_restricted(&self) -> bool {
        self.active.is_some()
    }

    /// Parent index of every row of this operator.
    pub fn row_indices(&self) -> Vec<usize> {
        match &self.active {
            Some(a) => a.as_ref().clone(),
            None => (0..self.parent_rows).collect(),
        }
    }

    /// The pixel graph for finite-difference operators.
    pub fn pixel_graph(&self) -> Option<PixelGraph> {
        match &self.repr {
            Repr::Dif2d(g) => Some(*g),
            Repr::Dense(_) => None,
        }
    }

    /// The explicit matrix of this operator when it is stored densely.
    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense(m) => Some(m),
            Repr::Dif2d(_) => None,
        }
    }

    /// Materializes the operator; finite-difference operators only up to side
    /// [`MAX_DENSE_DIF_SIDE`].
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match &self.repr {
            Repr::Dense(m) => Ok(m.as_ref().clone()),
            Repr::Dif2d(g) => {
                if g.side() > MAX_DENSE_DIF_SIDE {
                    return Err(invalid(format!(
                        "finite-difference operator with side {} is too large to materialize (max {MAX_DENSE_DIF_SIDE})",
                        g.side()
                    )));
                }
                let rows = self.row_indices();
                let mut out = DMatrix::zeros(rows.len(), g.vertex_count());
                for (k, &e) in rows.iter().enumerate() {
                    let (a, b) = g.edge(e);
                    out[(k, a)] = 1.0;
                    out[(k, b)] = -1.0;
                }
                Ok(out)
            }
        }
    }

    /// The operator `Ω_Λ` keeping the listed rows (indices into this
    /// operator's rows), in the given order.
    pub fn restrict_rows(&self, rows: &[usize]) -> Result<Self> {
        let p = self.p();
        if let Some(&bad) = rows.iter().find(|&&r| r >= p) {
            return Err(invalid(format!("row index {bad} out of range for operator with {p} rows")));
        }
        let parent: Vec<usize> = match &self.active {
            Some(a) => rows.iter().map(|&r| a[r]).collect(),
            None => rows.to_vec(),
        };
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(Arc::new(select_rows(m, rows))),
            Repr::Dif2d(g) => Repr::Dif2d(*g),
        };
        Ok(Self {
            repr,
            active: Some(Arc::new(parent)),
            parent_rows: self.parent_rows,
        })
    }

    /// `Ωx`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("analysis operator input", self.d(), x.len())?;
        Ok(self.apply_unchecked(x))
    }

    /// `Ωᵀy`.
    pub fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("analysis operator adjoint input", self.p(), y.len())?;
        Ok(self.adjoint_unchecked(y))
    }

    /// `Ω B` for a `d × k` matrix `B`.
    pub fn apply_to_columns(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure_dim("analysis operator column input", self.d(), b.nrows())?;
        match &self.repr {
            Repr::Dense(m) => Ok(m.as_ref() * b),
            Repr::Dif2d(g) => {
                let rows = self.row_indices();
                let mut out = DMatrix::zeros(rows.len(), b.ncols());
                for (k, &e) in rows.iter().enumerate() {
                    let (v1, v2) = g.edge(e);
                    for j in 0..b.ncols() {
                        out[(k, j)] = b[(v1, j)] - b[(v2, j)];
                    }
                }
                Ok(out)
            }
        }
    }

    fn apply_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Dense(m) => m.as_ref() * x,
            Repr::Dif2d(g) => match &self.active {
                None => dif_apply_full(g, x.as_slice()),
                Some(rows) => DVector::from_iterator(
                    rows.len(),
                    rows.iter().map(|&e| {
                        let (a, b) = g.edge(e);
                        x[a] - x[b]
                    }),
                ),
            },
        }
    }

    fn adjoint_unchecked(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Dense(m) => m.tr_mul(y),
            Repr::Dif2d(g) => {
                let mut out = DVector::zeros(g.vertex_count());
                match &self.active {
                    None => {
                        for (e, (a, b)) in g.edges().enumerate() {
                            out[a] += y[e];
                            out[b] -= y[e];
                        }
                    }
                    Some(rows) => {
                        for (k, &e) in rows.iter().enumerate() {
                            let (a, b) = g.edge(e);
                            out[a] += y[k];
                            out[b] -= y[k];
                        }
                    }
                }
                out
            }
        }
    }
}

fn dif_apply_full(g: &PixelGraph, x: &[f64]) -> DVector<f64> {
    let n = g.side();
    let mut out = Vec::with_capacity(g.edge_count());
    for r in 0..n {
        let row = &x[r * n..(r + 1) * n];
        out.extend(row.windows(2).map(|w| w[0] - w[1]));
    }
    for r in 0..n - 1 {
        let (top, bottom) = (&x[r * n..(r + 1) * n], &x[(r + 1) * n..(r + 2) * n]);
        out.extend(top.iter().zip(bottom).map(|(a, b)| a - b));
    }
    DVector::from_vec(out)
}

impl LinearMap for AnalysisOperator {
    fn in_dim(&self) -> usize {
        self.d()
    }
    fn out_dim(&self) -> usize {
        self.p()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply_unchecked(x)
    }
    fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        self.adjoint_unchecked(y)
    }
}

/// `Ω_DIF` on the `n × n` lattice.
pub fn finite_difference_2d(n: usize) -> Result<AnalysisOperator> {
    AnalysisOperator::finite_difference_2d(n)
}

/// A `p × d` operator with unit-norm rows and `ΩᵀΩ = (p/d)·I`.
///
/// Starts from an i.i.d. Gaussian matrix (filled row-major from a ChaCha8
/// stream) and alternates row normalization with projection onto the
/// tight-frame set via the polar factor `A (AᵀA)^{-1/2}`.
pub fn random_tight_frame_operator(p: usize, d: usize, seed: u64) -> Result<AnalysisOperator> {
    AnalysisOperator::from_dense(random_tight_frame(p, d, seed)?)
}

/// Matrix form of [`random_tight_frame_operator`].
pub fn random_tight_frame(p: usize, d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(invalid("tight frame needs d >= 1"));
    }
    if p < d {
        return Err(invalid(format!("tight frame needs p >= d, got p = {p}, d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_row_iterator(p, d, (0..p * d).map(|_| StandardNormal.sample(&mut rng)));
    let s = p as f64 / d as f64;
    let mut residual = f64::INFINITY;
    for it in 0..=TIGHT_FRAME_MAX_ITER {
        normalize_rows(&mut a);
        let gram = a.transpose() * &a;
        residual = tight_residual(&gram, s);
        if residual <= TIGHT_FRAME_TOL || it == TIGHT_FRAME_MAX_ITER {
            break;
        }
        a = &a * inverse_sqrt_scaled(gram, s)?;
    }
    if residual > TIGHT_FRAME_ACCEPT {
        return Err(Error::Numerical(format!(
            "tight frame construction stalled at residual {residual:e}"
        )));
    }
    Ok(a)
}

/// `(G/s)^{-1/2}`, so that `A·(G/s)^{-1/2}` is the polar factor of `A` scaled to
/// `ΩᵀΩ = s·I`. Close to the fixed point the second-order series in
/// `E = G/s − I` replaces the eigendecomposition; its error is `O(‖E‖³)`.
fn inverse_sqrt_scaled(mut gram: DMatrix<f64>, s: f64) -> Result<DMatrix<f64>> {
    let d = gram.nrows();
    gram /= s;
    let mut e = gram;
    for i in 0..d {
        e[(i, i)] -= 1.0;
    }
    if e.norm() <= 0.05 {
        let e2 = &e * &e;
        let mut out = e2 * 0.375 - e * 0.5;
        for i in 0..d {
            out[(i, i)] += 1.0;
        }
        return Ok(out);
    }
    for i in 0..d {
        e[(i, i)] += 1.0;
    }
    let eig = e.symmetric_eigen();
    let mut v_scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if !(lam > 0.0) {
            return Err(Error::Numerical("tight frame iterate lost rank".into()));
        }
        v_scaled.column_mut(j).scale_mut(lam.sqrt().recip());
    }
    Ok(v_scaled * eig.eigenvectors.transpose())
}

fn normalize_rows(a: &mut DMatrix<f64>) {
    for mut row in a.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
}

/// `‖G − sI‖_F / ‖sI‖_F`.
pub(crate) fn tight_residual(gram: &DMatrix<f64>, s: f64) -> f64 {
    let d = gram.nrows();
    let mut acc = 0.0;
    for j in 0..d {
        for i in 0..d {
            let t = gram[(i, j)] - if i == j { s } else { 0.0 };
            acc += t * t;
        }
    }
    acc.sqrt() / (s * (d as f64).sqrt())
}
