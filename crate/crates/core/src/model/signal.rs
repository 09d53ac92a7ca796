use nalgebra::DVector;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Cosupport, UnionFind};
use crate::error::{invalid, Error, Result};
use crate::numerics::null_space_of;
use crate::operators::{AnalysisOperator, PixelGraph};

/// Default relative threshold below which an analysis coefficient counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

/// Attempts made by [`generate_cosparse_signal`] before giving up.
pub const GENERATION_RETRIES: usize = 100;

/// A signal together with the cosupport it was generated from.
#[derive(Debug, Clone)]
pub struct CosparseSignal {
    pub x: DVector<f64>,
    pub cosupport: Cosupport,
    pub cosparsity: usize,
}

fn zero_mask(op: &AnalysisOperator, x: &DVector<f64>, zero_tol: f64) -> Result<Vec<bool>> {
    let alpha = op.apply(x)?;
    let cutoff = zero_tol * x.norm();
    Ok(alpha.iter().map(|a| a.abs() <= cutoff).collect())
}

/// `p − #{i : |(Ωx)_i| > zero_tol·‖x‖₂}`.
pub fn cosparsity(op: &AnalysisOperator, x: &DVector<f64>, zero_tol: f64) -> Result<usize> {
    Ok(zero_mask(op, x, zero_tol)?.iter().filter(|&&z| z).count())
}

/// Rows `i` with `|(Ωx)_i| ≤ zero_tol·‖x‖₂`.
pub fn cosupport_of(op: &AnalysisOperator, x: &DVector<f64>, zero_tol: f64) -> Result<Cosupport> {
    Ok(Cosupport::from_mask(&zero_mask(op, x, zero_tol)?))
}

/// Connected-component structure of the subgraph spanned by the edges in `cosupport`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifComponents {
    /// `|V(Λ)|`: vertices touched by at least one cosupport edge.
    pub covered_vertices: usize,
    /// `J(Λ)`: connected components of the cosupport subgraph.
    pub components: usize,
    /// Component representative per vertex; uncovered vertices are their own.
    pub labels: Vec<usize>,
    pub covered: Vec<bool>,
}

impl DifComponents {
    /// `dim Null(Ω_Λ) = |V| − |V(Λ)| + J(Λ)`.
    pub fn subspace_dim(&self) -> usize {
        self.labels.len() - self.covered_vertices + self.components
    }
}

pub fn dif_components(graph: &PixelGraph, edges: &[usize]) -> DifComponents {
    let nv = graph.vertex_count();
    let mut uf = UnionFind::new(nv);
    let mut covered = vec![false; nv];
    for &e in edges {
        let (a, b) = graph.edge(e);
        covered[a] = true;
        covered[b] = true;
        uf.union(a, b);
    }
    let covered_vertices = covered.iter().filter(|&&c| c).count();
    // uncovered vertices are singleton sets in the forest
    let components = uf.set_count() - (nv - covered_vertices);
    let labels = (0..nv).map(|v| uf.find(v)).collect();
    DifComponents {
        covered_vertices,
        components,
        labels,
        covered,
    }
}

/// `dim W_Λ` for the finite-difference operator, from the component formula.
pub fn subspace_dim_dif(graph: &PixelGraph, cosupport: &Cosupport) -> usize {
    dif_components(graph, cosupport.indices()).subspace_dim()
}

/// Orthogonal projection onto `W_Λ = Null(Ω_Λ)`.
///
/// Dense operators use an orthonormal null-space basis; finite-difference
/// operators average over each connected component of the cosupport graph.
pub fn project_onto_cosparse_subspace(
    op: &AnalysisOperator,
    cosupport: &Cosupport,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    if cosupport.parent_rows() != op.p() {
        return Err(invalid(format!(
            "cosupport over {} rows used with an operator of {} rows",
            cosupport.parent_rows(),
            op.p()
        )));
    }
    if let Some(g) = op.pixel_graph().filter(|_| !op.is_restricted()) {
        let comps = dif_components(&g, cosupport.indices());
        let nv = g.vertex_count();
        let mut sum = vec![0.0; nv];
        let mut count = vec![0usize; nv];
        for u in 0..nv {
            sum[comps.labels[u]] += v[u];
            count[comps.labels[u]] += 1;
        }
        Ok(DVector::from_fn(nv, |u, _| {
            let r = comps.labels[u];
            sum[r] / count[r] as f64
        }))
    } else {
        let sub = op.restrict_rows(cosupport.indices())?.to_dense()?;
        let basis = null_space_of(&sub)?;
        Ok(&basis * basis.tr_mul(v))
    }
}

/// Draws `Λ` uniformly among the `ℓ`-subsets of rows and projects a Gaussian
/// vector onto `Null(Ω_Λ)`, retrying with a fresh `Λ` when the projection
/// vanishes.
pub fn generate_cosparse_signal(op: &AnalysisOperator, l: usize, seed: u64) -> Result<CosparseSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_cosparse_signal_with(op, l, &mut rng)
}

pub fn generate_cosparse_signal_with(
    op: &AnalysisOperator,
    l: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CosparseSignal> {
    let p = op.p();
    let d = op.d();
    if l > p {
        return Err(invalid(format!("cosparsity {l} exceeds the {p} rows of the operator")));
    }
    for _ in 0..GENERATION_RETRIES {
        let cosupport = Cosupport::new(sample(rng, p, l).into_vec(), p)?;
        let v = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let x = project_onto_cosparse_subspace(op, &cosupport, &v)?;
        // relative to the draw: a projection this small is rounding noise
        if x.norm() > 1e-8 * v.norm() {
            return Ok(CosparseSignal {
                x,
                cosupport,
                cosparsity: l,
            });
        }
    }
    Err(Error::Numerical(format!(
        "only the zero signal has cosparsity {l} for this operator ({GENERATION_RETRIES} cosupports tried)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::numerical_rank;
    use crate::operators::{finite_difference_2d, random_tight_frame_operator};
    use nalgebra::DMatrix;

    #[test]
    fn zero_and_constant_signals() {
        let om = finite_difference_2d(5).unwrap();
        assert_eq!(cosparsity(&om, &DVector::zeros(25), DEFAULT_ZERO_TOL).unwrap(), om.p());
        assert_eq!(cosparsity(&om, &DVector::from_element(25, 2.0), DEFAULT_ZERO_TOL).unwrap(), om.p());
        assert_eq!(cosupport_of(&om, &DVector::zeros(25), DEFAULT_ZERO_TOL).unwrap(), Cosupport::full(om.p()));
        assert!(cosparsity(&om, &DVector::zeros(24), DEFAULT_ZERO_TOL).is_err());
    }

    #[test]
    fn single_nonzero_coefficient() {
        let om = random_tight_frame_operator(7, 5, 1).unwrap();
        let rows: Vec<usize> = vec![0, 1, 2, 4];
        let basis = null_space_of(&om.restrict_rows(&rows).unwrap().to_dense().unwrap()).unwrap();
        assert_eq!(basis.ncols(), 1);
        let x = basis.column(0).into_owned();
        let alpha = om.apply(&x).unwrap();
        let cs = cosupport_of(&om, &x, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(cs.indices(), &rows[..]);
        // rows 3, 5, 6 are nonzero for a frame in general position
        assert!(cs.complement().indices().iter().all(|&i| alpha[i].abs() > 1e-6));
        let id = AnalysisOperator::from_dense(DMatrix::identity(4, 4)).unwrap();
        let e0 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(cosupport_of(&id, &e0, DEFAULT_ZERO_TOL).unwrap().complement().indices(), &[0]);
    }

    #[test]
    fn general_position_full_cosparsity_is_rejected() {
        let om = random_tight_frame_operator(10, 6, 2).unwrap();
        assert!(matches!(generate_cosparse_signal(&om, 6, 0), Err(Error::Numerical(_))));
        assert!(generate_cosparse_signal(&om, 11, 0).is_err());
    }

    #[test]
    fn dif_full_cosupport_is_constant() {
        let om = finite_difference_2d(4).unwrap();
        let s = generate_cosparse_signal(&om, om.p(), 3).unwrap();
        let first = s.x[0];
        assert!(s.x.iter().all(|v| (v - first).abs() < 1e-12 * first.abs().max(1.0)));
    }

    #[test]
    fn tight_frame_signal_lies_in_subspace() {
        let om = random_tight_frame_operator(240, 200, 5).unwrap();
        let s = generate_cosparse_signal(&om, 180, 9).unwrap();
        let sub = om.restrict_rows(s.cosupport.indices()).unwrap();
        assert!(sub.apply(&s.x).unwrap().amax() <= 1e-10 * s.x.norm());
        let rank = numerical_rank(&sub.to_dense().unwrap()).unwrap();
        assert_eq!(200 - rank, 20);
        assert!(cosparsity(&om, &s.x, DEFAULT_ZERO_TOL).unwrap() >= 180);
    }

    #[test]
    fn generation_is_deterministic() {
        let om = random_tight_frame_operator(24, 20, 5).unwrap();
        let a = generate_cosparse_signal(&om, 15, 4).unwrap();
        let b = generate_cosparse_signal(&om, 15, 4).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.cosupport, b.cosupport);
    }

    #[test]
    fn dif_dimension_formula_matches_rank() {
        let g = PixelGraph::new(3);
        let om = finite_difference_2d(3).unwrap();
        // every subset of the 12 edges
        for mask in 0u32..(1 << 12) {
            let edges: Vec<usize> = (0..12).filter(|i| mask >> i & 1 == 1).collect();
            let cs = Cosupport::new(edges.clone(), 12).unwrap();
            let dense = om.restrict_rows(&edges).unwrap().to_dense().unwrap();
            let rank = numerical_rank(&dense).unwrap();
            assert_eq!(subspace_dim_dif(&g, &cs), 9 - rank, "mask {mask:b}");
        }
        assert_eq!(subspace_dim_dif(&g, &Cosupport::empty(12)), 9);
        assert_eq!(subspace_dim_dif(&g, &Cosupport::full(12)), 1);
    }

    #[test]
    fn dif_projection_is_orthogonal() {
        let om = finite_difference_2d(5).unwrap();
        let cs = Cosupport::new(vec![0, 1, 5, 20, 21, 39], om.p()).unwrap();
        let v = DVector::from_fn(25, |i, _| (i as f64 * 1.3).sin());
        let x = project_onto_cosparse_subspace(&om, &cs, &v).unwrap();
        let sub = om.restrict_rows(cs.indices()).unwrap();
        assert!(sub.apply(&x).unwrap().amax() < 1e-14);
        let basis = null_space_of(&sub.to_dense().unwrap()).unwrap();
        let oracle = &basis * basis.tr_mul(&v);
        assert!((x - oracle).amax() < 1e-12);
    }
}
