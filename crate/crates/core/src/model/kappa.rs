use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::UnionFind;
use crate::error::{invalid, Error, Result};
use crate::numerics::{numerical_rank, select_rows};
use crate::operators::{AnalysisOperator, PixelGraph};

/// Largest number of subsets the brute-force evaluators will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// `κ(ℓ) = max(d − ℓ, 0)` for an operator in general position.
pub fn kappa_general_position(d: usize, l: usize) -> usize {
    d.saturating_sub(l)
}

/// Interval bounds on `κ(ℓ)` for the 2D finite-difference operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaBounds {
    /// `d − ℓ/2 − √(ℓ/2) − 1`; only established for `ℓ ≥ 5`.
    pub lower: Option<f64>,
    /// `d − ℓ/2`.
    pub upper: f64,
}

/// Bounds `d − ℓ/2 − √(ℓ/2) − 1 ≤ κ(ℓ) ≤ d − ℓ/2` for `Ω_DIF` on an `N × N`
/// lattice (`d = N²`, `ℓ ≤ 2N(N−1)`). The lower bound is `None` for `ℓ < 5`.
pub fn kappa_dif_bounds(d: usize, l: usize) -> Result<KappaBounds> {
    let n = (d as f64).sqrt().round() as usize;
    if n * n != d || n < 2 {
        return Err(invalid(format!("d = {d} is not the size of an N x N lattice with N >= 2")));
    }
    let p = 2 * n * (n - 1);
    if l > p {
        return Err(invalid(format!("cosparsity {l} exceeds the {p} edges of the {n}x{n} lattice")));
    }
    let half = l as f64 / 2.0;
    let upper = d as f64 - half;
    let lower = (l >= 5).then(|| upper - half.sqrt() - 1.0);
    Ok(KappaBounds { lower, upper })
}

/// `C(n, k)` as a float (exact for the magnitudes the guard admits).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn guard(count: f64) -> Result<()> {
    if count > BRUTE_FORCE_LIMIT {
        Err(Error::EnumerationTooLarge {
            count,
            limit: BRUTE_FORCE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Advances `c` (strictly increasing, values `< n`) to the next combination in
/// lexicographic order; false after the last one.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Maximum of `eval` over all `l`-subsets of `0..p`, parallel over the
/// smallest element. `init` creates per-worker scratch state.
fn max_over_subsets<S, I, F>(p: usize, l: usize, init: I, eval: F) -> usize
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &[usize]) -> usize + Sync + Send,
{
    if l == 0 {
        return eval(&mut init(), &[]);
    }
    (0..=p - l)
        .into_par_iter()
        .map_init(
            || (init(), vec![0usize; l]),
            |(state, subset), first| {
                subset[0] = first;
                let rest = &mut subset[1..];
                for (j, v) in rest.iter_mut().enumerate() {
                    *v = first + 1 + j;
                }
                let mut best = 0;
                loop {
                    best = best.max(eval(state, subset));
                    // the tail stays above `first` because resets only count upward
                    if !next_combination(&mut subset[1..], p) {
                        break;
                    }
                }
                best
            },
        )
        .max()
        .unwrap_or(0)
}

struct DifScratch {
    uf: UnionFind,
    covered: Vec<bool>,
}

fn dif_dim(graph: &PixelGraph, s: &mut DifScratch, edges: &[usize]) -> usize {
    let nv = graph.vertex_count();
    s.uf.reset();
    s.covered.iter_mut().for_each(|c| *c = false);
    let mut covered = 0;
    for &e in edges {
        let (a, b) = graph.edge(e);
        for v in [a, b] {
            if !s.covered[v] {
                s.covered[v] = true;
                covered += 1;
            }
        }
        s.uf.union(a, b);
    }
    // uncovered vertices are singletons: J = sets − (nv − covered)
    let components = s.uf.set_count() - (nv - covered);
    nv - covered + components
}

/// `κ(ℓ) = max_{|Λ| = ℓ} dim Null(Ω_Λ)` by exhaustive enumeration.
///
/// Finite-difference operators use the component formula; other operators
/// the numerical rank of each `Ω_Λ`.
pub fn kappa_brute_force(op: &AnalysisOperator, l: usize) -> Result<usize> {
    let p = op.p();
    let d = op.d();
    if l > p {
        return Err(invalid(format!("cosparsity {l} exceeds the {p} rows of the operator")));
    }
    guard(binomial(p, l))?;
    if let Some(g) = op.pixel_graph().filter(|_| !op.is_restricted()) {
        let nv = g.vertex_count();
        return Ok(max_over_subsets(
            p,
            l,
            || DifScratch {
                uf: UnionFind::new(nv),
                covered: vec![false; nv],
            },
            |s, edges| dif_dim(&g, s, edges),
        ));
    }
    let dense = op.to_dense()?;
    Ok(max_over_subsets(
        p,
        l,
        || (),
        |_, rows| {
            if rows.is_empty() {
                return d;
            }
            let sub = select_rows(&dense, rows);
            d - numerical_rank(&sub).expect("finite operator")
        },
    ))
}

fn subspace_dim(op: &AnalysisOperator, dense: Option<&nalgebra::DMatrix<f64>>, rows: &[usize]) -> usize {
    let d = op.d();
    if rows.is_empty() {
        return d;
    }
    match (op.pixel_graph().filter(|_| !op.is_restricted()), dense) {
        (Some(g), _) => {
            let nv = g.vertex_count();
            let mut s = DifScratch {
                uf: UnionFind::new(nv),
                covered: vec![false; nv],
            };
            dif_dim(&g, &mut s, rows)
        }
        (None, Some(m)) => d - numerical_rank(&select_rows(m, rows)).expect("finite operator"),
        (None, None) => unreachable!("dense form required"),
    }
}

/// `κ̃(ℓ) = max_{|Λ₁| = |Λ₂| = ℓ} dim(W_Λ₁ + W_Λ₂)` by exhaustive enumeration of pairs.
pub fn kappa_tilde_brute_force(op: &AnalysisOperator, l: usize) -> Result<usize> {
    let p = op.p();
    if l > p {
        return Err(invalid(format!("cosparsity {l} exceeds the {p} rows of the operator")));
    }
    let count = binomial(p, l);
    guard(count * count)?;
    let dense = if op.pixel_graph().is_some() && !op.is_restricted() {
        None
    } else {
        Some(op.to_dense()?)
    };
    let mut subsets = Vec::new();
    let mut c: Vec<usize> = (0..l).collect();
    loop {
        subsets.push(c.clone());
        if l == 0 || !next_combination(&mut c, p) {
            break;
        }
    }
    let dims: Vec<usize> = subsets.iter().map(|s| subspace_dim(op, dense.as_ref(), s)).collect();
    let best = (0..subsets.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0;
            for j in i..subsets.len() {
                let mut union: Vec<usize> = subsets[i].iter().chain(&subsets[j]).copied().collect();
                union.sort_unstable();
                union.dedup();
                // dim(W₁ + W₂) = dim W₁ + dim W₂ − dim(W₁ ∩ W₂), W₁ ∩ W₂ = W_{Λ₁ ∪ Λ₂}
                let inter = subspace_dim(op, dense.as_ref(), &union);
                best = best.max(dims[i] + dims[j] - inter);
            }
            best
        })
        .max()
        .unwrap_or(0);
    Ok(best)
}
