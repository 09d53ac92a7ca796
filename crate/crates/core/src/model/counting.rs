use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceModel {
    /// `k`-sparse combinations of `n` atoms: `C(n, k)` subspaces.
    Synthesis,
    /// `ℓ`-cosparse signals for `p` rows: `C(p, ℓ)` subspaces.
    Analysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceCount {
    pub model: SubspaceModel,
    pub n: usize,
    pub k: usize,
    /// `log₂ C(n, k)` from the log-gamma function.
    pub exact_log2: f64,
    /// `n·H(k/n)` with the binary entropy `H`.
    pub entropy_log2: f64,
}

/// Binary entropy `H(t) = −t log₂ t − (1−t) log₂(1−t)`, with `H(0) = H(1) = 0`.
pub fn binary_entropy(t: f64) -> f64 {
    let term = |u: f64| if u <= 0.0 { 0.0 } else { -u * u.log2() };
    term(t) + term(1.0 - t)
}

/// Number of subspaces in the union, as `log₂`.
pub fn subspace_count_log2(model: SubspaceModel, n: usize, k: usize) -> Result<SubspaceCount> {
    if k > n {
        return Err(invalid(format!("binomial C({n}, {k}) needs k <= n")));
    }
    let lg = |x: usize| ln_gamma(x as f64 + 1.0);
    let exact_log2 = (lg(n) - lg(k) - lg(n - k)) / std::f64::consts::LN_2;
    let entropy_log2 = if n == 0 {
        0.0
    } else {
        n as f64 * binary_entropy(k as f64 / n as f64)
    };
    Ok(SubspaceCount {
        model,
        n,
        k,
        exact_log2: exact_log2.max(0.0),
        entropy_log2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kappa::binomial;

    #[test]
    fn entropy_approximation_is_close() {
        let c = subspace_count_log2(SubspaceModel::Analysis, 400, 200).unwrap();
        assert_eq!(c.entropy_log2, 400.0);
        assert!((c.entropy_log2 - c.exact_log2).abs() / c.exact_log2 < 0.02);
    }

    #[test]
    fn exact_matches_product_formula() {
        for (n, k) in [(10, 3), (24, 12), (50, 1), (7, 7)] {
            let c = subspace_count_log2(SubspaceModel::Synthesis, n, k).unwrap();
            assert!((c.exact_log2 - binomial(n, k).log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_and_small_k() {
        let c = subspace_count_log2(SubspaceModel::Synthesis, 100, 0).unwrap();
        assert_eq!(c.exact_log2, 0.0);
        assert_eq!(c.entropy_log2, 0.0);
        // for k ≪ n the count grows like k·log₂(n/k)
        let n = 100_000;
        for k in [5, 10, 20] {
            let c = subspace_count_log2(SubspaceModel::Synthesis, n, k).unwrap();
            let trend = k as f64 * (n as f64 / k as f64).log2();
            assert!(c.exact_log2 <= trend + k as f64 * std::f64::consts::LOG2_E + 1e-9);
            assert!(c.exact_log2 >= trend);
        }
        assert!(subspace_count_log2(SubspaceModel::Analysis, 3, 4).is_err());
    }
}
