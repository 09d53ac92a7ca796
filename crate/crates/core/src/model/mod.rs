//! The cosparse analysis model: cosupports, signal generation, the subspace
//! dimension function `κ(ℓ)` and the uniqueness conditions built on it.

mod counting;
mod cosupport;
mod kappa;
mod signal;
mod union_find;
mod uniqueness;

pub use counting::{binary_entropy, subspace_count_log2, SubspaceCount, SubspaceModel};
pub use cosupport::Cosupport;
pub use kappa::{
    binomial, kappa_brute_force, kappa_dif_bounds, kappa_general_position,
    kappa_tilde_brute_force, KappaBounds, BRUTE_FORCE_LIMIT,
};
pub use signal::{
    cosparsity, cosupport_of, dif_components, generate_cosparse_signal,
    generate_cosparse_signal_with, project_onto_cosparse_subspace, subspace_dim_dif,
    CosparseSignal, DifComponents, DEFAULT_ZERO_TOL, GENERATION_RETRIES,
};
pub use union_find::UnionFind;
pub use uniqueness::{uniqueness_verdict, KappaValue, Thresholds, UniquenessVerdict, Verdict};
