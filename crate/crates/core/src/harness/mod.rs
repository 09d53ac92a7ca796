//! Experiments: phase-transition diagrams, phantom recovery from radial
//! Fourier samples, and SNR sweeps over the number of radial lines.

mod phantom;
mod phase;
mod recovery;
mod seed;

pub use phantom::{
    phantom_stats, shepp_logan_phantom, shepp_logan_phantom_variant, PhantomStats, PhantomVariant,
};
pub use phase::{
    cell_shape, run_phase_diagram, CellShape, PhaseAlgorithm, PhaseCell, PhaseConfig, PhaseGrid,
};
pub use recovery::{
    run_phantom_recovery, run_snr_vs_lines, snr_db, snr_rows_to_csv, PhantomAlgorithm,
    PhantomConfig, PhantomRun, SnrRow, EXACT_REL_ERROR, SNR_SENTINEL_DB,
};
pub use seed::{derive_seed, splitmix64};
