//! Head phantom from radial Fourier lines with matrix-free GAP.

use cosparse::harness::{phantom_stats, run_phantom_recovery, shepp_logan_phantom, PhantomAlgorithm, PhantomConfig};

pub fn main() {
    let n = 64;
    let img = shepp_logan_phantom(n).expect("phantom");
    let s = phantom_stats(&img, n).expect("stats");
    println!(
        "N = {n}: {} nonzero differences, cosparsity {}, {} regions, subspace dimension {}",
        s.nonzero_differences, s.cosparsity, s.regions, s.subspace_dim
    );
    let need = 2 * n * n - s.cosparsity;
    let lines = 13;
    let r = run_phantom_recovery(&PhantomConfig::new(n, lines, PhantomAlgorithm::Gap)).expect("recovery");
    println!(
        "L = {lines}: m = {} (sufficient count {need}), SNR {:.1} dB, relative error {:.2e}, {} iterations",
        r.m, r.snr_db, r.relative_error, r.iterations
    );
    let dir = std::env::temp_dir().join("cosparse_phantom_example");
    let files = r.write_outputs(&dir).expect("outputs");
    println!("wrote {} files under {}", files.len(), dir.display());
    assert!(r.exact);
}
