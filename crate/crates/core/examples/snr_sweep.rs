//! Phantom SNR against the number of radial lines.

use cosparse::harness::{run_snr_vs_lines, snr_rows_to_csv, PhantomAlgorithm, PhantomConfig};

pub fn main() {
    let n = 32;
    let base = PhantomConfig::new(n, 1, PhantomAlgorithm::Gap);
    let algs = [PhantomAlgorithm::Gap, PhantomAlgorithm::Backprojection];
    let rows = run_snr_vs_lines(n, &[4, 8, 12], &algs, &base);
    print!("{}", snr_rows_to_csv(&rows));
}
