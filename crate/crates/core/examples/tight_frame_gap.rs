//! Greedy analysis pursuit on a random tight frame with Gaussian measurements.

use cosparse::model::generate_cosparse_signal;
use cosparse::operators::{gaussian_measurement, random_tight_frame_operator};
use cosparse::solvers::{gap_solve, GapConfig};

pub fn main() {
    let (d, p, m, l) = (120, 144, 80, 110);
    let omega = random_tight_frame_operator(p, d, 1).expect("tight frame");
    let sig = generate_cosparse_signal(&omega, l, 2).expect("signal");
    let meas = gaussian_measurement(m, d, 3).expect("measurement");
    let y = meas.apply(&sig.x).expect("measure");

    let r = gap_solve(&meas, &y, &omega, &GapConfig::default()).expect("gap");
    let err = (&r.x_hat - &sig.x).norm() / sig.x.norm();
    println!("d = {d}, p = {p}, m = {m}, cosparsity = {l}");
    println!(
        "gap: {} after {} iterations, |cosupport| = {}, relative error {err:.2e}",
        r.status.as_str(),
        r.iterations,
        r.estimated_cosupport.len()
    );
    assert!(err < 1e-6, "recovery failed");
}
