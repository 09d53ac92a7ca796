//! Analysis ℓ1 minimization followed by debiasing on the recovered cosupport.

use cosparse::model::{generate_cosparse_signal, DEFAULT_ZERO_TOL};
use cosparse::operators::{gaussian_measurement, random_tight_frame_operator};
use cosparse::solvers::{analysis_l1_solve_with, debias, L1Config};

pub fn main() {
    let (d, p, m, l) = (120, 144, 90, 115);
    let omega = random_tight_frame_operator(p, d, 11).expect("tight frame");
    let sig = generate_cosparse_signal(&omega, l, 12).expect("signal");
    let meas = gaussian_measurement(m, d, 13).expect("measurement");
    let y = meas.apply(&sig.x).expect("measure");

    let raw = analysis_l1_solve_with(&meas, &y, &omega, &L1Config::default()).expect("l1");
    let raw_err = (&raw.x - &sig.x).norm() / sig.x.norm();
    println!(
        "l1: converged {} in {} iterations, objective {:.6}, relative error {raw_err:.2e}",
        raw.converged, raw.iterations, raw.objective
    );
    let r = debias(&raw.x, &omega, &meas, &y, DEFAULT_ZERO_TOL).expect("debias");
    let err = (&r.x_hat - &sig.x).norm() / sig.x.norm();
    println!(
        "debiased: |cosupport| = {}, indeterminate {}, relative error {err:.2e}",
        r.estimated_cosupport.len(),
        r.indeterminate
    );
    assert!(err < 1e-6, "recovery failed");
}
