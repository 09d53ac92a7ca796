//! Uniqueness verdicts for general-position and finite-difference operators.

use cosparse::model::{kappa_dif_bounds, kappa_general_position, uniqueness_verdict, KappaValue};

pub fn main() {
    let (d, l) = (200, 180);
    for m in [15, 20, 30, 40, 50] {
        let v = uniqueness_verdict(KappaValue::Exact(kappa_general_position(d, l) as f64), m);
        println!("general position d = {d}, l = {l}, m = {m}: known {:?}, unknown {:?}", v.known_unique, v.unknown_unique);
    }
    let kappa: KappaValue = kappa_dif_bounds(256 * 256, 128_014).expect("bounds").into();
    for m in [2000, 2552, 3036, 3058] {
        let v = uniqueness_verdict(kappa, m);
        println!(
            "dif N = 256, l = 128014, m = {m}: known {:?}, unknown {:?} (unknown needs m in {:?})",
            v.known_unique, v.unknown_unique, v.thresholds.unknown_min_m
        );
    }
}
