//! κ(ℓ) for the 2D finite-difference operator: exhaustive values against the
//! interval bounds, and the bounds at phantom scale.

use cosparse::model::{kappa_brute_force, kappa_dif_bounds, KappaValue};
use cosparse::operators::finite_difference_2d;

pub fn main() {
    let n = 4;
    let op = finite_difference_2d(n).expect("dif");
    println!("N = {n}: d = {}, p = {}", op.d(), op.p());
    for l in 5..=op.p() {
        let k = kappa_brute_force(&op, l).expect("enumeration");
        let b = kappa_dif_bounds(op.d(), l).expect("bounds");
        let lo = b.lower.expect("l >= 5");
        println!("  l = {l:2}: {lo:6.2} <= kappa = {k:2} <= {:5.1}", b.upper);
        assert!(lo <= k as f64 && k as f64 <= b.upper);
    }
    let b = kappa_dif_bounds(256 * 256, 128_014).expect("bounds");
    let (lo, hi) = KappaValue::from(b).integer_range();
    println!("N = 256, l = 128014: {:.3} <= kappa <= {:.1}, integer range [{lo}, {hi}]", b.lower.unwrap(), b.upper);
}
