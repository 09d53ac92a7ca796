//! Recovery certificates for one small instance, checked against GAP.

use cosparse::guarantees::{erc_analysis, gap_one_step_check, gap_relation_residual, heuristic_row_l2, nsc_sampled};
use cosparse::model::generate_cosparse_signal;
use cosparse::operators::{gaussian_measurement, random_tight_frame_operator};
use cosparse::solvers::{gap_solve, GapConfig};

pub fn main() {
    let (m, d, p, l) = (14, 16, 20, 15);
    let mut shown = 0;
    for seed in 0..40u64 {
        let omega = random_tight_frame_operator(p, d, 100 + seed).expect("tight frame");
        let sig = generate_cosparse_signal(&omega, l, 200 + seed).expect("signal");
        let meas = gaussian_measurement(m, d, 300 + seed).expect("measurement");
        let y = meas.apply(&sig.x).expect("measure");

        let erc = erc_analysis(&omega, &sig.cosupport, &meas).expect("erc");
        if erc.holds != Some(true) {
            continue;
        }
        let nsc = nsc_sampled(&omega, &sig.cosupport, &meas, 2000, seed).expect("nsc");
        let heur = heuristic_row_l2(&omega, &sig.cosupport, &meas).expect("heuristic");
        let rel = gap_relation_residual(&omega, &sig.cosupport, &meas, &y, &sig.x).expect("relation");
        let one = gap_one_step_check(&omega, &sig.cosupport, &meas, &sig.x, 1.0).expect("one step");
        let r = gap_solve(&meas, &y, &omega, &GapConfig::default()).expect("gap");
        let err = (&r.x_hat - &sig.x).norm() / sig.x.norm();
        println!(
            "seed {seed}: erc {:.3}, nsc {:.3} (exact {}), heuristic {:.3}, relation {:.1e}, one-step {:.3}, gap error {err:.1e}",
            erc.value, nsc.value, nsc.exact, heur.value, rel.value, one.value
        );
        assert!(nsc.value <= erc.value + 1e-9);
        assert!(err < 1e-6, "erc < 1 but gap failed");
        shown += 1;
        if shown == 5 {
            break;
        }
    }
    assert!(shown > 0, "no instance with erc < 1");
}
