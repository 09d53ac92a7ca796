//! A coarse phase-transition diagram for GAP and analysis ℓ1.

use cosparse::harness::{run_phase_diagram, PhaseAlgorithm, PhaseConfig};

pub fn main() {
    let algs = vec![PhaseAlgorithm::Gap, PhaseAlgorithm::L1];
    let mut cfg = PhaseConfig::smoke(1.2, algs.clone(), 5);
    cfg.d = 40;
    cfg.trials = 4;
    cfg.deltas = vec![0.25, 0.5, 0.75];
    cfg.rhos = vec![0.25, 0.5, 0.75];
    let grid = run_phase_diagram(&cfg).expect("phase diagram");
    for alg in algs {
        println!("{} (rows delta, columns rho {:?})", alg.name(), cfg.rhos);
        for (i, delta) in cfg.deltas.iter().enumerate() {
            let row: Vec<String> = (0..cfg.rhos.len())
                .map(|j| grid.rate(alg, i, j).map(|r| format!("{r:.2}")).unwrap_or_else(|| "NA".into()))
                .collect();
            println!("  {delta:.2}: {}", row.join(" "));
        }
    }
    print!("{}", grid.to_csv(PhaseAlgorithm::Gap).expect("csv"));
}
