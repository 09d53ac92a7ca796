//! Acceptance suite. Runs without the libtest harness so each criterion prints
//! one uncaptured PASS/FAIL line; the process fails if any criterion fails.
//!
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use cosparse::guarantees::{erc_analysis, gap_relation_residual};
use cosparse::harness::{
    phantom_stats, run_phantom_recovery, run_phase_diagram, shepp_logan_phantom_variant, PhantomAlgorithm,
    PhantomConfig, PhantomVariant, PhaseAlgorithm, PhaseConfig, PhaseGrid,
};
use cosparse::model::{
    cosupport_of, generate_cosparse_signal, kappa_brute_force, kappa_dif_bounds, DEFAULT_ZERO_TOL,
};
use cosparse::numerics::{
    cg_least_squares, null_space_basis, op_norm_1_1, op_norm_inf_inf, pseudo_inverse,
};
use cosparse::operators::{
    finite_difference_2d, gaussian_matrix, gaussian_measurement, radial_fourier_system,
    random_tight_frame_operator, AnalysisOperator,
};
use cosparse::solvers::{analysis_l1_solve_with, debias, gap_solve, GapConfig, L1Config};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_err(x: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    (x - truth).norm() / truth.norm()
}

fn phantom_counts() -> Outcome {
    let mut pinned = None;
    let mut seen = Vec::new();
    for v in [PhantomVariant::Original, PhantomVariant::Modified] {
        let img = shepp_logan_phantom_variant(256, v).unwrap();
        let s = phantom_stats(&img, 256).unwrap();
        seen.push(format!(
            "{v:?}: nonzero {}, regions {}, isolated {}, subspace dim {}",
            s.nonzero_differences, s.regions, s.isolated_pixels, s.subspace_dim
        ));
        if pinned.is_none() && (s.nonzero_differences, s.regions, s.subspace_dim) == (2546, 14, 14) {
            pinned = Some(v);
        }
    }
    let head = match pinned {
        Some(v) => format!("pinned {v:?}"),
        None => "no variant gives (2546, 14, 14)".into(),
    };
    outcome(pinned.is_some(), format!("{head}; {}", seen.join("; ")))
}

fn radial_mask() -> Outcome {
    let m = radial_fourier_system(256, 12).unwrap().m();
    let dev = (m as f64 - 3032.0) / 3032.0;
    outcome(dev.abs() <= 0.02, format!("m = {m}, deviation {:+.3}% from 3032 (allowed 2%)", 100.0 * dev))
}

fn phantom_desk_recovery() -> Outcome {
    let (n, lines) = (64, 13);
    let img = shepp_logan_phantom_variant(n, PhantomVariant::Original).unwrap();
    let s = phantom_stats(&img, n).unwrap();
    let need = 2 * n * n - s.cosparsity;
    let r = run_phantom_recovery(&PhantomConfig::new(n, lines, PhantomAlgorithm::Gap)).unwrap();
    let pass = r.m >= need && r.exact && r.relative_error < 1e-6;
    outcome(
        pass,
        format!(
            "N = {n}, L = {lines}: m = {} >= 2d - l = {need}; relative error {:.2e}, SNR {:.0} dB, status {}",
            r.m, r.relative_error, r.snr_db, r.status
        ),
    )
}

fn kappa_bounds_lattice() -> Outcome {
    let op = finite_difference_2d(4).unwrap();
    let mut bad = Vec::new();
    for l in 5..=24 {
        let k = kappa_brute_force(&op, l).unwrap() as f64;
        let b = kappa_dif_bounds(16, l).unwrap();
        if !(b.lower.unwrap() <= k && k <= b.upper) {
            bad.push(l);
        }
    }
    outcome(bad.is_empty(), format!("l in [5, 24] on the 4x4 lattice; violations at {bad:?}"))
}

fn kappa_general_position_exact() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (p, d) in [(3, 2), (4, 3), (6, 4), (7, 5), (8, 6), (8, 4), (6, 6)] {
        for seed in 0..3u64 {
            let op = AnalysisOperator::from_dense(gaussian_matrix(p, d, 1000 * p as u64 + 10 * d as u64 + seed)).unwrap();
            for l in 0..=p {
                checked += 1;
                if kappa_brute_force(&op, l).unwrap() != d.saturating_sub(l) {
                    bad.push((p, d, l));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("{checked} (operator, l) pairs with d <= 6, p <= 8; mismatches {bad:?}"))
}

/// Shapes `(m, d, p, l)` within `(15, 20, 24)`.
const SMALL_SHAPES: [(usize, usize, usize, usize); 5] =
    [(14, 16, 20, 15), (15, 20, 24, 19), (13, 16, 20, 15), (8, 10, 12, 9), (15, 20, 20, 18)];

struct Small {
    omega: AnalysisOperator,
    m: cosparse::operators::MeasurementSystem,
    x0: DVector<f64>,
    cos: cosparse::model::Cosupport,
    y: DVector<f64>,
}

fn small_instance(shape: (usize, usize, usize, usize), seed: u64) -> Small {
    let (m, d, p, l) = shape;
    let omega = random_tight_frame_operator(p, d, seed).unwrap();
    let sig = generate_cosparse_signal(&omega, l, seed ^ 0x5EED).unwrap();
    let m = gaussian_measurement(m, d, seed.wrapping_mul(31).wrapping_add(7)).unwrap();
    let y = m.apply(&sig.x).unwrap();
    Small { omega, m, x0: sig.x, cos: sig.cosupport, y }
}

fn guarantee_chain() -> Outcome {
    let mut instances = 0;
    let mut certified = 0;
    let mut gap_fail = Vec::new();
    let (mut l1_tried, mut l1_fail) = (0, Vec::new());
    for (k, &shape) in SMALL_SHAPES.iter().enumerate() {
        for t in 0..50u64 {
            let seed = 60_000 + 1000 * k as u64 + t;
            let inst = small_instance(shape, seed);
            instances += 1;
            let erc = erc_analysis(&inst.omega, &inst.cos, &inst.m).unwrap();
            if erc.value >= 1.0 {
                continue;
            }
            certified += 1;
            let r = gap_solve(&inst.m, &inst.y, &inst.omega, &GapConfig::default()).unwrap();
            if rel_err(&r.x_hat, &inst.x0) > 1e-6 {
                gap_fail.push(seed);
            }
            if l1_tried < 50 {
                l1_tried += 1;
                let raw = analysis_l1_solve_with(&inst.m, &inst.y, &inst.omega, &L1Config::default()).unwrap();
                let r = debias(&raw.x, &inst.omega, &inst.m, &inst.y, DEFAULT_ZERO_TOL).unwrap();
                if rel_err(&r.x_hat, &inst.x0) > 1e-6 {
                    l1_fail.push(seed);
                }
            }
        }
    }
    let pass = instances >= 200 && certified > 0 && gap_fail.is_empty() && l1_tried == 50 && l1_fail.is_empty();
    outcome(
        pass,
        format!(
            "{instances} instances, {certified} with erc < 1; gap failures {gap_fail:?}; \
             l1+debias on {l1_tried} certified instances, failures {l1_fail:?}"
        ),
    )
}

fn relation_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for t in 0..100u64 {
        let shape = SMALL_SHAPES[t as usize % SMALL_SHAPES.len()];
        let inst = small_instance(shape, 90_000 + t);
        let c = gap_relation_residual(&inst.omega, &inst.cos, &inst.m, &inst.y, &inst.x0).unwrap();
        worst = worst.max(c.value);
        count += 1;
    }
    outcome(worst <= 1e-8, format!("{count} instances, largest residual {worst:.2e} (limit 1e-8)"))
}

fn erc_block_signal() -> Outcome {
    let n = 32;
    let omega = finite_difference_2d(n).unwrap();
    let x = DVector::from_fn(n * n, |i, _| if i / n < 16 && i % n < 16 { 1.0 } else { 0.0 });
    let cos = cosupport_of(&omega, &x, DEFAULT_ZERO_TOL).unwrap();
    let boundary = omega.p() - cos.len();
    let mut below = 0;
    let mut max: f64 = 0.0;
    for seed in 0..100u64 {
        let m = gaussian_measurement(640, n * n, 7_000 + seed).unwrap();
        let v = erc_analysis(&omega, &cos, &m).unwrap().value;
        below += (v < 1.0) as usize;
        max = max.max(v);
    }
    outcome(
        below >= 95 && boundary == 32,
        format!("|boundary| = {boundary}; erc < 1 in {below}/100 seeds; largest value {max:.3} (reference 0.726, informational)"),
    )
}

/// Three-cell moving average along `ρ` over the non-NA cells of row `i`.
fn smoothed_row(grid: &PhaseGrid, alg: PhaseAlgorithm, i: usize, nr: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..nr).filter_map(|j| grid.rate(alg, i, j)).collect();
    (0..raw.len())
        .map(|j| {
            let lo = j.saturating_sub(1);
            let hi = (j + 1).min(raw.len() - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Rows with `δ` at or below this value form the dead zone; frozen from a
/// 20-trial pilot at seed 2024 (all rates zero for `δ ≤ 0.5`, nonzero from
/// `δ = 0.625`). The acceptance run uses a different seed.
const DEAD_ZONE_MAX_DELTA: f64 = 0.5;
const PHASE_SEED: u64 = 20_250;

fn phase_diagram_shape() -> Outcome {
    let algs = vec![PhaseAlgorithm::Gap, PhaseAlgorithm::L1];
    let cfg = PhaseConfig::smoke(2.0, algs.clone(), PHASE_SEED);
    let grid = run_phase_diagram(&cfg).unwrap();
    let (nd, nr, trials) = (cfg.deltas.len(), cfg.rhos.len(), cfg.trials as f64);

    let slack = 2.0 / trials;
    let mut rises = Vec::new();
    for &alg in &algs {
        for i in 0..nd {
            let s = smoothed_row(&grid, alg, i, nr);
            for w in s.windows(2) {
                if w[1] > w[0] + slack {
                    rises.push((alg.name(), cfg.deltas[i]));
                }
            }
        }
    }
    let mut dead = Vec::new();
    for &alg in &algs {
        for i in (0..nd).filter(|&i| cfg.deltas[i] <= DEAD_ZONE_MAX_DELTA) {
            for j in 0..nr {
                if grid.rate(alg, i, j).is_some_and(|r| r >= 0.1) {
                    dead.push((alg.name(), cfg.deltas[i], cfg.rhos[j]));
                }
            }
        }
    }
    let noise = 2.0 * (0.5 / trials).sqrt();
    let mut worse = Vec::new();
    let (mut gap_total, mut l1_total) = (0.0, 0.0);
    for i in 0..nd {
        for j in 0..nr {
            if let (Some(g), Some(l)) = (grid.rate(PhaseAlgorithm::Gap, i, j), grid.rate(PhaseAlgorithm::L1, i, j)) {
                gap_total += g;
                l1_total += l;
                if g < l - noise {
                    worse.push((cfg.deltas[i], cfg.rhos[j]));
                }
            }
        }
    }
    let pass = rises.is_empty() && dead.is_empty() && worse.is_empty();
    outcome(
        pass,
        format!(
            "(a) rises beyond {slack:.2} in smoothed rows: {rises:?}; (b) dead-zone cells (delta <= {DEAD_ZONE_MAX_DELTA}) \
             with rate >= 0.1: {dead:?}; (c) cells with gap < l1 - {noise:.3}: {worse:?}; \
             summed rates gap {gap_total:.2} vs l1 {l1_total:.2}"
        ),
    )
}

fn numerics_substrate() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let mut mp_worst: f64 = 0.0;
    for seed in 0..60u64 {
        let r = 1 + (seed as usize * 7) % 20;
        let c = 1 + (seed as usize * 13) % 20;
        let mut a = gaussian_matrix(r, c, seed);
        if seed % 3 == 0 && c > 1 {
            // rank deficient: duplicate a column
            let col = a.column(0).into_owned();
            a.set_column(c - 1, &col);
        }
        let p = pseudo_inverse(&a).unwrap();
        let scale = a.norm() * p.norm();
        let e = [
            (&a * &p * &a - &a).norm() / a.norm(),
            (&p * &a * &p - &p).norm() / p.norm(),
            ((&a * &p) - (&a * &p).transpose()).norm() / scale,
            ((&p * &a) - (&p * &a).transpose()).norm() / scale,
        ];
        mp_worst = e.iter().cloned().fold(mp_worst, f64::max);
    }
    ok &= mp_worst <= 1e-9;
    notes.push(format!("Moore-Penrose worst {mp_worst:.1e}"));

    let (mut ns_res, mut ns_orth): (f64, f64) = (0.0, 0.0);
    for seed in 0..50u64 {
        let d = 2 + (seed as usize * 5) % 30;
        let m = 1 + (seed as usize * 3) % (d - 1);
        let mm = gaussian_matrix(m, d, 500 + seed);
        let w = null_space_basis(&mm).unwrap();
        let max_m = mm.amax();
        ns_res = ns_res.max((&mm * &w).amax() / max_m);
        ns_orth = ns_orth.max((w.tr_mul(&w) - DMatrix::identity(w.ncols(), w.ncols())).amax());
    }
    ok &= ns_res <= 1e-10 && ns_orth <= 1e-10;
    notes.push(format!("null space residual {ns_res:.1e}, orthonormality {ns_orth:.1e}"));

    let mut duality: f64 = 0.0;
    for seed in 0..50u64 {
        let a = gaussian_matrix(1 + seed as usize % 9, 1 + (seed as usize * 5) % 11, 900 + seed);
        let x = op_norm_1_1(&a).unwrap();
        let y = op_norm_inf_inf(&a.transpose()).unwrap();
        duality = duality.max((x - y).abs() / x);
    }
    ok &= duality <= 1e-15;
    notes.push(format!("norm duality {duality:.1e}"));

    let mut cg_worst: f64 = 0.0;
    for seed in 0..10u64 {
        let (r, c) = (100 - seed as usize * 3, 50 - seed as usize * 2);
        let a = gaussian_matrix(r, c, 1300 + seed);
        let b = DVector::from_fn(r, |i, _| ((i as f64) * 0.37 + seed as f64).sin());
        // independent oracle: Cholesky of the normal equations
        let xs = (a.tr_mul(&a)).cholesky().unwrap().solve(&a.tr_mul(&b));
        let out = cg_least_squares(&a, &b, 1e-12, 10_000).unwrap();
        cg_worst = cg_worst.max(rel_err(&out.x, &xs));
    }
    ok &= cg_worst <= 1e-6;
    notes.push(format!("CG vs normal equations {cg_worst:.1e}"));
    outcome(ok, notes.join("; "))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "phantom cosparsity counts", phantom_counts),
    (2, "radial mask count", radial_mask),
    (3, "phantom recovery at desk scale", phantom_desk_recovery),
    (4, "kappa bounds on the 4x4 lattice", kappa_bounds_lattice),
    (5, "general-position kappa", kappa_general_position_exact),
    (6, "guarantee chain", guarantee_chain),
    (7, "initializer relation identity", relation_identity),
    (8, "erc for the block signal", erc_block_signal),
    (9, "phase-diagram shape", phase_diagram_shape),
    (10, "numerics substrate", numerics_substrate),
];

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    // libtest flags such as --list are accepted and ignored
    if std::env::args().any(|a| a == "--list") {
        for (id, name, _) in CRITERIA {
            println!("criterion_{id}: test ({name})");
        }
        return;
    }
    let mut failed = Vec::new();
    for (id, name, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {id:2} {} {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
