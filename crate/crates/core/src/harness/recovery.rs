use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::phantom::{shepp_logan_phantom_variant, PhantomVariant};
use crate::error::Result;
use crate::io::{write_pgm, write_raw_f64};
use crate::model::{cosupport_of, Cosupport, DEFAULT_ZERO_TOL};
use crate::numerics::LinearMap;
use crate::operators::{radial_fourier_system, AnalysisOperator, MeasurementSystem, PixelGraph};
use crate::solvers::{analysis_l1_solve_with, debias, gap_solve, GapConfig, L1Config};

/// SNR reported for a recovery with relative error below [`EXACT_REL_ERROR`].
pub const SNR_SENTINEL_DB: f64 = 300.0;
/// Relative error that counts as exact recovery.
pub const EXACT_REL_ERROR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomAlgorithm {
    Gap,
    /// Analysis ℓ1 (TV) followed by debiasing.
    L1,
    /// `Mᵀy` scaled by the gain minimizing `‖x − g·Mᵀy‖₂`.
    Backprojection,
}

impl PhantomAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            PhantomAlgorithm::Gap => "gap",
            PhantomAlgorithm::L1 => "l1",
            PhantomAlgorithm::Backprojection => "backprojection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    pub n: usize,
    pub lines: usize,
    pub algorithm: PhantomAlgorithm,
    #[serde(default)]
    pub variant: PhantomVariant,
    pub gap: GapConfig,
    pub l1: L1Config,
}

impl PhantomConfig {
    /// Matrix-free GAP and primal-dual ℓ1 settings.
    pub fn new(n: usize, lines: usize, algorithm: PhantomAlgorithm) -> Self {
        Self {
            n,
            lines,
            algorithm,
            variant: PhantomVariant::Original,
            gap: GapConfig::matrix_free(),
            l1: L1Config {
                matrix_free: true,
                max_iter: 20_000,
                ..L1Config::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhantomRun {
    pub n: usize,
    pub lines: usize,
    pub m: usize,
    pub algorithm: PhantomAlgorithm,
    /// `20·log₁₀(‖x‖/‖x̂ − x‖)`, or [`SNR_SENTINEL_DB`] when `exact`.
    pub snr_db: f64,
    pub exact: bool,
    pub relative_error: f64,
    /// Solver status, or `direct` / `degenerate` for runs that needed no solver.
    pub status: String,
    pub iterations: usize,
    pub truth: DVector<f64>,
    pub image: DVector<f64>,
    /// Pixels starting a nonzero difference of the phantom that the estimate
    /// treats as zero (`(r, c)` marks the edge to its right or below).
    pub missed: Vec<bool>,
    pub warnings: Vec<String>,
}

impl PhantomRun {
    pub fn missed_count(&self) -> usize {
        self.missed.iter().filter(|&&b| b).count()
    }

    /// Writes `recovered.pgm` (16-bit), `recovered.f64`, `truth.pgm` and
    /// `missed.pgm` under `dir`; returns the paths.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let n = self.n;
        let lo = self.truth.min();
        let hi = self.truth.max();
        let files = [
            dir.join("recovered.pgm"),
            dir.join("recovered.f64"),
            dir.join("truth.pgm"),
            dir.join("missed.pgm"),
        ];
        write_pgm(&files[0], self.image.as_slice(), n, n, (lo, hi), true)?;
        write_raw_f64(&files[1], self.image.as_slice())?;
        write_pgm(&files[2], self.truth.as_slice(), n, n, (lo, hi), true)?;
        let mask: Vec<f64> = self.missed.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        write_pgm(&files[3], &mask, n, n, (0.0, 1.0), false)?;
        Ok(files.to_vec())
    }
}

pub fn snr_db(truth: &DVector<f64>, estimate: &DVector<f64>) -> (f64, bool, f64) {
    let err = (estimate - truth).norm();
    let rel = err / truth.norm();
    if rel < EXACT_REL_ERROR {
        (SNR_SENTINEL_DB, true, rel)
    } else {
        (20.0 * (1.0 / rel).log10(), false, rel)
    }
}

fn missed_mask(graph: &PixelGraph, truth_cos: &Cosupport, est_cos: &Cosupport) -> Vec<bool> {
    let mut mask = vec![false; graph.vertex_count()];
    for e in est_cos.indices() {
        if !truth_cos.contains(*e) {
            mask[graph.edge(*e).0] = true;
        }
    }
    mask
}

/// Measures the phantom with `L` radial lines and reconstructs it.
pub fn run_phantom_recovery(cfg: &PhantomConfig) -> Result<PhantomRun> {
    let n = cfg.n;
    let truth = shepp_logan_phantom_variant(n, cfg.variant)?;
    let omega = AnalysisOperator::finite_difference_2d(n)?;
    let graph = PixelGraph::new(n);
    let truth_cos = cosupport_of(&omega, &truth, DEFAULT_ZERO_TOL)?;
    if cfg.lines == 0 {
        let image = DVector::zeros(n * n);
        let (snr, exact, rel) = snr_db(&truth, &image);
        return Ok(PhantomRun {
            n,
            lines: 0,
            m: 0,
            algorithm: cfg.algorithm,
            snr_db: snr,
            exact,
            relative_error: rel,
            status: "degenerate".into(),
            iterations: 0,
            missed: missed_mask(&graph, &truth_cos, &Cosupport::full(omega.p())),
            truth,
            image,
            warnings: vec!["no measurements: the estimate is the zero image".into()],
        });
    }
    let m = radial_fourier_system(n, cfg.lines)?;
    let y = m.apply(&truth)?;
    let (image, est_cos, status, iterations, warnings) = reconstruct(cfg, &m, &omega, &y, &truth)?;
    let (snr, exact, rel) = snr_db(&truth, &image);
    Ok(PhantomRun {
        n,
        lines: cfg.lines,
        m: m.m(),
        algorithm: cfg.algorithm,
        snr_db: snr,
        exact,
        relative_error: rel,
        status,
        iterations,
        missed: missed_mask(&graph, &truth_cos, &est_cos),
        truth,
        image,
        warnings,
    })
}

type Reconstruction = (DVector<f64>, Cosupport, String, usize, Vec<String>);

fn reconstruct(
    cfg: &PhantomConfig,
    m: &MeasurementSystem,
    omega: &AnalysisOperator,
    y: &DVector<f64>,
    truth: &DVector<f64>,
) -> Result<Reconstruction> {
    let est = |x: &DVector<f64>| cosupport_of(omega, x, DEFAULT_ZERO_TOL);
    if cfg.algorithm == PhantomAlgorithm::Backprojection {
        let bp = LinearMap::apply_adjoint(m, y);
        let nb = bp.norm_squared();
        let gain = if nb > 0.0 { bp.dot(truth) / nb } else { 0.0 };
        let x = bp * gain;
        let c = est(&x)?;
        return Ok((x, c, "direct".into(), 0, Vec::new()));
    }
    if m.m() >= m.d() {
        let x = m.min_norm_solution(y)?;
        let c = est(&x)?;
        return Ok((x, c, "direct".into(), 0, Vec::new()));
    }
    match cfg.algorithm {
        PhantomAlgorithm::Gap => {
            let r = gap_solve(m, y, omega, &cfg.gap)?;
            Ok((r.x_hat, r.estimated_cosupport, r.status.as_str().into(), r.iterations, r.warnings))
        }
        PhantomAlgorithm::L1 => {
            let raw = analysis_l1_solve_with(m, y, omega, &cfg.l1)?;
            let mut warnings = Vec::new();
            if !raw.converged {
                warnings.push(format!("l1 stopped at its cap of {} iterations", raw.iterations));
            }
            let r = debias(&raw.x, omega, m, y, DEFAULT_ZERO_TOL)?;
            warnings.extend(r.warnings);
            let status = if raw.converged { "converged" } else { "max-iter" };
            Ok((r.x_hat, r.estimated_cosupport, status.into(), raw.iterations, warnings))
        }
        PhantomAlgorithm::Backprojection => unreachable!("handled above"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub n: usize,
    pub lines: usize,
    pub m: usize,
    pub algorithm: PhantomAlgorithm,
    pub snr_db: f64,
    pub status: String,
}

/// One phantom recovery per `(L, algorithm)`. A failing run is recorded with
/// status `error: …` and SNR `NaN` and the sweep continues.
pub fn run_snr_vs_lines(
    n: usize,
    lines: &[usize],
    algorithms: &[PhantomAlgorithm],
    base: &PhantomConfig,
) -> Vec<SnrRow> {
    use rayon::prelude::*;
    let jobs: Vec<(usize, PhantomAlgorithm)> =
        lines.iter().flat_map(|&l| algorithms.iter().map(move |&a| (l, a))).collect();
    jobs.par_iter()
        .map(|&(l, a)| {
            let cfg = PhantomConfig { n, lines: l, algorithm: a, ..base.clone() };
            match run_phantom_recovery(&cfg) {
                Ok(r) => SnrRow { n, lines: l, m: r.m, algorithm: a, snr_db: r.snr_db, status: r.status },
                Err(e) => SnrRow {
                    n,
                    lines: l,
                    m: if l == 0 { 0 } else { radial_fourier_system(n, l).map(|s| s.m()).unwrap_or(0) },
                    algorithm: a,
                    snr_db: f64::NAN,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect()
}

/// CSV with columns `N,L,m,algorithm,snr_db,status`.
pub fn snr_rows_to_csv(rows: &[SnrRow]) -> String {
    let mut s = String::from("N,L,m,algorithm,snr_db,status\n");
    for r in rows {
        let status = r.status.replace(',', ";");
        writeln!(s, "{},{},{},{},{},{}", r.n, r.lines, r.m, r.algorithm.name(), r.snr_db, status)
            .expect("write to String");
    }
    s
}
