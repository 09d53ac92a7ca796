use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seed::derive_seed;
use crate::error::{invalid, Result};
use crate::model::{generate_cosparse_signal, DEFAULT_ZERO_TOL};
use crate::numerics::least_squares_min_norm;
use crate::operators::{gaussian_measurement, random_tight_frame_operator};
use crate::solvers::{analysis_l1_solve_with, debias, gap_solve, GapConfig, L1Config};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseAlgorithm {
    Gap,
    /// Analysis ℓ1 followed by debiasing.
    L1,
}

impl PhaseAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseAlgorithm::Gap => "gap",
            PhaseAlgorithm::L1 => "l1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub sigma: f64,
    pub d: usize,
    pub deltas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<PhaseAlgorithm>,
    pub seed: u64,
    /// Relative error below which a trial counts as a recovery.
    pub success_tol: f64,
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub l1: L1Config,
}

impl PhaseConfig {
    /// `d = 200`, `δ, ρ ∈ {1/8, …, 1}`, 20 trials.
    pub fn smoke(sigma: f64, algorithms: Vec<PhaseAlgorithm>, seed: u64) -> Self {
        let grid: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();
        Self {
            sigma,
            d: 200,
            deltas: grid.clone(),
            rhos: grid,
            trials: 20,
            algorithms,
            seed,
            success_tol: 1e-6,
            gap: GapConfig::default(),
            l1: L1Config::default(),
        }
    }

    /// `d = 200`, `δ, ρ ∈ {1/16, …, 1}`, 50 trials.
    pub fn full(sigma: f64, algorithms: Vec<PhaseAlgorithm>, seed: u64) -> Self {
        let grid: Vec<f64> = (1..=16).map(|i| i as f64 / 16.0).collect();
        Self {
            deltas: grid.clone(),
            rhos: grid,
            trials: 50,
            ..Self::smoke(sigma, algorithms, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 1.0) || !self.sigma.is_finite() {
            return Err(invalid(format!("sigma must be at least 1, got {}", self.sigma)));
        }
        let in_unit = |v: &f64| *v > 0.0 && *v <= 1.0;
        if !self.deltas.iter().all(in_unit) || !self.rhos.iter().all(in_unit) {
            return Err(invalid("delta and rho grid values must lie in (0, 1]"));
        }
        if self.d == 0 || self.trials == 0 || self.algorithms.is_empty() {
            return Err(invalid("d, trials and the algorithm list must be non-empty"));
        }
        self.gap.validate()
    }
}

/// Problem sizes of one `(δ, ρ)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellShape {
    pub m: usize,
    pub l: usize,
    pub p: usize,
}

/// `m = round(δd)`, `ℓ = d − round(ρm)`, `p = round(σd)`; `None` when no
/// nonzero `ℓ`-cosparse signal exists for a tight frame in general position
/// (`ℓ ≥ d` or `ℓ > p`) or `m = 0`.
pub fn cell_shape(sigma: f64, d: usize, delta: f64, rho: f64) -> Option<CellShape> {
    let m = (delta * d as f64).round() as usize;
    let k = (rho * m as f64).round() as usize;
    let p = (sigma * d as f64).round() as usize;
    let l = d.checked_sub(k)?;
    (m > 0 && l < d && l <= p && p >= d).then_some(CellShape { m, l, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub delta: f64,
    pub rho: f64,
    pub shape: Option<CellShape>,
    /// Successes per algorithm, in the order of [`PhaseConfig::algorithms`].
    pub successes: Vec<usize>,
    /// Trials whose instance or solver raised an error (counted as failures).
    pub errors: Vec<usize>,
}

impl PhaseCell {
    pub fn rate(&self, alg: usize, trials: usize) -> Option<f64> {
        self.shape.map(|_| self.successes[alg] as f64 / trials as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub config: PhaseConfig,
    /// Row-major over `(delta, rho)`: `cells[i * rhos.len() + j]`.
    pub cells: Vec<PhaseCell>,
}

impl PhaseGrid {
    pub fn cell(&self, i: usize, j: usize) -> &PhaseCell {
        &self.cells[i * self.config.rhos.len() + j]
    }

    pub fn algorithm_index(&self, alg: PhaseAlgorithm) -> Option<usize> {
        self.config.algorithms.iter().position(|&a| a == alg)
    }

    /// Success rate of `alg` at `(δ_i, ρ_j)`, `None` for infeasible cells.
    pub fn rate(&self, alg: PhaseAlgorithm, i: usize, j: usize) -> Option<f64> {
        let a = self.algorithm_index(alg)?;
        self.cell(i, j).rate(a, self.config.trials)
    }

    /// CSV with columns `sigma,delta,rho,m,l,p,trials,successes,rate`;
    /// infeasible cells carry `NA`.
    pub fn to_csv(&self, alg: PhaseAlgorithm) -> Result<String> {
        let a = self
            .algorithm_index(alg)
            .ok_or_else(|| invalid(format!("algorithm {} was not run", alg.name())))?;
        let mut s = String::from("sigma,delta,rho,m,l,p,trials,successes,rate\n");
        let t = self.config.trials;
        for c in &self.cells {
            match c.shape {
                Some(sh) => writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    self.config.sigma,
                    c.delta,
                    c.rho,
                    sh.m,
                    sh.l,
                    sh.p,
                    t,
                    c.successes[a],
                    c.successes[a] as f64 / t as f64
                ),
                None => writeln!(s, "{},{},{},NA,NA,NA,{},NA,NA", self.config.sigma, c.delta, c.rho, t),
            }
            .expect("write to String");
        }
        Ok(s)
    }

    pub fn write_csv(&self, alg: PhaseAlgorithm, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv(alg)?)?;
        Ok(())
    }
}

/// Outcome of one trial: success per algorithm, or the error that stopped it.
fn run_trial(cfg: &PhaseConfig, shape: CellShape, seed: u64) -> std::result::Result<Vec<bool>, String> {
    let inner = || -> Result<Vec<bool>> {
        let omega = random_tight_frame_operator(shape.p, cfg.d, derive_seed(seed, &[0]))?;
        let m = gaussian_measurement(shape.m, cfg.d, derive_seed(seed, &[1]))?;
        let x0 = generate_cosparse_signal(&omega, shape.l, derive_seed(seed, &[2]))?.x;
        let y = m.apply(&x0)?;
        let ok = |x: &DVector<f64>| (x - &x0).norm() < cfg.success_tol * x0.norm();
        let mut out = Vec::with_capacity(cfg.algorithms.len());
        for alg in &cfg.algorithms {
            if shape.m >= cfg.d {
                // the measurements alone determine x
                let x = least_squares_min_norm(m.dense().expect("gaussian is dense"), &y)?;
                out.push(ok(&x));
                continue;
            }
            let x = match alg {
                PhaseAlgorithm::Gap => gap_solve(&m, &y, &omega, &cfg.gap).map(|r| r.x_hat),
                PhaseAlgorithm::L1 => analysis_l1_solve_with(&m, &y, &omega, &cfg.l1)
                    .and_then(|raw| debias(&raw.x, &omega, &m, &y, DEFAULT_ZERO_TOL))
                    .map(|r| r.x_hat),
            };
            out.push(x.map(|x| ok(&x)).unwrap_or(false));
        }
        Ok(out)
    };
    inner().map_err(|e| e.to_string())
}

/// Runs every trial of every cell on the current rayon pool. Results depend
/// only on the configuration, not on scheduling.
pub fn run_phase_diagram(cfg: &PhaseConfig) -> Result<PhaseGrid> {
    cfg.validate()?;
    let (nd, nr) = (cfg.deltas.len(), cfg.rhos.len());
    let sigma_key = cfg.sigma.to_bits();
    let jobs: Vec<(usize, usize, usize)> = (0..nd * nr)
        .flat_map(|c| (0..cfg.trials).map(move |t| (c / nr, c % nr, t)))
        .collect();
    let outcomes: Vec<Option<std::result::Result<Vec<bool>, String>>> = jobs
        .par_iter()
        .map(|&(i, j, t)| {
            let shape = cell_shape(cfg.sigma, cfg.d, cfg.deltas[i], cfg.rhos[j])?;
            let seed = derive_seed(cfg.seed, &[sigma_key, i as u64, j as u64, t as u64]);
            Some(run_trial(cfg, shape, seed))
        })
        .collect();

    let na = cfg.algorithms.len();
    let mut cells = Vec::with_capacity(nd * nr);
    for i in 0..nd {
        for j in 0..nr {
            let shape = cell_shape(cfg.sigma, cfg.d, cfg.deltas[i], cfg.rhos[j]);
            let mut successes = vec![0; na];
            let mut errors = vec![0; na];
            let base = (i * nr + j) * cfg.trials;
            for o in outcomes[base..base + cfg.trials].iter().flatten() {
                match o {
                    Ok(v) => v.iter().enumerate().for_each(|(a, &s)| successes[a] += s as usize),
                    Err(_) => errors.iter_mut().for_each(|e| *e += 1),
                }
            }
            cells.push(PhaseCell {
                delta: cfg.deltas[i],
                rho: cfg.rhos[j],
                shape,
                successes,
                errors,
            });
        }
    }
    Ok(PhaseGrid {
        config: cfg.clone(),
        cells,
    })
}
