use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, invalid, Result};
use crate::numerics::{
    ensure_finite_vector, lstsq_with_rank, operator_norm_estimate, pseudo_inverse, select_rows, LinearMap,
};
use crate::operators::{AnalysisOperator, MeasurementSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L1Config {
    pub tol: f64,
    pub max_iter: usize,
    /// Primal-dual iteration on operator actions instead of dense ADMM.
    pub matrix_free: bool,
}

impl Default for L1Config {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50_000,
            matrix_free: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct L1Outcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Ωx‖₁` at the returned point.
    pub objective: f64,
}

/// Approximate minimizer of `‖Ωx‖₁` subject to `Mx = y`.
pub fn analysis_l1_solve(
    m: &MeasurementSystem,
    y: &DVector<f64>,
    omega: &AnalysisOperator,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let cfg = L1Config {
        tol,
        max_iter,
        matrix_free: m.dense().is_none() || omega.dense().is_none(),
    };
    Ok(analysis_l1_solve_with(m, y, omega, &cfg)?.x)
}

/// Dense inputs: ADMM on `min_α ‖c + Bα‖₁` with `B = ΩW`, `c = ΩM†y`, where
/// `W` spans `Null(M)`, so `x = M†y + Wα` satisfies the constraint exactly.
/// Matrix-free: Chambolle–Pock primal-dual iteration whose primal step is the
/// projection onto `{x : Mx = y}`.
pub fn analysis_l1_solve_with(
    m: &MeasurementSystem,
    y: &DVector<f64>,
    omega: &AnalysisOperator,
    cfg: &L1Config,
) -> Result<L1Outcome> {
    ensure_dim("measurement vector", m.m(), y.len())?;
    ensure_dim("analysis operator signal dimension", m.d(), omega.d())?;
    ensure_finite_vector("measurement vector", y)?;
    if m.m() >= m.d() {
        return Err(invalid(format!("analysis l1 needs m < d, got m = {}, d = {}", m.m(), m.d())));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(invalid("tolerance and iteration cap must be positive"));
    }
    let out = if cfg.matrix_free {
        pdhg(m, y, omega, cfg)?
    } else {
        admm(m, y, omega, cfg)?
    };
    Ok(out)
}

fn l1_objective(omega: &AnalysisOperator, x: &DVector<f64>) -> f64 {
    LinearMap::apply(omega, x).lp_norm(1)
}

fn soft(v: f64, k: f64) -> f64 {
    v.signum() * (v.abs() - k).max(0.0)
}

fn admm(
    m: &MeasurementSystem,
    y: &DVector<f64>,
    omega: &AnalysisOperator,
    cfg: &L1Config,
) -> Result<L1Outcome> {
    let od = omega.to_dense()?;
    let w = m
        .null_basis()
        .ok_or_else(|| invalid("dense l1 needs a dense measurement matrix; enable matrix_free"))?;
    let xp = m.min_norm_solution(y)?;
    if w.ncols() == 0 {
        let objective = l1_objective(omega, &xp);
        return Ok(L1Outcome { x: xp, iterations: 0, converged: true, objective });
    }
    let b = &od * w;
    let c = &od * &xp;
    let b_pinv = pseudo_inverse(&b)?;
    let b_norm = operator_norm_estimate(&b, 50, 5);

    // split z = Bα + c; scaled-dual ADMM with over-relaxation and residual balancing
    const RELAX: f64 = 1.6;
    let p = b.nrows();
    let mut rho = 1.0 / (c.lp_norm(1) / p as f64).max(1e-300);
    let mut z = c.clone();
    let mut u = DVector::zeros(p);
    let mut alpha = DVector::zeros(b.ncols());
    let mut iterations = cfg.max_iter;
    let mut converged = false;
    let mut last_polish: Vec<usize> = Vec::new();
    for it in 1..=cfg.max_iter {
        let alpha_old = alpha.clone();
        alpha = &b_pinv * (&z - &c - &u);
        let ba = &b * &alpha + &c;
        let v = &ba * RELAX + &z * (1.0 - RELAX);
        let z_old = z.clone();
        z = (&v + &u).map(|t| soft(t, 1.0 / rho));
        u += &v - &z;

        let r_pri = (&ba - &z).norm();
        let s_dual = rho * b.tr_mul(&(&z - &z_old)).norm();
        let eps_pri = cfg.tol * ba.norm().max(z.norm()).max(1e-300);
        // Bᵀλ vanishes at an optimum, so the dual scale is ‖B‖·‖λ‖ with λ = ρu
        let eps_dual = cfg.tol * (b_norm * rho * u.norm()).max(1e-300);
        let dx = (w * (&alpha - &alpha_old)).norm();
        let xn = (&xp + w * &alpha).norm();
        if r_pri <= eps_pri && s_dual <= eps_dual && dx <= cfg.tol * xn.max(1e-300) {
            iterations = it;
            converged = true;
            break;
        }
        // the soft threshold leaves exact zeros; once they pin a vertex, try to certify it
        if it % POLISH_EVERY == 0 {
            let zeros: Vec<usize> = (0..p).filter(|&i| z[i] == 0.0).collect();
            if zeros.len() >= b.ncols() && zeros != last_polish {
                let lam = &u * rho;
                if let Some(a) = polish(&b, &c, &zeros, &lam)? {
                    alpha = a;
                    iterations = it;
                    converged = true;
                    break;
                }
                last_polish = zeros;
            }
        }
        if it % 10 == 0 {
            let (rn, sn) = (r_pri / eps_pri, s_dual / eps_dual);
            if rn > 10.0 * sn {
                rho *= 2.0;
                u /= 2.0;
            } else if sn > 10.0 * rn {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    let x = xp + w * alpha;
    let objective = l1_objective(omega, &x);
    Ok(L1Outcome { x, iterations, converged, objective })
}

const POLISH_EVERY: usize = 100;
const POLISH_TOL: f64 = 1e-9;

/// Vertex polish for `min_α ‖c + Bα‖₁`: solves `(c + Bα)_Z = 0` on the
/// candidate zero set and accepts the point only with a dual certificate
/// `Bᵀλ = 0`, `λ_i = sign(r_i)` off the zero set and `|λ_i| ≤ 1` on it.
/// The certificate is sought near the ADMM dual estimate `lam`, then at the
/// minimum-norm completion.
fn polish(
    b: &DMatrix<f64>,
    c: &DVector<f64>,
    zeros: &[usize],
    lam: &DVector<f64>,
) -> Result<Option<DVector<f64>>> {
    let q = b.ncols();
    let bz = select_rows(b, zeros);
    let cz = DVector::from_iterator(zeros.len(), zeros.iter().map(|&i| -c[i]));
    let (alpha, rank) = lstsq_with_rank(&bz, &cz)?;
    if rank < q {
        return Ok(None);
    }
    let r = b * &alpha + c;
    let scale = c.amax().max((b * &alpha).amax()).max(1e-300);
    if zeros.iter().any(|&i| r[i].abs() > POLISH_TOL * scale) {
        return Ok(None);
    }
    let (on, off): (Vec<usize>, Vec<usize>) = (0..b.nrows()).partition(|&i| r[i].abs() <= POLISH_TOL * scale);
    let mut h = DVector::zeros(q);
    for &i in &off {
        h -= b.row(i).transpose() * r[i].signum();
    }
    let bt = select_rows(b, &on).transpose();
    for guess in [true, false] {
        let l0 = DVector::from_iterator(
            on.len(),
            on.iter().map(|&i| if guess { lam[i].clamp(-1.0, 1.0) } else { 0.0 }),
        );
        let (delta, _) = lstsq_with_rank(&bt, &(&h - &bt * &l0))?;
        let l = l0 + delta;
        let defect = (&bt * &l - &h).norm();
        if defect <= 1e-8 * h.norm().max(1.0) && l.amax() <= 1.0 + 1e-9 {
            return Ok(Some(alpha));
        }
    }
    Ok(None)
}

fn pdhg(
    m: &MeasurementSystem,
    y: &DVector<f64>,
    omega: &AnalysisOperator,
    cfg: &L1Config,
) -> Result<L1Outcome> {
    let xp = m.min_norm_solution(y)?;
    let proj = |v: &DVector<f64>| -> Result<DVector<f64>> { Ok(&xp + m.project_to_null(&(v - &xp))?) };
    let norm = operator_norm_estimate(omega, 100, 3) * 1.01;
    if norm == 0.0 {
        return Ok(L1Outcome { x: xp, iterations: 0, converged: true, objective: 0.0 });
    }
    let step = 0.99 / norm;
    let y_norm = y.norm();
    let mut x = xp.clone();
    let mut x_bar = x.clone();
    let mut xi = DVector::zeros(omega.p());
    let mut iterations = cfg.max_iter;
    let mut converged = false;
    for it in 1..=cfg.max_iter {
        xi += LinearMap::apply(omega, &x_bar) * step;
        xi.apply(|t| *t = t.clamp(-1.0, 1.0));
        let x_new = proj(&(&x - LinearMap::apply_adjoint(omega, &xi) * step))?;
        let change = (&x_new - &x).norm();
        x_bar = &x_new * 2.0 - &x;
        x = x_new;
        if change <= cfg.tol * x.norm() {
            let resid = (LinearMap::apply(m, &x) - y).norm();
            if resid <= cfg.tol * y_norm.max(1e-300) {
                iterations = it;
                converged = true;
                break;
            }
        }
    }
    let objective = l1_objective(omega, &x);
    Ok(L1Outcome { x, iterations, converged, objective })
}
