use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ls::{regularized_ls_iterative, DowndatedNormalSystem};
use super::{relative_change, MaskedAnalysis, RecoveryResult, RecoveryStatus};
use crate::error::{ensure_dim, invalid, Result};
use crate::model::Cosupport;
use crate::numerics::{ensure_finite_vector, operator_norm_estimate, LinearMap};
use crate::operators::{AnalysisOperator, MeasurementSystem};

/// Least-squares subproblem solved at each GAP iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsMode {
    /// `argmin ‖Ω_Λ x‖₂ s.t. Mx = y`, the `λ → 0` limit.
    Exact,
    /// `argmin ‖y − Mx‖² + λ‖Ω_Λ x‖²`.
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    /// Selection factor `t ∈ (0, 1]`.
    pub selection_factor: f64,
    /// `λ` for [`LsMode::Regularized`]; `None` picks `1e-6·‖M‖²/‖Ω‖²`.
    pub lambda: Option<f64>,
    pub ls_mode: LsMode,
    pub target_cosparsity: Option<usize>,
    pub max_iterations: Option<usize>,
    pub stop_on_static: bool,
    pub static_tol: f64,
    /// Use operator actions and CG instead of dense factorizations.
    pub matrix_free: bool,
    /// Cap on rows removed per iteration as a fraction of the active rows
    /// (at least one row is always removable).
    pub selection_cap: Option<f64>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            selection_factor: 1.0,
            lambda: None,
            ls_mode: LsMode::Exact,
            target_cosparsity: None,
            max_iterations: None,
            stop_on_static: true,
            static_tol: 1e-8,
            matrix_free: false,
            selection_cap: None,
            cg_tol: 1e-12,
            cg_max_iter: 5000,
        }
    }
}

impl GapConfig {
    /// Settings for large operators: CG subproblems, multiple eliminations
    /// per iteration capped at 2% of the active rows.
    pub fn matrix_free() -> Self {
        Self {
            selection_factor: 0.5,
            matrix_free: true,
            selection_cap: Some(0.02),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.selection_factor;
        if !(t > 0.0 && t <= 1.0) {
            return Err(invalid(format!("selection factor must lie in (0, 1], got {t}")));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(invalid(format!("lambda must be positive and finite, got {l}")));
            }
        }
        if !(self.static_tol >= 0.0) {
            return Err(invalid("static tolerance must be non-negative"));
        }
        if let Some(c) = self.selection_cap {
            if !(c > 0.0 && c <= 1.0) {
                return Err(invalid(format!("selection cap must lie in (0, 1], got {c}")));
            }
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(invalid("CG tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

enum Engine<'a> {
    DenseExact {
        sys: DowndatedNormalSystem,
        xp: DVector<f64>,
        w: &'a DMatrix<f64>,
    },
    DenseRegularized {
        sys: DowndatedNormalSystem,
    },
    FreeExact {
        omega_norm_sq: f64,
    },
    FreeRegularized {
        lambda: f64,
    },
}

struct Ctx<'a> {
    m: &'a MeasurementSystem,
    y: &'a DVector<f64>,
    omega: &'a AnalysisOperator,
    cfg: &'a GapConfig,
}

impl Engine<'_> {
    fn remove(&mut self, rows: &[usize]) {
        match self {
            Engine::DenseExact { sys, .. } | Engine::DenseRegularized { sys } => sys.remove(rows),
            _ => {}
        }
    }

    /// Solves the subproblem on the active rows, warm-starting iterative paths from `x`.
    fn solve(
        &self,
        ctx: &Ctx,
        mask: &[bool],
        x: Option<&DVector<f64>>,
        warnings: &mut Vec<String>,
    ) -> Result<DVector<f64>> {
        match self {
            Engine::DenseExact { sys, xp, w } => Ok(xp + *w * sys.solve()?),
            Engine::DenseRegularized { sys } => sys.solve(),
            Engine::FreeExact { omega_norm_sq } => {
                let start = match x {
                    Some(x) => x.clone(),
                    None => ctx.m.min_norm_solution(ctx.y)?,
                };
                let q = MaskedAnalysis { op: ctx.omega, mask };
                let (xn, ok, it) =
                    projected_cg(ctx.m, &q, start, ctx.cfg.cg_tol * omega_norm_sq, ctx.cfg.cg_max_iter)?;
                if !ok {
                    warnings.push(format!("projected CG stopped at its cap of {it} iterations"));
                }
                Ok(xn)
            }
            Engine::FreeRegularized { lambda } => {
                let q = MaskedAnalysis { op: ctx.omega, mask };
                let out = regularized_ls_iterative(
                    ctx.m,
                    &q,
                    ctx.y,
                    *lambda,
                    x,
                    ctx.cfg.cg_tol,
                    ctx.cfg.cg_max_iter,
                )?;
                if !out.converged {
                    warnings.push(format!("CGLS stopped at its cap of {} iterations", out.iterations));
                }
                Ok(out.x)
            }
        }
    }

    /// Final estimate via an orthogonal factorization instead of the normal equations.
    fn polish(&self, x: DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Engine::DenseExact { sys, xp, w } => Ok(xp + *w * sys.solve_direct()?),
            Engine::DenseRegularized { sys } => sys.solve_direct(),
            _ => Ok(x),
        }
    }
}

/// Minimizes `½‖Qx‖²` over `x₀ + Null(M)` by CG on the projected normal operator.
/// Stops when the projected gradient is at most `tol_scaled · ‖x‖`.
pub(crate) fn projected_cg(
    m: &MeasurementSystem,
    q: &dyn LinearMap,
    x0: DVector<f64>,
    tol_scaled: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, bool, usize)> {
    let normal = |v: &DVector<f64>| -> Result<DVector<f64>> {
        m.project_to_null(&q.apply_adjoint(&q.apply(v)))
    };
    let mut x = x0;
    let mut r = -normal(&x)?;
    let mut dir = r.clone();
    let mut rr = r.norm_squared();
    for it in 0..max_iter {
        if rr.sqrt() <= tol_scaled * x.norm() {
            return Ok((x, true, it));
        }
        let qd = normal(&dir)?;
        let curv = dir.dot(&qd);
        if !(curv > 0.0) {
            return Ok((x, true, it));
        }
        let a = rr / curv;
        x.axpy(a, &dir, 1.0);
        r.axpy(-a, &qd, 1.0);
        let rr_new = r.norm_squared();
        dir = &r + &dir * (rr_new / rr);
        rr = rr_new;
    }
    let ok = rr.sqrt() <= tol_scaled * x.norm();
    Ok((x, ok, max_iter))
}

/// Greedy analysis pursuit.
///
/// Starts from the full cosupport and repeatedly removes the rows whose
/// analysis coefficients reach `t · max |α_j|` over the active set, re-solving
/// the least-squares subproblem after each elimination. Stops once at most
/// `max(d − m, ℓ)` rows remain (for `t = 1` without ties this is exactly the
/// iteration count `p − d + m`, or `p − ℓ` with a target), when the estimate is
/// static, or at `max_iterations`. An elimination that would leave fewer than
/// `d − m` rows is refused and the current estimate returned with `MaxIter`.
pub fn gap_solve(
    m: &MeasurementSystem,
    y: &DVector<f64>,
    omega: &AnalysisOperator,
    cfg: &GapConfig,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    ensure_dim("measurement vector", m.m(), y.len())?;
    ensure_dim("analysis operator signal dimension", m.d(), omega.d())?;
    ensure_finite_vector("measurement vector", y)?;
    let (mm, d, p) = (m.m(), m.d(), omega.p());
    if mm >= d {
        return Err(invalid(format!("GAP needs m < d, got m = {mm}, d = {d}")));
    }
    let floor = d - mm;
    let stop_count = cfg.target_cosparsity.unwrap_or(floor).max(floor);
    let ctx = Ctx { m, y, omega, cfg };

    let mut engine = build_engine(&ctx)?;
    let mut mask = vec![true; p];
    let mut n_active = p;
    let mut warnings = Vec::new();
    let mut trace: Vec<Vec<usize>> = Vec::new();

    let mut x = if y.iter().all(|&v| v == 0.0) {
        DVector::zeros(d)
    } else {
        engine.solve(&ctx, &mask, None, &mut warnings)?
    };
    let scale = operator_norm_estimate(omega, 30, 7);

    let status = loop {
        if n_active <= stop_count {
            break RecoveryStatus::Converged;
        }
        if cfg.max_iterations.is_some_and(|k| trace.len() >= k) {
            break RecoveryStatus::MaxIter;
        }
        let alpha = LinearMap::apply(omega, &x);
        let amax = (0..p).filter(|&i| mask[i]).map(|i| alpha[i].abs()).fold(0.0, f64::max);
        if amax <= 1e-300 || amax <= 1e-15 * scale * x.norm() {
            // every active row already annihilates the estimate
            break RecoveryStatus::StaticStop;
        }
        let thresh = cfg.selection_factor * amax;
        let mut gamma: Vec<usize> = (0..p).filter(|&i| mask[i] && alpha[i].abs() >= thresh).collect();
        if let Some(frac) = cfg.selection_cap {
            let limit = ((frac * n_active as f64).ceil() as usize).max(1);
            if gamma.len() > limit {
                gamma.sort_by(|&a, &b| alpha[b].abs().total_cmp(&alpha[a].abs()).then(a.cmp(&b)));
                gamma.truncate(limit);
                gamma.sort_unstable();
            }
        }
        if n_active - gamma.len() < floor {
            warnings.push(format!(
                "eliminating {} rows would leave fewer than d - m = {floor} active rows",
                gamma.len()
            ));
            break RecoveryStatus::MaxIter;
        }
        for &i in &gamma {
            mask[i] = false;
        }
        n_active -= gamma.len();
        engine.remove(&gamma);
        trace.push(gamma);

        let x_new = engine.solve(&ctx, &mask, Some(&x), &mut warnings)?;
        let change = relative_change(&x_new, &x);
        x = x_new;
        if n_active <= stop_count {
            break RecoveryStatus::Converged;
        }
        if cfg.stop_on_static && change <= cfg.static_tol {
            break RecoveryStatus::StaticStop;
        }
    };

    if !y.iter().all(|&v| v == 0.0) {
        x = engine.polish(x)?;
    }
    warnings.dedup();
    Ok(RecoveryResult {
        x_hat: x,
        estimated_cosupport: Cosupport::from_mask(&mask),
        iterations: trace.len(),
        status,
        trace,
        indeterminate: false,
        warnings,
    })
}

fn build_engine<'a>(ctx: &Ctx<'a>) -> Result<Engine<'a>> {
    let cfg = ctx.cfg;
    let lambda = || cfg.lambda.unwrap_or_else(|| super::default_lambda(ctx.m, ctx.omega));
    if cfg.matrix_free {
        return Ok(match cfg.ls_mode {
            LsMode::Exact => {
                let n = operator_norm_estimate(ctx.omega, 50, 11);
                Engine::FreeExact { omega_norm_sq: n * n }
            }
            LsMode::Regularized => Engine::FreeRegularized { lambda: lambda() },
        });
    }
    let md = ctx
        .m
        .dense()
        .ok_or_else(|| invalid("dense GAP needs a dense measurement matrix; enable matrix_free"))?;
    let od = ctx.omega.to_dense()?;
    Ok(match cfg.ls_mode {
        LsMode::Exact => {
            let w = ctx.m.null_basis().expect("dense systems carry a null basis");
            let xp = ctx.m.min_norm_solution(ctx.y)?;
            let b = &od * w;
            let c = &od * &xp;
            Engine::DenseExact {
                sys: DowndatedNormalSystem::new(b, -c, None),
                xp,
                w,
            }
        }
        LsMode::Regularized => {
            let rows = od * lambda().sqrt();
            let zeros = DVector::zeros(rows.nrows());
            Engine::DenseRegularized {
                sys: DowndatedNormalSystem::new(rows, zeros, Some((md, ctx.y))),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_cosparse_signal, DEFAULT_ZERO_TOL};
    use crate::operators::{gaussian_measurement, random_tight_frame_operator, radial_fourier_system};

    fn instance(mm: usize, d: usize, p: usize, l: usize, seed: u64) -> (MeasurementSystem, AnalysisOperator, DVector<f64>, DVector<f64>) {
        let om = random_tight_frame_operator(p, d, seed).unwrap();
        let m = gaussian_measurement(mm, d, seed + 1).unwrap();
        let x0 = generate_cosparse_signal(&om, l, seed + 2).unwrap().x;
        let y = m.apply(&x0).unwrap();
        (m, om, x0, y)
    }

    #[test]
    fn zero_measurements_give_zero() {
        let (m, om, _, _) = instance(10, 20, 24, 15, 1);
        let r = gap_solve(&m, &DVector::zeros(10), &om, &GapConfig::default()).unwrap();
        assert_eq!(r.x_hat, DVector::zeros(20));
        assert_eq!(r.iterations, r.trace.len());
    }

    #[test]
    fn strict_max_removes_one_row_per_iteration() {
        let (m, om, _, y) = instance(10, 20, 30, 12, 3);
        let cfg = GapConfig { stop_on_static: false, ..GapConfig::default() };
        let r = gap_solve(&m, &y, &om, &cfg).unwrap();
        assert_eq!(r.status, RecoveryStatus::Converged);
        assert_eq!(r.iterations, 30 - 20 + 10);
        assert!(r.trace.iter().all(|g| g.len() == 1));
        let mut seen = std::collections::HashSet::new();
        assert!(r.trace.iter().flatten().all(|i| seen.insert(*i)));
        assert_eq!(r.estimated_cosupport.len(), 10);
    }

    #[test]
    fn recovers_easy_instance() {
        let (m, om, x0, y) = instance(30, 40, 60, 36, 5);
        for ls_mode in [LsMode::Exact, LsMode::Regularized] {
            let cfg = GapConfig { ls_mode, ..GapConfig::default() };
            let r = gap_solve(&m, &y, &om, &cfg).unwrap();
            let err = (&r.x_hat - &x0).norm() / x0.norm();
            let tol = if ls_mode == LsMode::Exact { 1e-9 } else { 1e-5 };
            assert!(err < tol, "{ls_mode:?}: error {err}");
        }
    }

    #[test]
    fn matrix_free_matches_dense() {
        let (m, om, x0, y) = instance(30, 40, 60, 36, 9);
        let dense = gap_solve(&m, &y, &om, &GapConfig::default()).unwrap();
        let free = gap_solve(
            &m,
            &y,
            &om,
            &GapConfig { matrix_free: true, ..GapConfig::default() },
        )
        .unwrap();
        assert_eq!(dense.trace, free.trace);
        assert!((&free.x_hat - &x0).norm() <= 1e-8 * x0.norm());
        let reg = gap_solve(
            &m,
            &y,
            &om,
            &GapConfig { matrix_free: true, ls_mode: LsMode::Regularized, ..GapConfig::default() },
        )
        .unwrap();
        assert!((&reg.x_hat - &x0).norm() <= 1e-4 * x0.norm());
    }

    #[test]
    fn target_cosparsity_and_cap() {
        let (m, om, _, y) = instance(10, 20, 30, 12, 13);
        let cfg = GapConfig {
            target_cosparsity: Some(25),
            stop_on_static: false,
            ..GapConfig::default()
        };
        let r = gap_solve(&m, &y, &om, &cfg).unwrap();
        assert_eq!(r.iterations, 5);
        let capped = GapConfig {
            selection_factor: 0.01,
            selection_cap: Some(0.1),
            stop_on_static: false,
            ..GapConfig::default()
        };
        let r = gap_solve(&m, &y, &om, &capped).unwrap();
        assert_eq!(r.trace[0].len(), 3);
        assert!(r.estimated_cosupport.len() >= 10);
    }

    #[test]
    fn rejects_bad_config() {
        let (m, om, _, y) = instance(10, 20, 24, 15, 1);
        for t in [0.0, 1.5, f64::NAN] {
            let cfg = GapConfig { selection_factor: t, ..GapConfig::default() };
            assert!(gap_solve(&m, &y, &om, &cfg).is_err());
        }
        let cfg = GapConfig { lambda: Some(-1.0), ..GapConfig::default() };
        assert!(gap_solve(&m, &y, &om, &cfg).is_err());
    }

    #[test]
    fn piecewise_constant_image_from_radial_samples() {
        let n = 16;
        let om = AnalysisOperator::finite_difference_2d(n).unwrap();
        let m = radial_fourier_system(n, 10).unwrap();
        let x0 = DVector::from_fn(n * n, |i, _| {
            let (r, c) = (i / n, i % n);
            if (4..11).contains(&r) && (3..9).contains(&c) { 1.0 } else { 0.2 }
        });
        let y = m.apply(&x0).unwrap();
        let r = gap_solve(&m, &y, &om, &GapConfig::matrix_free()).unwrap();
        let err = (&r.x_hat - &x0).norm() / x0.norm();
        assert!(err < 1e-6, "error {err}, status {:?}", r.status);
        let found = crate::model::cosupport_of(&om, &r.x_hat, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(found, crate::model::cosupport_of(&om, &x0, DEFAULT_ZERO_TOL).unwrap());
    }
}
