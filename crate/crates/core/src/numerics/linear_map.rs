use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A linear operator known only through its action and the action of its adjoint.
pub trait LinearMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64>;
}

impl LinearMap for DMatrix<f64> {
    fn in_dim(&self) -> usize {
        self.ncols()
    }
    fn out_dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
    fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        self.tr_mul(y)
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        (**self).apply_adjoint(y)
    }
}

/// Vertical stack `[w₀·A₀; w₁·A₁; …]` of maps sharing an input dimension.
pub struct ScaledStack<'a> {
    blocks: Vec<(&'a dyn LinearMap, f64)>,
    in_dim: usize,
}

impl<'a> ScaledStack<'a> {
    pub fn new(blocks: Vec<(&'a dyn LinearMap, f64)>) -> Self {
        let in_dim = blocks.first().map(|(b, _)| b.in_dim()).unwrap_or(0);
        assert!(
            blocks.iter().all(|(b, _)| b.in_dim() == in_dim),
            "stacked maps must share the input dimension"
        );
        Self { blocks, in_dim }
    }
}

impl LinearMap for ScaledStack<'_> {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.blocks.iter().map(|(b, _)| b.out_dim()).sum()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.out_dim());
        for (b, w) in &self.blocks {
            out.extend(b.apply(x).iter().map(|v| v * w));
        }
        DVector::from_vec(out)
    }
    fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.in_dim);
        let mut offset = 0;
        for (b, w) in &self.blocks {
            let n = b.out_dim();
            let part = DVector::from_column_slice(&y.as_slice()[offset..offset + n]);
            acc += b.apply_adjoint(&part) * *w;
            offset += n;
        }
        acc
    }
}

/// Largest relative discrepancy `|⟨Ax, y⟩ − ⟨x, Aᵀy⟩| / (‖Ax‖‖y‖ + ‖x‖‖Aᵀy‖)`
/// over Gaussian probe pairs.
pub fn adjoint_mismatch(map: &dyn LinearMap, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..probes {
        let x = DVector::from_fn(map.in_dim(), |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(map.out_dim(), |_, _| StandardNormal.sample(&mut rng));
        let ax = map.apply(&x);
        let aty = map.apply_adjoint(&y);
        let scale = ax.norm() * y.norm() + x.norm() * aty.norm();
        if scale > 0.0 {
            worst = worst.max((ax.dot(&y) - x.dot(&aty)).abs() / scale);
        }
    }
    worst
}

/// Power-iteration estimate of the spectral norm `‖A‖₂`.
pub fn operator_norm_estimate(map: &dyn LinearMap, iterations: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_fn(map.in_dim(), |_, _| StandardNormal.sample(&mut rng));
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let nx = x.norm();
        if nx == 0.0 {
            return 0.0;
        }
        x /= nx;
        let ax = map.apply(&x);
        estimate = ax.norm();
        x = map.apply_adjoint(&ax);
    }
    estimate
}
