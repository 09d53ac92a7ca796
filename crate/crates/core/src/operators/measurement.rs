use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure_dim, invalid, Result};
use crate::numerics::{ensure_finite_matrix, least_squares_min_norm, null_space_basis, LinearMap};

/// Largest image side for which a radial Fourier system may be materialized.
pub const MAX_DENSE_FOURIER_SIDE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    Gaussian,
    Dense,
    RadialFourier,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense {
        matrix: Arc<DMatrix<f64>>,
        null_basis: Arc<DMatrix<f64>>,
    },
    Fourier(Arc<RadialFourier>),
}

/// A measurement system `M` (`m × d`, full row rank).
#[derive(Debug, Clone)]
pub struct MeasurementSystem {
    kind: MeasurementKind,
    repr: Repr,
}

impl MeasurementSystem {
    /// Wraps an explicit full-row-rank matrix; the null-space basis is computed here.
    pub fn from_dense(matrix: DMatrix<f64>) -> Result<Self> {
        Self::dense_with_kind(matrix, MeasurementKind::Dense)
    }

    fn dense_with_kind(matrix: DMatrix<f64>, kind: MeasurementKind) -> Result<Self> {
        ensure_finite_matrix("measurement matrix", &matrix)?;
        let null_basis = null_space_basis(&matrix)?;
        Ok(Self {
            kind,
            repr: Repr::Dense {
                matrix: Arc::new(matrix),
                null_basis: Arc::new(null_basis),
            },
        })
    }

    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        match &self.repr {
            Repr::Dense { matrix, .. } => matrix.nrows(),
            Repr::Fourier(f) => f.m(),
        }
    }

    pub fn d(&self) -> usize {
        match &self.repr {
            Repr::Dense { matrix, .. } => matrix.ncols(),
            Repr::Fourier(f) => f.d(),
        }
    }

    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense { matrix, .. } => Some(matrix),
            Repr::Fourier(_) => None,
        }
    }

    /// Orthonormal `d × (d − m)` basis of `Null(M)` (dense systems only).
    pub fn null_basis(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense { null_basis, .. } => Some(null_basis),
            Repr::Fourier(_) => None,
        }
    }

    pub fn radial(&self) -> Option<&RadialFourier> {
        match &self.repr {
            Repr::Fourier(f) => Some(f),
            Repr::Dense { .. } => None,
        }
    }

    /// True when `MMᵀ = I`, so `Mᵀ` is the pseudo-inverse.
    pub fn has_orthonormal_rows(&self) -> bool {
        matches!(self.repr, Repr::Fourier(_))
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match &self.repr {
            Repr::Dense { matrix, .. } => Ok(matrix.as_ref().clone()),
            Repr::Fourier(f) => f.to_dense(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("measurement input", self.d(), x.len())?;
        Ok(LinearMap::apply(self, x))
    }

    pub fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("measurement adjoint input", self.m(), y.len())?;
        Ok(LinearMap::apply_adjoint(self, y))
    }

    /// `M†y`, the minimum-norm solution of `Mx = y`.
    pub fn min_norm_solution(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("measurement vector", self.m(), y.len())?;
        match &self.repr {
            Repr::Dense { matrix, .. } => least_squares_min_norm(matrix, y),
            Repr::Fourier(f) => Ok(f.adjoint(y)),
        }
    }

    /// Orthogonal projection onto `Null(M)`.
    pub fn project_to_null(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("null-space projection input", self.d(), x.len())?;
        match &self.repr {
            Repr::Dense { null_basis, .. } => Ok(null_basis.as_ref() * null_basis.tr_mul(x)),
            Repr::Fourier(f) => Ok(x - f.adjoint(&f.forward(x))),
        }
    }
}

impl LinearMap for MeasurementSystem {
    fn in_dim(&self) -> usize {
        self.d()
    }
    fn out_dim(&self) -> usize {
        self.m()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Dense { matrix, .. } => matrix.as_ref() * x,
            Repr::Fourier(f) => f.forward(x),
        }
    }
    fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Dense { matrix, .. } => matrix.tr_mul(y),
            Repr::Fourier(f) => f.adjoint(y),
        }
    }
}

/// `m × d` i.i.d. standard normal matrix, filled row-major from a ChaCha8 stream.
pub fn gaussian_matrix(m: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_row_iterator(m, d, (0..m * d).map(|_| StandardNormal.sample(&mut rng)))
}

/// Gaussian measurement system; full row rank is verified.
pub fn gaussian_measurement(m: usize, d: usize, seed: u64) -> Result<MeasurementSystem> {
    if m > d {
        return Err(invalid(format!("gaussian measurement needs m <= d, got m = {m}, d = {d}")));
    }
    MeasurementSystem::dense_with_kind(gaussian_matrix(m, d, seed), MeasurementKind::Gaussian)
}

/// Real-stacked partial 2D DFT along radial lines.
pub fn radial_fourier_system(n: usize, lines: usize) -> Result<MeasurementSystem> {
    let f = RadialFourier::new(n, lines)?;
    Ok(MeasurementSystem {
        kind: MeasurementKind::RadialFourier,
        repr: Repr::Fourier(Arc::new(f)),
    })
}

/// Real-stacked partial Fourier system from an explicit frequency list.
pub fn partial_fourier_system(n: usize, frequencies: &[[usize; 2]]) -> Result<MeasurementSystem> {
    let f = RadialFourier::from_frequencies(n, 0, frequencies)?;
    Ok(MeasurementSystem {
        kind: MeasurementKind::RadialFourier,
        repr: Repr::Fourier(Arc::new(f)),
    })
}

/// Frequencies hit by `lines` radial lines through the centre of the `n × n`
/// DFT grid, as `(u, v)` with `u` indexing image rows, reduced mod `n`,
/// sorted and deduplicated.
///
/// Line `k` has angle `θ = kπ/L` and is sampled at `r = −n/2 … n/2 − 1`
/// (`n` points). For `θ ≤ π/4` or `θ > 3π/4` the sample is `(r, round(r tan θ))`,
/// otherwise `(round(r cot θ), r)`; rounding is half away from zero.
pub fn radial_line_frequencies(n: usize, lines: usize) -> Vec<[usize; 2]> {
    let mut set = BTreeSet::new();
    let half = (n / 2) as i64;
    let ni = n as i64;
    for k in 0..lines {
        let theta = k as f64 * std::f64::consts::PI / lines as f64;
        let u_major = 4 * k <= lines || 4 * k > 3 * lines;
        for r in -half..(ni - half) {
            let (u, v) = if u_major {
                (r, (r as f64 * theta.tan()).round() as i64)
            } else {
                ((r as f64 / theta.tan()).round() as i64, r)
            };
            set.insert([u.rem_euclid(ni) as usize, v.rem_euclid(ni) as usize]);
        }
    }
    set.into_iter().collect()
}

/// Partial DFT on an `n × n` image restricted to a frequency set, presented
/// as a real operator with orthonormal rows.
///
/// Frequencies are grouped into conjugate classes `{k, −k}`; each class
/// contributes a cosine row and, unless `k = −k`, a sine row. Rows are
/// scaled so that `MMᵀ = I`: row `(Re)` is `s·Re(F x)[k]`, row `(Im)` is
/// `s·Im(F x)[k]` with `s = √2/n` (or `1/n` on self-conjugate frequencies).
pub struct RadialFourier {
    n: usize,
    lines: usize,
    frequencies: Vec<[usize; 2]>,
    classes: Vec<[usize; 2]>,
    self_conjugate: Vec<bool>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RadialFourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialFourier")
            .field("n", &self.n)
            .field("lines", &self.lines)
            .field("frequencies", &self.frequencies.len())
            .field("m", &self.m())
            .finish()
    }
}

impl RadialFourier {
    pub fn new(n: usize, lines: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("radial Fourier system needs n >= 2, got {n}")));
        }
        Self::from_frequencies(n, lines, &radial_line_frequencies(n, lines))
    }

    pub fn from_frequencies(n: usize, lines: usize, frequencies: &[[usize; 2]]) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("partial Fourier system needs n >= 2, got {n}")));
        }
        if let Some(f) = frequencies.iter().find(|f| f[0] >= n || f[1] >= n) {
            return Err(invalid(format!("frequency {:?} outside the {n}x{n} grid", f)));
        }
        let freqs: BTreeSet<[usize; 2]> = frequencies.iter().copied().collect();
        let conj = |f: [usize; 2]| [(n - f[0]) % n, (n - f[1]) % n];
        let classes: BTreeSet<[usize; 2]> = freqs.iter().map(|&f| f.min(conj(f))).collect();
        let classes: Vec<[usize; 2]> = classes.into_iter().collect();
        let self_conjugate = classes.iter().map(|&c| conj(c) == c).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            lines,
            frequencies: freqs.into_iter().collect(),
            classes,
            self_conjugate,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        })
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    /// Distinct sampled frequencies, before conjugate pairing.
    pub fn frequencies(&self) -> &[[usize; 2]] {
        &self.frequencies
    }

    /// One representative per conjugate class; these index the cosine rows.
    pub fn classes(&self) -> &[[usize; 2]] {
        &self.classes
    }

    pub fn self_conjugate_count(&self) -> usize {
        self.self_conjugate.iter().filter(|&&s| s).count()
    }

    pub fn m(&self) -> usize {
        2 * self.classes.len() - self.self_conjugate_count()
    }

    pub fn d(&self) -> usize {
        self.n * self.n
    }

    fn scale(&self, k: usize) -> f64 {
        if self.self_conjugate[k] {
            1.0 / self.n as f64
        } else {
            std::f64::consts::SQRT_2 / self.n as f64
        }
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.ifft } else { &self.fft };
        plan.process(data);
        transpose_in_place(data, n);
        plan.process(data);
        transpose_in_place(data, n);
    }

    /// `Mx` for a row-major image `x`.
    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut buf, false);
        let mut out = Vec::with_capacity(self.m());
        for (k, c) in self.classes.iter().enumerate() {
            out.push(self.scale(k) * buf[c[0] * n + c[1]].re);
        }
        for (k, c) in self.classes.iter().enumerate() {
            if !self.self_conjugate[k] {
                out.push(self.scale(k) * buf[c[0] * n + c[1]].im);
            }
        }
        DVector::from_vec(out)
    }

    /// `Mᵀy` as a row-major image.
    pub fn adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        let nc = self.classes.len();
        let mut im_pos = nc;
        for (k, c) in self.classes.iter().enumerate() {
            let im = if self.self_conjugate[k] {
                0.0
            } else {
                im_pos += 1;
                y[im_pos - 1]
            };
            buf[c[0] * n + c[1]] = Complex64::new(y[k], im) * self.scale(k);
        }
        // Σ_k Re(z_k e^{+iθ}) is the real part of the unnormalized inverse DFT.
        self.fft2(&mut buf, true);
        DVector::from_iterator(n * n, buf.iter().map(|c| c.re))
    }

    fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > MAX_DENSE_FOURIER_SIDE {
            return Err(invalid(format!(
                "radial Fourier system with side {} is too large to materialize (max {MAX_DENSE_FOURIER_SIDE})",
                self.n
            )));
        }
        let d = self.d();
        let mut out = DMatrix::zeros(self.m(), d);
        let mut e = DVector::zeros(d);
        for j in 0..d {
            e[j] = 1.0;
            out.set_column(j, &self.forward(&e));
            e[j] = 0.0;
        }
        Ok(out)
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
