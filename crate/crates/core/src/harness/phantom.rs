use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{dif_components, Cosupport, DifComponents};
use crate::operators::PixelGraph;

/// Intensity table of the ten-ellipse head phantom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomVariant {
    /// The original Shepp–Logan intensities (skull 2.0, brain −0.98, …).
    #[default]
    Original,
    /// The high-contrast variant (skull 1.0, brain −0.8, …).
    Modified,
}

/// `(a, b, x0, y0, φ in degrees)` of the ten ellipses.
const ELLIPSES: [(f64, f64, f64, f64, f64); 10] = [
    (0.69, 0.92, 0.0, 0.0, 0.0),
    (0.6624, 0.874, 0.0, -0.0184, 0.0),
    (0.11, 0.31, 0.22, 0.0, -18.0),
    (0.16, 0.41, -0.22, 0.0, 18.0),
    (0.21, 0.25, 0.0, 0.35, 0.0),
    (0.046, 0.046, 0.0, 0.1, 0.0),
    (0.046, 0.046, 0.0, -0.1, 0.0),
    (0.046, 0.023, -0.08, -0.605, 0.0),
    (0.023, 0.023, 0.0, -0.606, 0.0),
    (0.023, 0.046, 0.06, -0.605, 0.0),
];

const ORIGINAL: [f64; 10] = [2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01];
const MODIFIED: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];

impl PhantomVariant {
    pub fn intensities(&self) -> &'static [f64; 10] {
        match self {
            PhantomVariant::Original => &ORIGINAL,
            PhantomVariant::Modified => &MODIFIED,
        }
    }
}

/// Shepp–Logan phantom with the original intensities; see [`shepp_logan_phantom_variant`].
pub fn shepp_logan_phantom(n: usize) -> Result<DVector<f64>> {
    shepp_logan_phantom_variant(n, PhantomVariant::Original)
}

/// Rasterizes the ten-ellipse phantom on an `n × n` grid, row-major.
///
/// Pixel `(r, c)` sits at `x = (c − (n−1)/2)/((n−1)/2)` and
/// `y = ((n−1)/2 − r)/((n−1)/2)`, so row 0 is the top edge `y = 1`. A pixel
/// takes the sum of the intensities of the ellipses containing its centre
/// (boundary included).
pub fn shepp_logan_phantom_variant(n: usize, variant: PhantomVariant) -> Result<DVector<f64>> {
    if n < 16 {
        return Err(invalid(format!("phantom side must be at least 16, got {n}")));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let amp = variant.intensities();
    let mut img = DVector::zeros(n * n);
    for r in 0..n {
        let y = (half - r as f64) / half;
        for c in 0..n {
            let x = (c as f64 - half) / half;
            let mut v = 0.0;
            for (k, &(a, b, x0, y0, phi)) in ELLIPSES.iter().enumerate() {
                let (s, co) = phi.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * co + dy * s;
                let w = dy * co - dx * s;
                if (u * u) / (a * a) + (w * w) / (b * b) <= 1.0 {
                    v += amp[k];
                }
            }
            img[r * n + c] = v;
        }
    }
    Ok(img)
}

/// Finite-difference structure of a piecewise-constant image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhantomStats {
    pub n: usize,
    /// Nonzero finite differences (edges crossing an intensity jump).
    pub nonzero_differences: usize,
    pub cosparsity: usize,
    /// `J(Λ)`: components of the zero-difference edge graph.
    pub regions: usize,
    /// Pixels whose four neighbour differences are all nonzero.
    pub isolated_pixels: usize,
    /// `dim W_Λ = isolated pixels + J(Λ)`.
    pub subspace_dim: usize,
}

/// Counts the DIF structure of an image: an edge is in the cosupport when its
/// two pixels are equal to `1e-12` relative to the largest pixel magnitude.
pub fn phantom_stats(img: &DVector<f64>, n: usize) -> Result<PhantomStats> {
    if img.len() != n * n {
        return Err(invalid(format!("image has {} pixels, expected {n}x{n}", img.len())));
    }
    let g = PixelGraph::new(n);
    let tol = 1e-12 * img.amax();
    let zero: Vec<bool> = g.edges().map(|(a, b)| (img[a] - img[b]).abs() <= tol).collect();
    let cos = Cosupport::from_mask(&zero);
    let comps: DifComponents = dif_components(&g, cos.indices());
    let isolated = n * n - comps.covered_vertices;
    Ok(PhantomStats {
        n,
        nonzero_differences: g.edge_count() - cos.len(),
        cosparsity: cos.len(),
        regions: comps.components,
        isolated_pixels: isolated,
        subspace_dim: comps.subspace_dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_stay_in_table_range() {
        for variant in [PhantomVariant::Original, PhantomVariant::Modified] {
            let n = 32;
            let img = shepp_logan_phantom_variant(n, variant).unwrap();
            let amp = variant.intensities();
            let hi: f64 = amp.iter().filter(|a| **a > 0.0).sum();
            let lo: f64 = amp.iter().filter(|a| **a < 0.0).sum();
            assert!(img.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
            // corners lie outside the head
            for idx in [0, n - 1, n * (n - 1), n * n - 1] {
                assert_eq!(img[idx], 0.0);
            }
        }
        assert!(shepp_logan_phantom(8).is_err());
    }

    #[test]
    fn stats_of_a_square() {
        let n = 16;
        let img = DVector::from_fn(n * n, |i, _| if (i / n) < 4 && (i % n) < 4 { 1.0 } else { 0.0 });
        let s = phantom_stats(&img, n).unwrap();
        assert_eq!(s.nonzero_differences, 8);
        assert_eq!((s.regions, s.isolated_pixels, s.subspace_dim), (2, 0, 2));
    }
}
