/// The 4-connected `N × N` pixel lattice.
///
/// Pixels are numbered row-major (`v = row·N + col`). Edges `0..N(N−1)` are
/// the horizontal pairs `(r, c)–(r, c+1)` in row-major order, edges
/// `N(N−1)..2N(N−1)` the vertical pairs `(r, c)–(r+1, c)`. Edge `i` is also
/// row `i` of the finite-difference operator, with `+1` on its first pixel and
/// `−1` on its second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelGraph {
    n: usize,
}

impl PixelGraph {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.n * self.n
    }

    pub fn horizontal_count(&self) -> usize {
        self.n * self.n.saturating_sub(1)
    }

    pub fn edge_count(&self) -> usize {
        2 * self.horizontal_count()
    }

    /// Endpoints `(v₁, v₂)` of edge `i`.
    #[inline]
    pub fn edge(&self, i: usize) -> (usize, usize) {
        let n = self.n;
        let h = self.horizontal_count();
        if i < h {
            let r = i / (n - 1);
            let c = i % (n - 1);
            let v = r * n + c;
            (v, v + 1)
        } else {
            let v = i - h;
            (v, v + n)
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.edge_count()).map(move |i| self.edge(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_layout_n3() {
        let g = PixelGraph::new(3);
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.edge(0), (0, 1));
        assert_eq!(g.edge(1), (1, 2));
        assert_eq!(g.edge(2), (3, 4));
        assert_eq!(g.edge(5), (7, 8));
        assert_eq!(g.edge(6), (0, 3));
        assert_eq!(g.edge(11), (5, 8));
    }

    #[test]
    fn every_edge_joins_neighbours() {
        let g = PixelGraph::new(7);
        let mut seen = std::collections::HashSet::new();
        for (a, b) in g.edges() {
            let (ra, ca) = (a / 7, a % 7);
            let (rb, cb) = (b / 7, b % 7);
            assert_eq!(ra.abs_diff(rb) + ca.abs_diff(cb), 1);
            assert!(seen.insert((a, b)));
        }
        assert_eq!(seen.len(), 2 * 7 * 6);
    }
}
