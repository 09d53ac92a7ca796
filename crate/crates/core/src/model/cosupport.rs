use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A strictly increasing set of row indices `Λ ⊆ {0, …, p−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cosupport {
    indices: Vec<usize>,
    p: usize,
}

impl Cosupport {
    /// Builds a cosupport from arbitrary-order indices; duplicates and
    /// out-of-range entries are rejected.
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate cosupport index {}", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(invalid(format!("cosupport index {last} out of range for p = {p}")));
            }
        }
        Ok(Self { indices, p })
    }

    pub fn full(p: usize) -> Self {
        Self {
            indices: (0..p).collect(),
            p,
        }
    }

    pub fn empty(p: usize) -> Self {
        Self { indices: Vec::new(), p }
    }

    /// Indices `i` with `mask[i]` set.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self {
            indices: mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect(),
            p: mask.len(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.indices
    }

    pub fn parent_rows(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// `Λᶜ`, also strictly increasing.
    pub fn complement(&self) -> Cosupport {
        let mut out = Vec::with_capacity(self.p - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for i in 0..self.p {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        Cosupport { indices: out, p: self.p }
    }

    pub fn to_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.p];
        for &i in &self.indices {
            mask[i] = true;
        }
        mask
    }

    pub fn is_superset_of(&self, other: &Cosupport) -> bool {
        other.indices.iter().all(|&i| self.contains(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_complement() {
        let c = Cosupport::new(vec![5, 1, 3], 7).unwrap();
        assert_eq!(c.indices(), &[1, 3, 5]);
        assert_eq!(c.complement().indices(), &[0, 2, 4, 6]);
        assert_eq!(c.complement().complement(), c);
        assert!(Cosupport::new(vec![1, 1], 3).is_err());
        assert!(Cosupport::new(vec![3], 3).is_err());
        assert_eq!(Cosupport::full(3).complement(), Cosupport::empty(3));
        assert_eq!(Cosupport::from_mask(&c.to_mask()), c);
        assert!(Cosupport::full(7).is_superset_of(&c));
    }
}
