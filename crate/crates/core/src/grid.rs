//! Row-packed storage for the segment triangle `{(i, j) : 0 ≤ i ≤ j ≤ n}`.

/// Index helper for the grid points `x_i = i / n`, `i = 0..=n`, restricted to
/// pairs `i ≤ j`. Rows are packed by `i`, so row `i` holds `n + 1 - i` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    n: usize,
}

impl Triangle {
    pub fn new(n: usize) -> Self {
        Triangle { n }
    }

    /// Number of subintervals; grid points are `0..=n`.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        (self.n + 1) * (self.n + 2) / 2
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn row_offset(&self, i: usize) -> usize {
        i * (self.n + 1) - i * i.saturating_sub(1) / 2
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j <= self.n, "({i}, {j}) outside triangle {}", self.n);
        self.row_offset(i) + (j - i)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// All cells in storage order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.n).flat_map(move |i| (i..=self.n).map(move |j| (i, j)))
    }
}

/// A real value per triangle cell, e.g. a tabulated segment function.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleTable {
    tri: Triangle,
    values: Vec<f64>,
}

impl TriangleTable {
    pub fn from_values(tri: Triangle, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), tri.len());
        TriangleTable { tri, values }
    }

    pub fn triangle(&self) -> Triangle {
        self.tri
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.tri.index(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest change between grid segments that differ in one endpoint by
    /// one grid step: an empirical modulus of continuity at scale `1/n`.
    pub fn adjacent_modulus(&self) -> f64 {
        let n = self.tri.n();
        let mut w = 0.0_f64;
        for (i, j) in self.tri.cells() {
            let v = self.get(i, j);
            if i + 1 <= j {
                w = w.max((self.get(i + 1, j) - v).abs());
            }
            if j < n {
                w = w.max((self.get(i, j + 1) - v).abs());
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_is_dense_and_ordered() {
        for n in [0, 1, 2, 7, 64] {
            let tri = Triangle::new(n);
            for (expected, (i, j)) in tri.cells().enumerate() {
                assert_eq!(tri.index(i, j), expected);
            }
            assert_eq!(tri.cells().count(), tri.len());
        }
    }
}
