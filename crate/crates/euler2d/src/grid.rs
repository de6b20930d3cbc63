use crate::{Error, Result};

/// Uniform periodic grid on the square `[-1, 1]^2`.
///
/// Nodes are `x_i = -1 + i*h`, `i = 0..n-1` per dimension with `h = 2/n`, so
/// the origin sits exactly on the node `i = n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    /// Creates a grid with `n` points per dimension. `n` must be a power of
    /// two and at least 32.
    pub fn new(n: usize) -> Result<Self> {
        if n < 32 || !n.is_power_of_two() {
            return Err(Error::GridSize { n });
        }
        Ok(Grid { n })
    }

    /// Points per dimension.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `h = 2/n`.
    #[inline]
    pub fn h(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Coordinate of node `i` (same in both dimensions).
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        -1.0 + self.h() * i as f64
    }

    /// Number of sine modes per dimension (`1..=n/2`).
    #[inline]
    pub fn modes(&self) -> usize {
        self.n / 2
    }

    /// Flat row-major index of the node `(i, m)`.
    #[inline]
    pub fn idx(&self, i: usize, m: usize) -> usize {
        i * self.n + m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_and_spacing() {
        let g = Grid::new(32).unwrap();
        assert_eq!(g.h(), 0.0625);
        assert_eq!(g.node(16), 0.0);
        assert_eq!(g.node(0), -1.0);

        let g = Grid::new(256).unwrap();
        assert_eq!(g.h(), 2.0 / 256.0);
        assert_eq!(g.h(), 0.0078125);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(Grid::new(100), Err(Error::GridSize { n: 100 })));
        assert!(matches!(Grid::new(16), Err(Error::GridSize { n: 16 })));
        assert!(matches!(Grid::new(0), Err(Error::GridSize { n: 0 })));
        assert!(Grid::new(32).is_ok());
        assert!(Grid::new(1024).is_ok());
    }
}
