use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on the flat torus `[0,1)^p`, `p` in {1, 2}.
///
/// Nodes are stored x-fastest: flat index `i + n * j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGridSize(n));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of nodes, `n^p`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^p` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Multi-index of a flat index; unused trailing entries are zero.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx % self.n, idx / self.n],
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        match self.dim {
            1 => mi[0],
            _ => mi[0] + self.n * mi[1],
        }
    }

    /// Coordinates of a node; unused trailing entries are zero.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let mi = self.multi_index(idx);
        let h = self.h();
        [mi[0] as f64 * h, mi[1] as f64 * h]
    }

    /// Flat index of the node shifted by `offset` along `axis`, wrapping around.
    #[inline]
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.n as isize;
        let mut mi = self.multi_index(idx);
        let k = (mi[axis] as isize + offset).rem_euclid(n);
        mi[axis] = k as usize;
        self.flat_index(mi)
    }

    /// Reduce a point to `[0,1)^p`.
    pub fn wrap_point(&self, x: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for a in 0..self.dim {
            out[a] = x[a].rem_euclid(1.0);
            if out[a] >= 1.0 {
                out[a] = 0.0;
            }
        }
        out
    }
}

/// Distance on the unit circle.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Euclidean distance on the flat torus of dimension `dim`.
pub fn torus_distance(dim: usize, a: [f64; 2], b: [f64; 2]) -> f64 {
    (0..dim)
        .map(|k| circle_distance(a[k], b[k]).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = TorusGrid::new(1, 128).unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g.h(), 1.0 / 128.0);
        assert_eq!(g.h() * g.n() as f64, 1.0);
        let g2 = TorusGrid::new(2, 32).unwrap();
        assert_eq!(g2.len(), 1024);
        assert_eq!(TorusGrid::new(3, 64), Err(Error::UnsupportedDimension(3)));
        assert_eq!(TorusGrid::new(1, 6), Err(Error::InvalidGridSize(6)));
        assert_eq!(TorusGrid::new(1, 9), Err(Error::InvalidGridSize(9)));
    }

    #[test]
    fn wraparound() {
        let g = TorusGrid::new(2, 8).unwrap();
        let idx = g.flat_index([0, 7]);
        assert_eq!(g.multi_index(g.shift(idx, 0, -1)), [7, 7]);
        assert_eq!(g.multi_index(g.shift(idx, 1, 1)), [0, 0]);
        assert!((circle_distance(0.05, 0.95) - 0.1).abs() < 1e-15);
    }
}
