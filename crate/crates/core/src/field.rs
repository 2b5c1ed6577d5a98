//! Scalar grid functions over the padded auxiliary grid.

use crate::mesh::GridSpec;

/// A scalar grid function stored over the full padded cube (interior cells
/// plus the one-cell ghost ring). The ghost ring stays zero for solutions of
/// the auxiliary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: usize,
    data: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize) -> Self {
        let p = n + 2;
        GridField {
            n,
            data: vec![0.0; p * p * p],
        }
    }

    /// Evaluates `f(x,y,z)` at every interior cell center.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let n = grid.cells_per_axis;
        let mut out = GridField::zeros(n);
        for j in 1..=n {
            for k in 1..=n {
                let row = grid.flat(j, k, 0);
                for l in 1..=n {
                    let c = grid.cell_center(j, k, l);
                    out.data[row + l] = f(c[0], c[1], c[2]);
                }
            }
        }
        out
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn padded(&self) -> usize {
        self.n + 2
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.data[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: f64) {
        self.data[idx] = v;
    }

    /// Maximum of `|values|` over a point list.
    pub fn max_abs_on(&self, points: &[usize]) -> f64 {
        points.iter().fold(0.0f64, |m, &i| m.max(self.data[i].abs()))
    }

    /// Minimum value over a point list.
    pub fn min_on(&self, points: &[usize]) -> f64 {
        points.iter().fold(f64::INFINITY, |m, &i| m.min(self.data[i]))
    }

    /// In-place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &GridField) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;

    #[test]
    fn from_fn_evaluates_at_centers() {
        let g = build_grid(0.5, 8, [0.0; 3]).unwrap();
        let f = GridField::from_fn(&g, |x, _, _| x);
        // first interior center along x is cube_min + h/2
        let idx = g.flat(1, 4, 4);
        assert!((f.get(idx) - (-1.0 + 0.125)).abs() < 1e-15);
        // ghost ring untouched
        assert_eq!(f.get(g.flat(0, 4, 4)), 0.0);
    }

    #[test]
    fn axpy_adds_scaled() {
        let g = build_grid(0.5, 8, [0.0; 3]).unwrap();
        let mut a = GridField::from_fn(&g, |x, y, z| x + y + z);
        let b = GridField::from_fn(&g, |x, y, z| x + y + z);
        a.axpy(-1.0, &b);
        assert!(a.values().iter().all(|&v| v == 0.0));
    }
}
