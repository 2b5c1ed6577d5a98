//! Cubic auxiliary grid, point-set classification and boundary geometry.
//!
//! The auxiliary cube has `n` cells per axis with spacing `h = 2r/(n-4)`,
//! so the cube extends two cell layers beyond the sphere of radius `r` on
//! every side. Cell centers are indexed `(j,k,l)` with `j,k,l in 1..=n`;
//! index 0 and n+1 address the single ghost layer around the cube. All
//! flat storage is lexicographic by `(j,k,l)` with `l` fastest, which is
//! the canonical ordering used by every list, vector and matrix downstream.

use crate::error::{DpmError, Result};
use crate::geometry::{boundary_projection, Point, Region, Sphere};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub radius: f64,
    pub cells_per_axis: usize,
    pub spacing: f64,
    pub center: Point,
    pub cube_min: Point,
    pub cube_max: Point,
}

impl GridSpec {
    /// Padded extent per axis (cells plus one ghost layer on each side).
    #[inline]
    pub fn padded(&self) -> usize {
        self.cells_per_axis + 2
    }

    /// Total padded storage size.
    #[inline]
    pub fn volume(&self) -> usize {
        let p = self.padded();
        p * p * p
    }

    /// Flat index of `(j,k,l)`, each in `0..padded()`.
    #[inline]
    pub fn flat(&self, j: usize, k: usize, l: usize) -> usize {
        let p = self.padded();
        (j * p + k) * p + l
    }

    /// Inverse of [`GridSpec::flat`].
    #[inline]
    pub fn unflat(&self, idx: usize) -> (usize, usize, usize) {
        let p = self.padded();
        (idx / (p * p), (idx / p) % p, idx % p)
    }

    /// Coordinates of the cell center `(j,k,l)` (1-based interior indexing;
    /// ghost indices extrapolate consistently).
    #[inline]
    pub fn cell_center(&self, j: usize, k: usize, l: usize) -> Point {
        let h = self.spacing;
        [
            self.cube_min[0] + (j as f64 - 0.5) * h,
            self.cube_min[1] + (k as f64 - 0.5) * h,
            self.cube_min[2] + (l as f64 - 0.5) * h,
        ]
    }

    #[inline]
    pub fn center_of_flat(&self, idx: usize) -> Point {
        let (j, k, l) = self.unflat(idx);
        self.cell_center(j, k, l)
    }
}

/// Builds the cubic auxiliary grid for a sphere of radius `r`.
pub fn build_grid(r: f64, n: usize, center: Point) -> Result<GridSpec> {
    if r <= 0.0 || !r.is_finite() {
        return Err(DpmError::InvalidGrid(format!("radius must be positive, got {r}")));
    }
    if n < 8 {
        return Err(DpmError::InvalidGrid(format!("need at least 8 cells per axis, got {n}")));
    }
    let h = 2.0 * r / ((n - 4) as f64);
    let half = r + 2.0 * h;
    Ok(GridSpec {
        radius: r,
        cells_per_axis: n,
        spacing: h,
        center,
        cube_min: [center[0] - half, center[1] - half, center[2] - half],
        cube_max: [center[0] + half, center[1] + half, center[2] + half],
    })
}

/// Classification of every cell center into the interior/exterior point sets,
/// with the derived stencil-closure sets. Flat index lists are in canonical
/// order.
#[derive(Debug, Clone)]
pub struct PointClassification {
    pub n: usize,
    /// Bit flags per padded grid location, see the `flags` constants.
    pub flags: Vec<u8>,
    pub m_plus: Vec<usize>,
    pub m_minus: Vec<usize>,
    pub n_plus: Vec<usize>,
    pub gamma: Vec<usize>,
    pub gamma_in: Vec<usize>,
    pub gamma_ex: Vec<usize>,
}

pub mod flags {
    pub const M_PLUS: u8 = 1 << 0;
    pub const M_MINUS: u8 = 1 << 1;
    pub const N_PLUS: u8 = 1 << 2;
    pub const N_MINUS: u8 = 1 << 3;
    pub const GAMMA: u8 = 1 << 4;
    pub const GAMMA_IN: u8 = 1 << 5;
    pub const GAMMA_EX: u8 = 1 << 6;
}

impl PointClassification {
    #[inline]
    pub fn is(&self, idx: usize, flag: u8) -> bool {
        self.flags[idx] & flag != 0
    }

    #[inline]
    pub fn in_m_plus(&self, idx: usize) -> bool {
        self.is(idx, flags::M_PLUS)
    }

    #[inline]
    pub fn in_n_plus(&self, idx: usize) -> bool {
        self.is(idx, flags::N_PLUS)
    }
}

/// The six stencil offsets of the 7-point Laplacian in flat-index space.
#[inline]
pub fn stencil_offsets(padded: usize) -> [isize; 6] {
    let p = padded as isize;
    [-(p * p), p * p, -p, p, -1, 1]
}

/// Classifies all cell centers of `grid` against `region` and derives the
/// point sets of the 7-point stencil set algebra.
pub fn classify_points(grid: &GridSpec, region: &Region) -> PointClassification {
    let n = grid.cells_per_axis;
    let vol = grid.volume();
    let mut fl = vec![0u8; vol];

    // M+ / M- over the interior cells.
    for j in 1..=n {
        for k in 1..=n {
            for l in 1..=n {
                let idx = grid.flat(j, k, l);
                if region.contains(grid.cell_center(j, k, l)) {
                    fl[idx] |= flags::M_PLUS;
                } else {
                    fl[idx] |= flags::M_MINUS;
                }
            }
        }
    }

    // Stencil closures N+ and N-.
    let offs = stencil_offsets(grid.padded());
    for j in 1..=n {
        for k in 1..=n {
            for l in 1..=n {
                let idx = grid.flat(j, k, l);
                let bit = if fl[idx] & flags::M_PLUS != 0 {
                    flags::N_PLUS
                } else {
                    flags::N_MINUS
                };
                fl[idx] |= bit;
                for off in offs {
                    let nb = (idx as isize + off) as usize;
                    fl[nb] |= bit;
                }
            }
        }
    }

    // gamma = N+ ∩ N-, split by M+/M-.
    for f in fl.iter_mut() {
        if *f & flags::N_PLUS != 0 && *f & flags::N_MINUS != 0 {
            *f |= flags::GAMMA;
            if *f & flags::M_PLUS != 0 {
                *f |= flags::GAMMA_IN;
            } else if *f & flags::M_MINUS != 0 {
                *f |= flags::GAMMA_EX;
            }
            // gamma points in the ghost ring carry neither M flag; they can
            // only arise for spheres reaching the cube hull, which the mesh
            // convention h = 2r/(n-4) rules out.
        }
    }

    let mut cls = PointClassification {
        n,
        flags: fl,
        m_plus: Vec::new(),
        m_minus: Vec::new(),
        n_plus: Vec::new(),
        gamma: Vec::new(),
        gamma_in: Vec::new(),
        gamma_ex: Vec::new(),
    };
    let p = grid.padded();
    for j in 0..p {
        for k in 0..p {
            for l in 0..p {
                let idx = grid.flat(j, k, l);
                let f = cls.flags[idx];
                if f & flags::M_PLUS != 0 {
                    cls.m_plus.push(idx);
                }
                if f & flags::M_MINUS != 0 {
                    cls.m_minus.push(idx);
                }
                if f & flags::N_PLUS != 0 {
                    cls.n_plus.push(idx);
                }
                if f & flags::GAMMA != 0 {
                    cls.gamma.push(idx);
                }
                if f & flags::GAMMA_IN != 0 {
                    cls.gamma_in.push(idx);
                }
                if f & flags::GAMMA_EX != 0 {
                    cls.gamma_ex.push(idx);
                }
            }
        }
    }
    cls
}

/// Projection geometry of a list of grid points relative to one sphere.
#[derive(Debug, Clone)]
pub struct BoundaryGeometry {
    pub sphere: Sphere,
    /// Flat grid indices, canonical order.
    pub points: Vec<usize>,
    pub projection: Vec<Point>,
    pub signed_distance: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub normal: Vec<Point>,
}

impl BoundaryGeometry {
    pub fn build(grid: &GridSpec, points: &[usize], sphere: &Sphere) -> Result<Self> {
        let mut geom = BoundaryGeometry {
            sphere: *sphere,
            points: points.to_vec(),
            projection: Vec::with_capacity(points.len()),
            signed_distance: Vec::with_capacity(points.len()),
            theta: Vec::with_capacity(points.len()),
            phi: Vec::with_capacity(points.len()),
            normal: Vec::with_capacity(points.len()),
        };
        for &idx in points {
            let p = grid.center_of_flat(idx);
            let (proj, d, theta, phi, n) = boundary_projection(p, sphere)?;
            geom.projection.push(proj);
            geom.signed_distance.push(d);
            geom.theta.push(theta);
            geom.phi.push(phi);
            geom.normal.push(n);
        }
        Ok(geom)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Splits a discrete grid boundary into the two polar-angle bands of the
/// Case 2 wedge decomposition. A point lands in the first band when the
/// polar angle of its projection lies in `[0, theta_star + eps]` and in the
/// second when it lies in `[theta_star - eps, pi]`; the bands overlap when
/// `eps > 0`.
pub fn case2_boundary_split(
    geom: &BoundaryGeometry,
    theta_star: f64,
    eps: f64,
) -> (Vec<usize>, Vec<usize>) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (i, &idx) in geom.points.iter().enumerate() {
        let th = geom.theta[i];
        if th <= theta_star + eps {
            first.push(idx);
        }
        if th >= theta_star - eps {
            second.push(idx);
        }
    }
    (first, second)
}
