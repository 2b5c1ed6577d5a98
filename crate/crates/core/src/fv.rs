//! Hybrid finite-volume pieces of the scheme: minmod-limited piecewise
//! linear reconstruction, the upwind convection term, the IMEX right-hand
//! sides and the positivity-preserving time-step bound.

use rayon::prelude::*;

use crate::field::GridField;
use crate::mesh::{flags, GridSpec, PointClassification};

/// Model constants. The artifact fixes the parabolic-parabolic coupling
/// `alpha = gamma_c = gamma_rho = 1`; only the chemotactic sensitivity is
/// an effective degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub chi: f64,
    pub alpha: f64,
    pub gamma_c: f64,
    pub gamma_rho: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            chi: 1.0,
            alpha: 1.0,
            gamma_c: 1.0,
            gamma_rho: 1.0,
        }
    }
}

impl ModelParams {
    fn assert_fixed_coupling(&self) {
        debug_assert!(self.chi > 0.0);
        debug_assert_eq!(self.alpha, 1.0);
        debug_assert_eq!(self.gamma_c, 1.0);
        debug_assert_eq!(self.gamma_rho, 1.0);
    }
}

/// Minmod: the smallest argument if all are positive, the largest if all are
/// negative, zero otherwise.
pub fn minmod(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    if xs.iter().all(|&x| x > 0.0) {
        xs.iter().copied().fold(f64::INFINITY, f64::min)
    } else if xs.iter().all(|&x| x < 0.0) {
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    }
}

#[inline]
fn minmod3(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// Per-cell limited slopes and the six one-sided face values of the
/// piecewise linear reconstruction, over an explicit point list.
/// Face order is `[W, E, S, N, D, U]` = (x-,x+,y-,y+,z-,z+).
#[derive(Debug, Clone)]
pub struct FaceReconstruction {
    pub points: Vec<usize>,
    pub slopes: [Vec<f64>; 3],
    pub faces: [Vec<f64>; 6],
}

/// Limited slope of `rho` along one axis at a single cell. Falls back to a
/// zero slope when a required neighbor lies outside `N+`, which can only
/// happen for cells of `gamma_ex`.
#[inline]
fn slope_at(
    rho: &[f64],
    cls: &PointClassification,
    idx: usize,
    off: usize,
    h: f64,
) -> f64 {
    let prev = idx - off;
    let next = idx + off;
    if !cls.is(prev, flags::N_PLUS) || !cls.is(next, flags::N_PLUS) {
        return 0.0;
    }
    let fwd = 2.0 * (rho[next] - rho[idx]) / h;
    let ctr = (rho[next] - rho[prev]) / (2.0 * h);
    let bwd = 2.0 * (rho[idx] - rho[prev]) / h;
    minmod3(fwd, ctr, bwd)
}

/// Three slope fields over `M+ ∪ gamma_ex` (zero elsewhere). Internal
/// building block shared by [`limited_slopes`] and [`convection_term`].
fn slope_fields(rho: &GridField, cls: &PointClassification, grid: &GridSpec) -> [GridField; 3] {
    let n = grid.cells_per_axis;
    let p = grid.padded();
    let h = grid.spacing;
    let offsets = [p * p, p, 1usize];
    let mut out = [GridField::zeros(n), GridField::zeros(n), GridField::zeros(n)];
    let rho_v = rho.values();
    for (axis, field) in out.iter_mut().enumerate() {
        let off = offsets[axis];
        field
            .values_mut()
            .par_chunks_mut(p * p)
            .enumerate()
            .filter(|(j, _)| (1..=n).contains(j))
            .for_each(|(j, slab)| {
                let base = j * p * p;
                for k in 1..=n {
                    for l in 1..=n {
                        let loc = k * p + l;
                        let idx = base + loc;
                        let f = cls.flags[idx];
                        if f & (flags::M_PLUS | flags::GAMMA_EX) != 0 {
                            slab[loc] = slope_at(rho_v, cls, idx, off, h);
                        }
                    }
                }
            });
    }
    out
}

/// Builds the reconstruction data for an explicit list of cells
/// (typically `M+ ∪ gamma_ex`).
pub fn limited_slopes(
    rho: &GridField,
    cls: &PointClassification,
    grid: &GridSpec,
    points: &[usize],
) -> FaceReconstruction {
    let sf = slope_fields(rho, cls, grid);
    let h = grid.spacing;
    let m = points.len();
    let mut rec = FaceReconstruction {
        points: points.to_vec(),
        slopes: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
        faces: std::array::from_fn(|_| vec![0.0; m]),
    };
    for (i, &idx) in points.iter().enumerate() {
        let v = rho.get(idx);
        for axis in 0..3 {
            let s = sf[axis].get(idx);
            rec.slopes[axis][i] = s;
            rec.faces[2 * axis][i] = v - 0.5 * h * s;
            rec.faces[2 * axis + 1][i] = v + 0.5 * h * s;
        }
    }
    rec
}

/// Upwind face density for the face between `idx` and `idx+off` along one
/// axis: the gradient of `c` across the face selects the one-sided
/// reconstruction, ties taking the outside value.
#[inline]
fn upwind_face(
    rho: &[f64],
    slope: &[f64],
    grad: f64,
    idx: usize,
    off: usize,
    h: f64,
) -> f64 {
    if grad > 0.0 {
        rho[idx] + 0.5 * h * slope[idx]
    } else {
        rho[idx + off] - 0.5 * h * slope[idx + off]
    }
}

/// Discretization of the chemotactic convection term
/// `div(chi * rho * grad c)` on `M+`, with central face gradients of `c` and
/// upwind minmod-limited face densities.
pub fn convection_term(
    rho: &GridField,
    c: &GridField,
    params: &ModelParams,
    cls: &PointClassification,
    grid: &GridSpec,
) -> GridField {
    params.assert_fixed_coupling();
    let n = grid.cells_per_axis;
    let p = grid.padded();
    let h = grid.spacing;
    let chi = params.chi;
    let sf = slope_fields(rho, cls, grid);
    let rho_v = rho.values();
    let c_v = c.values();
    let offsets = [p * p, p, 1usize];

    let mut g = GridField::zeros(n);
    g.values_mut()
        .par_chunks_mut(p * p)
        .enumerate()
        .filter(|(j, _)| (1..=n).contains(j))
        .for_each(|(j, slab)| {
            let base = j * p * p;
            for k in 1..=n {
                for l in 1..=n {
                    let loc = k * p + l;
                    let idx = base + loc;
                    if cls.flags[idx] & flags::M_PLUS == 0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for axis in 0..3 {
                        let off = offsets[axis];
                        let slope = sf[axis].values();
                        let grad_hi = (c_v[idx + off] - c_v[idx]) / h;
                        let grad_lo = (c_v[idx] - c_v[idx - off]) / h;
                        let rho_hi = upwind_face(rho_v, slope, grad_hi, idx, off, h);
                        let rho_lo = upwind_face(rho_v, slope, grad_lo, idx - off, off, h);
                        acc += (rho_hi * grad_hi - rho_lo * grad_lo) / h;
                    }
                    slab[loc] = chi * acc;
                }
            }
        });
    g
}

/// IMEX right-hand sides on `M+`:
/// `f_rho = rho - dt*g` and `f_c = (1 - dt)*c + dt*rho`.
pub fn assemble_rhs(
    rho: &GridField,
    c: &GridField,
    g: &GridField,
    dt: f64,
    params: &ModelParams,
    cls: &PointClassification,
) -> (GridField, GridField) {
    params.assert_fixed_coupling();
    debug_assert!(dt > 0.0);
    let n = rho.n();
    let mut f_rho = GridField::zeros(n);
    let mut f_c = GridField::zeros(n);
    for &idx in &cls.m_plus {
        f_rho.set(idx, rho.get(idx) - dt * g.get(idx));
        f_c.set(idx, (1.0 - dt) * c.get(idx) + dt * rho.get(idx));
    }
    (f_rho, f_c)
}

/// Positivity-preserving time-step bound: the minimum over the three axes of
/// `h / (6*chi*max|grad_axis c|)`, the maxima taken over the faces of all
/// `M+` cells. Returns `+inf` when every face gradient vanishes.
pub fn cfl_dt(
    c: &GridField,
    params: &ModelParams,
    cls: &PointClassification,
    grid: &GridSpec,
) -> f64 {
    params.assert_fixed_coupling();
    let n = grid.cells_per_axis;
    let p = grid.padded();
    let h = grid.spacing;
    let c_v = c.values();
    let offsets = [p * p, p, 1usize];

    let maxima = (1..=n)
        .into_par_iter()
        .map(|j| {
            let mut m = [0.0f64; 3];
            for k in 1..=n {
                for l in 1..=n {
                    let idx = (j * p + k) * p + l;
                    if cls.flags[idx] & flags::M_PLUS == 0 {
                        continue;
                    }
                    for axis in 0..3 {
                        let off = offsets[axis];
                        let hi = ((c_v[idx + off] - c_v[idx]) / h).abs();
                        let lo = ((c_v[idx] - c_v[idx - off]) / h).abs();
                        m[axis] = m[axis].max(hi).max(lo);
                    }
                }
            }
            m
        })
        .reduce(
            || [0.0f64; 3],
            |a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])],
        );

    let mut bound = f64::INFINITY;
    for m in maxima {
        if m > 0.0 {
            bound = bound.min(h / (6.0 * params.chi * m));
        }
    }
    bound
}
