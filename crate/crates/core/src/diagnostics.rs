//! Error norms, scalar diagnostics and the blow-up stoppage criterion.
//!
//! All sums use a fixed-tree pairwise reduction in canonical point order so
//! results are bit-identical regardless of thread count.

use crate::error::{DpmError, Result};
use crate::field::GridField;
use crate::mesh::GridSpec;

/// One line of the per-step diagnostics series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub max_rho: f64,
    pub second_moment: f64,
    pub free_energy: f64,
    pub bep_residual: f64,
    pub clamp: f64,
}

/// Deterministic pairwise summation (fixed binary tree over the input
/// order).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Trilinear sample of `field` at an arbitrary point.
pub fn sample_trilinear(field: &GridField, grid: &GridSpec, point: [f64; 3]) -> f64 {
    let n = grid.cells_per_axis;
    let h = grid.spacing;
    let mut base = [0usize; 3];
    let mut frac = [0f64; 3];
    for a in 0..3 {
        let u = (point[a] - grid.cube_min[a]) / h + 0.5;
        let j0 = (u.floor() as isize).clamp(1, n as isize - 1) as usize;
        base[a] = j0;
        frac[a] = (u - j0 as f64).clamp(0.0, 1.0);
    }
    let mut acc = 0.0;
    for dj in 0..2 {
        let wj = if dj == 0 { 1.0 - frac[0] } else { frac[0] };
        for dk in 0..2 {
            let wk = if dk == 0 { 1.0 - frac[1] } else { frac[1] };
            for dl in 0..2 {
                let wl = if dl == 0 { 1.0 - frac[2] } else { frac[2] };
                let idx = grid.flat(base[0] + dj, base[1] + dk, base[2] + dl);
                acc += wj * wk * wl * field.get(idx);
            }
        }
    }
    acc
}

fn cubic_weights(t: f64) -> [f64; 4] {
    // Lagrange cubic on nodes {-1, 0, 1, 2} evaluated at offset t from node 0
    let tm = t - 1.0;
    let tp = t + 1.0;
    let t2 = t - 2.0;
    [
        -t * tm * t2 / 6.0,
        tp * tm * t2 / 2.0,
        -tp * t * t2 / 2.0,
        tp * t * tm / 6.0,
    ]
}

/// Tricubic Lagrange sample; requires the 4x4x4 neighborhood to lie inside
/// the interior index range.
fn sample_tricubic(field: &GridField, grid: &GridSpec, point: [f64; 3]) -> Option<f64> {
    let n = grid.cells_per_axis;
    let h = grid.spacing;
    let mut base = [0usize; 3];
    let mut w = [[0f64; 4]; 3];
    for a in 0..3 {
        let u = (point[a] - grid.cube_min[a]) / h + 0.5;
        let j0 = u.floor() as isize;
        if j0 < 2 || j0 > n as isize - 2 {
            return None;
        }
        base[a] = j0 as usize;
        w[a] = cubic_weights(u - j0 as f64);
    }
    let mut acc = 0.0;
    for dj in 0..4 {
        for dk in 0..4 {
            let row = w[0][dj] * w[1][dk];
            for dl in 0..4 {
                let idx = grid.flat(base[0] + dj - 1, base[1] + dk - 1, base[2] + dl - 1);
                acc += row * w[2][dl] * field.get(idx);
            }
        }
    }
    Some(acc)
}

/// Samples a reference solution at a point of a coarser grid. Uses tricubic
/// interpolation away from the domain boundary, where its whole stencil
/// carries valid data, and falls back to trilinear in the boundary layer.
pub fn sample_reference(field: &GridField, grid: &GridSpec, point: [f64; 3]) -> f64 {
    let r = grid.radius;
    let h = grid.spacing;
    let d = crate::geometry::dist(point, grid.center);
    if d <= r - 3.0 * h {
        if let Some(v) = sample_tricubic(field, grid, point) {
            return v;
        }
    }
    sample_trilinear(field, grid, point)
}

/// Infinity-norm error of `u_h` on its masked points against a reference
/// field on the same or a finer grid.
pub fn error_inf(
    u_h: &GridField,
    grid_h: &GridSpec,
    mask: &[usize],
    u_ref: &GridField,
    grid_ref: &GridSpec,
) -> Result<f64> {
    if mask.is_empty() {
        return Err(DpmError::EmptyMask);
    }
    if grid_h == grid_ref {
        let mut worst = 0.0f64;
        for &idx in mask {
            worst = worst.max((u_h.get(idx) - u_ref.get(idx)).abs());
        }
        return Ok(worst);
    }
    if grid_ref.spacing > grid_h.spacing * (1.0 + 1e-12) {
        return Err(DpmError::MeshMismatch(format!(
            "reference grid (h={}) is coarser than the solution grid (h={})",
            grid_ref.spacing, grid_h.spacing
        )));
    }
    let mut worst = 0.0f64;
    for &idx in mask {
        let p = grid_h.center_of_flat(idx);
        let r = sample_reference(u_ref, grid_ref, p);
        worst = worst.max((u_h.get(idx) - r).abs());
    }
    Ok(worst)
}

/// L2-in-time relative error of a max-density trace against a reference
/// trace recorded with the same step count and step size.
pub fn error_rel_timeseries(series_h: &[f64], series_ref: &[f64], dt: f64) -> Result<f64> {
    if series_h.len() != series_ref.len() {
        return Err(DpmError::SeriesMismatch(series_h.len(), series_ref.len()));
    }
    let diff: Vec<f64> = series_h
        .iter()
        .zip(series_ref)
        .map(|(a, b)| (a - b) * (a - b) * dt)
        .collect();
    let base: Vec<f64> = series_ref.iter().map(|b| b * b * dt).collect();
    Ok((pairwise_sum(&diff) / pairwise_sum(&base)).sqrt())
}

/// Max-norm difference of two fields over a mask on one common mesh.
pub fn error_time(u_a: &GridField, u_b: &GridField, mask: &[usize]) -> Result<f64> {
    if u_a.n() != u_b.n() {
        return Err(DpmError::MeshMismatch(format!(
            "fields live on different meshes: {} vs {}",
            u_a.n(),
            u_b.n()
        )));
    }
    let mut worst = 0.0f64;
    for &idx in mask {
        worst = worst.max((u_a.get(idx) - u_b.get(idx)).abs());
    }
    Ok(worst)
}

/// Masked maximum of `|rho|` across one or more (sub-)domains.
pub fn max_density(parts: &[(&GridField, &[usize])]) -> Result<f64> {
    if parts.iter().all(|(_, m)| m.is_empty()) {
        return Err(DpmError::EmptyMask);
    }
    let mut worst = f64::NEG_INFINITY;
    for (field, mask) in parts {
        for &idx in mask.iter() {
            worst = worst.max(field.get(idx).abs());
        }
    }
    Ok(worst)
}

/// Second moment `sum h^3 (x^2+y^2+z^2) rho` over the masked cells of each
/// (sub-)domain.
pub fn second_moment(parts: &[(&GridField, &GridSpec, &[usize])]) -> f64 {
    let mut total = 0.0;
    for (field, grid, mask) in parts {
        let h3 = grid.spacing.powi(3);
        let terms: Vec<f64> = mask
            .iter()
            .map(|&idx| {
                let c = grid.center_of_flat(idx);
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) * field.get(idx)
            })
            .collect();
        total += h3 * pairwise_sum(&terms);
    }
    total
}

/// Discrete free energy of the chemotaxis system, summed over the masked
/// cells of each (sub-)domain. `c` must carry values on the stencil
/// neighbors of every masked cell; `0*ln(0)` counts as zero.
pub fn free_energy(parts: &[(&GridField, &GridField, &GridSpec, &[usize])]) -> Result<f64> {
    let mut total = 0.0;
    for (rho, c, grid, mask) in parts {
        let h = grid.spacing;
        let h3 = h * h * h;
        let p = grid.padded();
        let grad_scale = 1.0 / (8.0 * h * h);
        let mut terms = Vec::with_capacity(mask.len());
        for &idx in mask.iter() {
            let rv = rho.get(idx);
            if rv < 0.0 {
                return Err(DpmError::NegativeDensity(rv));
            }
            let entropy = if rv == 0.0 { 0.0 } else { rv * rv.ln() };
            let cv = c.get(idx);
            let dx = c.get(idx + p * p) - c.get(idx - p * p);
            let dy = c.get(idx + p) - c.get(idx - p);
            let dz = c.get(idx + 1) - c.get(idx - 1);
            terms.push(
                entropy - rv * cv + 0.5 * cv * cv + grad_scale * (dx * dx + dy * dy + dz * dz),
            );
        }
        total += h3 * pairwise_sum(&terms);
    }
    Ok(total)
}

/// Stoppage criterion: the max density rose by at least `threshold` over one
/// step (inclusive).
pub fn blow_up_check(max_rho_now: f64, max_rho_prev: f64, threshold: f64) -> bool {
    max_rho_now - max_rho_prev >= threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Region, Sphere};
    use crate::mesh::{build_grid, classify_points};

    fn setup(n: usize) -> (GridSpec, Vec<usize>) {
        let g = build_grid(0.5, n, [0.0; 3]).unwrap();
        let cls = classify_points(&g, &Region::Ball(Sphere::new([0.0; 3], 0.5)));
        (g, cls.m_plus)
    }

    #[test]
    fn pairwise_matches_sequential_on_smooth_data() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.1).sin()).collect();
        let seq: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - seq).abs() < 1e-9);
    }

    #[test]
    fn error_inf_same_grid() {
        let (g, mask) = setup(12);
        let a = GridField::from_fn(&g, |x, y, z| x + y + z);
        let mut b = a.clone();
        assert_eq!(error_inf(&a, &g, &mask, &b, &g).unwrap(), 0.0);
        b.set(mask[3], b.get(mask[3]) + 0.5);
        assert!((error_inf(&a, &g, &mask, &b, &g).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn error_inf_cross_grid_interpolation() {
        // smooth cubic field is reproduced exactly by tricubic sampling
        let coarse = build_grid(0.5, 12, [0.0; 3]).unwrap();
        let fine = build_grid(0.5, 28, [0.0; 3]).unwrap();
        let f = |x: f64, y: f64, z: f64| 1.0 + x + y * y + z * z * z + x * y;
        let u_c = GridField::from_fn(&coarse, f);
        let u_f = GridField::from_fn(&fine, f);
        let cls = classify_points(&coarse, &Region::Ball(Sphere::new([0.0; 3], 0.5)));
        // restrict to cells well inside so the cubic stencil is interior
        let deep: Vec<usize> = cls
            .m_plus
            .iter()
            .copied()
            .filter(|&idx| {
                let c = coarse.center_of_flat(idx);
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() < 0.5 - 3.5 * fine.spacing
            })
            .collect();
        let err = error_inf(&u_c, &coarse, &deep, &u_f, &fine).unwrap();
        assert!(err < 1e-12, "tricubic must reproduce cubics: {err}");
        // coarser reference is rejected
        assert!(error_inf(&u_f, &fine, &cls.m_plus, &u_c, &coarse).is_err());
    }

    #[test]
    fn error_rel_series_basics() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(error_rel_timeseries(&a, &a, 0.1).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        assert!((error_rel_timeseries(&b, &a, 0.1).unwrap() - 1.0).abs() < 1e-14);
        assert!(error_rel_timeseries(&a, &a[..2], 0.1).is_err());
    }

    #[test]
    fn max_density_masked() {
        let (g, mask) = setup(10);
        let f = GridField::from_fn(&g, |_, _, _| 2.5);
        assert_eq!(max_density(&[(&f, &mask)]).unwrap(), 2.5);
        assert!(max_density(&[(&f, &[])]).is_err());
        // DD form takes the max across sub-domains
        let f2 = GridField::from_fn(&g, |_, _, _| 3.5);
        assert_eq!(max_density(&[(&f, &mask), (&f2, &mask)]).unwrap(), 3.5);
    }

    #[test]
    fn second_moment_values() {
        let (g, mask) = setup(10);
        let zero = GridField::zeros(10);
        assert_eq!(second_moment(&[(&zero, &g, &mask)]), 0.0);

        // single unit cell contributes h^3 |center|^2
        let mut one = GridField::zeros(10);
        let idx = mask[0];
        one.set(idx, 1.0);
        let c = g.center_of_flat(idx);
        let expected = g.spacing.powi(3) * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
        assert!((second_moment(&[(&one, &g, &mask)]) - expected).abs() < 1e-15);
    }

    #[test]
    fn free_energy_values() {
        let (g, mask) = setup(10);
        let h3 = g.spacing.powi(3);

        let ones = GridField::from_fn(&g, |_, _, _| 1.0);
        let zero = GridField::zeros(10);
        let e = free_energy(&[(&ones, &zero, &g, &mask)]).unwrap();
        assert!(e.abs() < 1e-15, "ln 1 = 0 everywhere: {e}");

        // rho = e at a single cell with zero c: contribution h^3 * e
        let mut rho = GridField::zeros(10);
        rho.set(mask[0], std::f64::consts::E);
        let e = free_energy(&[(&rho, &zero, &g, &[mask[0]])]).unwrap();
        assert!((e - h3 * std::f64::consts::E).abs() < 1e-15);

        // rho = 0, c = 1 everywhere: only the c^2/2 term survives
        let cfield = GridField::from_fn(&g, |_, _, _| 1.0);
        // interior cells away from the field edge so neighbors are all 1
        let deep: Vec<usize> = mask
            .iter()
            .copied()
            .filter(|&idx| {
                let c = g.center_of_flat(idx);
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() < 0.3
            })
            .collect();
        let e = free_energy(&[(&zero, &cfield, &g, &deep)]).unwrap();
        assert!((e - h3 * deep.len() as f64 * 0.5).abs() < 1e-12);

        // negative density rejected
        let mut bad = GridField::zeros(10);
        bad.set(mask[0], -1.0);
        assert!(free_energy(&[(&bad, &zero, &g, &mask)]).is_err());
    }

    #[test]
    fn stoppage_thresholds() {
        assert!(!blow_up_check(1999.999, 1000.0, 1000.0));
        assert!(blow_up_check(2000.0, 1000.0, 1000.0));
        assert!(blow_up_check(1e6 + 1000.0, 1000.0, 1000.0));
    }
}
