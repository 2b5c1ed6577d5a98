//! Direct solver for the discrete auxiliary problem
//! `(I - dt*Lap_h) v = q` on the cube interior with zero ghost values.
//!
//! With the homogeneous Dirichlet ghost closure the 7-point operator is
//! diagonalized exactly by the type-I discrete sine transform, so one solve
//! is a forward 3D DST, a pointwise division by the eigenvalues
//! `1 + dt*(lam_j + lam_k + lam_l)` and an inverse 3D DST.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rustdct::{Dst1, DctPlanner};

use crate::error::{DpmError, Result};
use crate::field::GridField;

pub struct SolverPlan {
    n: usize,
    h: f64,
    dt: f64,
    /// `lam_m = (2/h^2)(1 - cos(m*pi/(n+1)))`, `m = 1..=n`.
    eigenvalues: Vec<f64>,
    dst: Arc<dyn Dst1<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for SolverPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverPlan")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("dt", &self.dt)
            .finish()
    }
}

impl SolverPlan {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

pub fn make_plan(n: usize, h: f64, dt: f64) -> Result<SolverPlan> {
    if n < 4 {
        return Err(DpmError::InvalidPlan(format!("need n >= 4, got {n}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(DpmError::InvalidPlan(format!("spacing must be positive, got {h}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DpmError::InvalidPlan(format!("time step must be positive, got {dt}")));
    }
    let scale = 2.0 / (h * h);
    let denom = (n + 1) as f64;
    let eigenvalues = (1..=n)
        .map(|m| scale * (1.0 - (m as f64 * std::f64::consts::PI / denom).cos()))
        .collect();
    let dst = DctPlanner::new().plan_dst1(n);
    let scratch_len = dst.get_scratch_len();
    Ok(SolverPlan {
        n,
        h,
        dt,
        eigenvalues,
        dst,
        scratch_len,
    })
}

/// One unnormalized DST-I pass along the contiguous axis (`l`).
fn pass_axis_l(plan: &SolverPlan, data: &mut [f64]) {
    let n = plan.n;
    let p = n + 2;
    let dst = &plan.dst;
    data.par_chunks_mut(p * p)
        .enumerate()
        .filter(|(j, _)| (1..=n).contains(j))
        .for_each_init(
            || vec![0.0f64; plan.scratch_len],
            |scratch, (_, slab)| {
                for k in 1..=n {
                    let start = k * p + 1;
                    dst.process_dst1_with_scratch(&mut slab[start..start + n], scratch);
                }
            },
        );
}

/// One unnormalized DST-I pass along axis `k` (stride `p` inside each slab).
fn pass_axis_k(plan: &SolverPlan, data: &mut [f64]) {
    let n = plan.n;
    let p = n + 2;
    let dst = &plan.dst;
    data.par_chunks_mut(p * p)
        .enumerate()
        .filter(|(j, _)| (1..=n).contains(j))
        .for_each_init(
            || (vec![0.0f64; n], vec![0.0f64; plan.scratch_len]),
            |(line, scratch), (_, slab)| {
                for l in 1..=n {
                    for k in 1..=n {
                        line[k - 1] = slab[k * p + l];
                    }
                    dst.process_dst1_with_scratch(line, scratch);
                    for k in 1..=n {
                        slab[k * p + l] = line[k - 1];
                    }
                }
            },
        );
}

/// One unnormalized DST-I pass along axis `j` (stride `p*p`). Lines are
/// gathered into a dense workspace, transformed there, and scattered back
/// slab by slab so every mutable access stays disjoint.
fn pass_axis_j(plan: &SolverPlan, data: &mut [f64]) {
    let n = plan.n;
    let p = n + 2;
    let dst = &plan.dst;
    let mut lines = vec![0.0f64; n * n * n];
    {
        let data_ref = &*data;
        lines
            .par_chunks_mut(n)
            .enumerate()
            .for_each_init(
                || vec![0.0f64; plan.scratch_len],
                |scratch, (q, line)| {
                    let k = 1 + q / n;
                    let l = 1 + q % n;
                    for j in 1..=n {
                        line[j - 1] = data_ref[(j * p + k) * p + l];
                    }
                    dst.process_dst1_with_scratch(line, scratch);
                },
            );
    }
    data.par_chunks_mut(p * p)
        .enumerate()
        .filter(|(j, _)| (1..=n).contains(j))
        .for_each(|(j, slab)| {
            for k in 1..=n {
                let row = (k - 1) * n;
                for l in 1..=n {
                    slab[k * p + l] = lines[(row + l - 1) * n + j - 1];
                }
            }
        });
}

/// Solves the auxiliary problem. The right-hand side is read on the cube
/// interior only; the returned field carries the solution on the interior
/// and exact zeros on the ghost ring.
pub fn solve_ap(plan: &SolverPlan, q: &GridField) -> Result<GridField> {
    if q.n() != plan.n {
        return Err(DpmError::PlanMismatch {
            plan_n: plan.n,
            field_n: q.n(),
        });
    }
    let n = plan.n;
    let p = n + 2;
    let mut out = GridField::zeros(n);
    {
        let src = q.values();
        let dstv = out.values_mut();
        dstv.par_chunks_mut(p * p)
            .enumerate()
            .filter(|(j, _)| (1..=n).contains(j))
            .for_each(|(j, slab)| {
                let base = j * p * p;
                for k in 1..=n {
                    let start = k * p + 1;
                    slab[start..start + n].copy_from_slice(&src[base + start..base + start + n]);
                }
            });
    }

    let data = out.values_mut();
    pass_axis_l(plan, data);
    pass_axis_k(plan, data);
    pass_axis_j(plan, data);

    // Pointwise division by the operator eigenvalues, with the DST-I
    // round-trip normalization ((n+1)/2 per axis) folded in.
    let norm = ((n + 1) as f64 / 2.0).powi(3);
    let dt = plan.dt;
    let lam = &plan.eigenvalues;
    data.par_chunks_mut(p * p)
        .enumerate()
        .filter(|(j, _)| (1..=n).contains(j))
        .for_each(|(j, slab)| {
            let lj = lam[j - 1];
            for k in 1..=n {
                let lk = lam[k - 1];
                let row = k * p;
                for l in 1..=n {
                    let denom = (1.0 + dt * (lj + lk + lam[l - 1])) * norm;
                    slab[row + l] /= denom;
                }
            }
        });

    pass_axis_l(plan, data);
    pass_axis_k(plan, data);
    pass_axis_j(plan, data);
    Ok(out)
}

/// Applies `(I - dt*Lap_h)` at every interior point, using the stored ghost
/// values (zero for AP solutions).
pub fn apply_operator(h: f64, dt: f64, v: &GridField) -> GridField {
    let n = v.n();
    let p = n + 2;
    let r = dt / (h * h);
    let mut out = GridField::zeros(n);
    let src = v.values();
    out.values_mut()
        .par_chunks_mut(p * p)
        .enumerate()
        .filter(|(j, _)| (1..=n).contains(j))
        .for_each(|(j, slab)| {
            let base = j * p * p;
            for k in 1..=n {
                for l in 1..=n {
                    let idx = base + k * p + l;
                    let sum = src[idx - p * p]
                        + src[idx + p * p]
                        + src[idx - p]
                        + src[idx + p]
                        + src[idx - 1]
                        + src[idx + 1];
                    slab[k * p + l] = src[idx] - r * (sum - 6.0 * src[idx]);
                }
            }
        });
    out
}

/// Dense direct solve of the auxiliary problem for small grids; the test
/// oracle for [`solve_ap`].
pub fn dense_oracle_solve(n: usize, h: f64, dt: f64, q: &GridField) -> Result<GridField> {
    if n > 16 {
        return Err(DpmError::OracleTooLarge(n));
    }
    if q.n() != n {
        return Err(DpmError::PlanMismatch {
            plan_n: n,
            field_n: q.n(),
        });
    }
    let m = n * n * n;
    let r = dt / (h * h);
    let interior = |j: usize, k: usize, l: usize| ((j - 1) * n + (k - 1)) * n + (l - 1);
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut b = nalgebra::DVector::<f64>::zeros(m);
    let p = n + 2;
    for j in 1..=n {
        for k in 1..=n {
            for l in 1..=n {
                let row = interior(j, k, l);
                a[(row, row)] = 1.0 + 6.0 * r;
                let mut nb = |jj: usize, kk: usize, ll: usize| {
                    if (1..=n).contains(&jj) && (1..=n).contains(&kk) && (1..=n).contains(&ll) {
                        a[(row, interior(jj, kk, ll))] = -r;
                    }
                };
                nb(j - 1, k, l);
                nb(j + 1, k, l);
                nb(j, k - 1, l);
                nb(j, k + 1, l);
                nb(j, k, l - 1);
                nb(j, k, l + 1);
                b[row] = q.values()[(j * p + k) * p + l];
            }
        }
    }
    let lu = a.lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| DpmError::InvalidPlan("singular dense AP matrix".into()))?;
    let mut out = GridField::zeros(n);
    for j in 1..=n {
        for k in 1..=n {
            for l in 1..=n {
                out.set((j * p + k) * p + l, x[interior(j, k, l)]);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct PlanKey {
    n: usize,
    h_bits: u64,
    dt_bits: u64,
}

/// Small LRU cache of solver plans keyed bit-exactly by `(n, h, dt)`. Near
/// blow-up the time step shrinks every few levels, so a short history is
/// enough.
pub struct PlanCache {
    capacity: usize,
    entries: Mutex<Vec<(PlanKey, Arc<SolverPlan>)>>,
}

impl PlanCache {
    pub fn new(capacity: usize) -> Self {
        PlanCache {
            capacity: capacity.max(1),
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn get(&self, n: usize, h: f64, dt: f64) -> Result<Arc<SolverPlan>> {
        let key = PlanKey {
            n,
            h_bits: h.to_bits(),
            dt_bits: dt.to_bits(),
        };
        let mut entries = self.entries.lock().unwrap();
        if let Some(pos) = entries.iter().position(|(k, _)| *k == key) {
            let hit = entries.remove(pos);
            let plan = hit.1.clone();
            entries.insert(0, hit);
            return Ok(plan);
        }
        let plan = Arc::new(make_plan(n, h, dt)?);
        entries.insert(0, (key, plan.clone()));
        entries.truncate(self.capacity);
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for PlanCache {
    fn default() -> Self {
        PlanCache::new(4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;

    fn sine_mode(n: usize, a: usize, b: usize, c: usize) -> GridField {
        let mut f = GridField::zeros(n);
        let p = n + 2;
        let denom = (n + 1) as f64;
        for j in 1..=n {
            for k in 1..=n {
                for l in 1..=n {
                    let v = (a as f64 * j as f64 * std::f64::consts::PI / denom).sin()
                        * (b as f64 * k as f64 * std::f64::consts::PI / denom).sin()
                        * (c as f64 * l as f64 * std::f64::consts::PI / denom).sin();
                    f.set((j * p + k) * p + l, v);
                }
            }
        }
        f
    }

    fn pseudo_random_field(n: usize, seed: u64) -> GridField {
        // xorshift; good enough to stress the solver deterministically
        let mut s = seed.max(1);
        let mut f = GridField::zeros(n);
        let p = n + 2;
        for j in 1..=n {
            for k in 1..=n {
                for l in 1..=n {
                    s ^= s << 13;
                    s ^= s >> 7;
                    s ^= s << 17;
                    let v = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                    f.set((j * p + k) * p + l, v);
                }
            }
        }
        f
    }

    #[test]
    fn plan_eigenvalue_closed_form() {
        let plan = make_plan(4, 1.0, 1.0).unwrap();
        let expected = 2.0 * (1.0 - (std::f64::consts::PI / 5.0).cos());
        assert!((plan.eigenvalues()[0] - expected).abs() < 1e-15);
        assert!((expected - 0.381966).abs() < 1e-6);
    }

    #[test]
    fn plan_eigenvalues_scale_with_h() {
        let a = make_plan(4, 1.0, 0.3).unwrap();
        let b = make_plan(4, 0.5, 0.3).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((4.0 * x - y).abs() < 1e-12 * y.abs());
        }
    }

    #[test]
    fn plan_symbol_stays_above_one() {
        let plan = make_plan(10, 0.05, 2.0e-3).unwrap();
        let min_sym = plan
            .eigenvalues()
            .iter()
            .map(|l| 1.0 + plan.dt() * 3.0 * l)
            .fold(f64::INFINITY, f64::min);
        assert!(min_sym > 1.0);
    }

    #[test]
    fn plan_rejects_bad_inputs() {
        assert!(make_plan(3, 1.0, 1.0).is_err());
        assert!(make_plan(8, 0.0, 1.0).is_err());
        assert!(make_plan(8, 1.0, -0.1).is_err());
    }

    #[test]
    fn plan_build_is_bit_reproducible() {
        let a = make_plan(20, 1.0 / 16.0, 1e-3).unwrap();
        let b = make_plan(20, 1.0 / 16.0, 1e-3).unwrap();
        assert_eq!(a.eigenvalues(), b.eigenvalues());
    }

    #[test]
    fn solve_zero_is_zero() {
        let plan = make_plan(6, 0.1, 1e-2).unwrap();
        let v = solve_ap(&plan, &GridField::zeros(6)).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn solve_recovers_eigenfunction() {
        let n = 6;
        let (h, dt) = (0.2, 3e-3);
        let plan = make_plan(n, h, dt).unwrap();
        let (a, b, c) = (2usize, 1usize, 3usize);
        let lam = plan.eigenvalues();
        let factor = 1.0 + dt * (lam[a - 1] + lam[b - 1] + lam[c - 1]);
        let mut q = sine_mode(n, a, b, c);
        for v in q.values_mut() {
            *v *= factor;
        }
        let v = solve_ap(&plan, &q).unwrap();
        let expected = sine_mode(n, a, b, c);
        let p = n + 2;
        for j in 1..=n {
            for k in 1..=n {
                for l in 1..=n {
                    let idx = (j * p + k) * p + l;
                    assert!((v.get(idx) - expected.get(idx)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn solve_matches_dense_oracle() {
        let n = 6;
        let (h, dt) = (1.0 / 8.0, 5e-3);
        let plan = make_plan(n, h, dt).unwrap();
        let q = pseudo_random_field(n, 42);
        let fast = solve_ap(&plan, &q).unwrap();
        let dense = dense_oracle_solve(n, h, dt, &q).unwrap();
        let mut err = 0.0f64;
        for (a, b) in fast.values().iter().zip(dense.values()) {
            err = err.max((a - b).abs());
        }
        assert!(err < 1e-10, "fast vs dense mismatch {err}");
    }

    #[test]
    fn solve_residual_and_ghosts() {
        let n = 10;
        let g = build_grid(0.5, n, [0.0; 3]).unwrap();
        let (h, dt) = (g.spacing, 0.5 * g.spacing * g.spacing);
        let plan = make_plan(n, h, dt).unwrap();
        let q = pseudo_random_field(n, 7);
        let v = solve_ap(&plan, &q).unwrap();
        let back = apply_operator(h, dt, &v);
        let q_inf = q.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let p = n + 2;
        for j in 1..=n {
            for k in 1..=n {
                for l in 1..=n {
                    let idx = (j * p + k) * p + l;
                    assert!((back.get(idx) - q.get(idx)).abs() <= 1e-11 * (1.0 + q_inf));
                }
            }
        }
        // ghost ring must be exactly zero
        for j in [0usize, n + 1] {
            for k in 0..p {
                for l in 0..p {
                    assert_eq!(v.get((j * p + k) * p + l), 0.0);
                }
            }
        }
    }

    #[test]
    fn solve_is_linear() {
        let n = 8;
        let (h, dt) = (0.125, 1e-2);
        let plan = make_plan(n, h, dt).unwrap();
        let q1 = pseudo_random_field(n, 1);
        let q2 = pseudo_random_field(n, 2);
        let (alpha, beta) = (0.37, -1.91);
        let mut combo = GridField::zeros(n);
        combo.axpy(alpha, &q1);
        combo.axpy(beta, &q2);
        let direct = solve_ap(&plan, &combo).unwrap();
        let mut superposed = GridField::zeros(n);
        superposed.axpy(alpha, &solve_ap(&plan, &q1).unwrap());
        superposed.axpy(beta, &solve_ap(&plan, &q2).unwrap());
        let scale = direct.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in direct.values().iter().zip(superposed.values()) {
            assert!((a - b).abs() <= 1e-11 * (1.0 + scale));
        }
    }

    #[test]
    fn inverse_preserves_nonnegativity() {
        let n = 8;
        let plan = make_plan(n, 0.125, 8e-3).unwrap();
        let mut q = pseudo_random_field(n, 5);
        for v in q.values_mut() {
            *v = v.abs();
        }
        let v = solve_ap(&plan, &q).unwrap();
        let q_inf = q.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let min = v.values().iter().fold(f64::INFINITY, |m, &x| m.min(x));
        assert!(min >= -1e-12 * q_inf, "maximum principle proxy violated: {min}");
    }

    #[test]
    fn dense_oracle_rejects_large_grids() {
        let q = GridField::zeros(18);
        assert!(dense_oracle_solve(18, 0.1, 0.1, &q).is_err());
    }

    #[test]
    fn dense_oracle_point_source_symmetry() {
        let n = 6;
        let mut q = GridField::zeros(n);
        let p = n + 2;
        // no single center cell for even n; use a symmetric 8-cell source
        for j in [3usize, 4] {
            for k in [3usize, 4] {
                for l in [3usize, 4] {
                    q.set((j * p + k) * p + l, 1.0);
                }
            }
        }
        let v = dense_oracle_solve(n, 0.2, 1e-2, &q).unwrap();
        let mirror = |i: usize| n + 1 - i;
        for j in 1..=n {
            for k in 1..=n {
                for l in 1..=n {
                    let a = v.get((j * p + k) * p + l);
                    let b = v.get((mirror(j) * p + k) * p + l);
                    let c = v.get((k * p + j) * p + l);
                    assert!((a - b).abs() < 1e-13 && (a - c).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn plan_cache_lru_eviction() {
        let cache = PlanCache::new(4);
        for i in 1..=5u32 {
            cache.get(8, 0.125, 1e-3 * i as f64).unwrap();
        }
        assert_eq!(cache.len(), 4);
        // oldest (i=1) evicted, i=2 still cached and must be the same Arc
        let before = cache.get(8, 0.125, 2e-3).unwrap();
        let again = cache.get(8, 0.125, 2e-3).unwrap();
        assert!(Arc::ptr_eq(&before, &again));
    }
}
