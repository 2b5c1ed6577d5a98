//! The difference-potentials pipeline: particular solutions, difference
//! potentials, traces, the spectral boundary equations on `gamma_in` and the
//! generalized Green's formula.
//!
//! Everything is written for a list of sub-domains so the single-domain
//! solver and the two-domain decomposition share one code path. Each
//! sub-domain carries one or more boundary *pieces* (the discrete grid
//! boundary near the sphere surface, the discrete grid interface near the
//! artificial interface);each piece draws its Cauchy data from one *unknown
//! block* of spectral coefficients, and interface blocks are shared between
//! the sub-domains, which is what imposes the interface conditions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{DpmError, Result};
use crate::field::GridField;
use crate::legendre::zonal_basis;
use crate::mesh::{flags, stencil_offsets, BoundaryGeometry, GridSpec, PointClassification};
use crate::poisson::{solve_ap, SolverPlan};

/// Values of a density on a list of boundary points, canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensity(pub Vec<f64>);

impl BoundaryDensity {
    pub fn zeros(len: usize) -> Self {
        BoundaryDensity(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Taylor terms of the extension operator along the normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    /// boundary value, factor 1
    Value,
    /// first normal derivative, factor `d` (interfaces only)
    FirstNormal,
    /// second normal derivative, factor `d^2/2`
    SecondNormal,
}

impl TermKind {
    #[inline]
    pub fn factor(self, d: f64) -> f64 {
        match self {
            TermKind::Value => 1.0,
            TermKind::FirstNormal => d,
            TermKind::SecondNormal => 0.5 * d * d,
        }
    }
}

/// Extension terms used at the outer boundary for a given extension order:
/// the zero-Neumann condition removes the first-derivative term.
pub fn boundary_terms(beta: usize) -> Vec<TermKind> {
    match beta {
        0 => vec![TermKind::Value],
        _ => vec![TermKind::Value, TermKind::SecondNormal],
    }
}

/// Full three-term extension used along artificial interfaces.
pub fn interface_terms() -> Vec<TermKind> {
    vec![TermKind::Value, TermKind::FirstNormal, TermKind::SecondNormal]
}

/// One block of unknown spectral coefficients (`terms.len() * (degree_max+1)`
/// columns, term-major).
#[derive(Debug, Clone)]
pub struct UnknownBlock {
    pub terms: Vec<TermKind>,
    pub degree_max: usize,
}

impl UnknownBlock {
    pub fn ncols(&self) -> usize {
        self.terms.len() * (self.degree_max + 1)
    }
}

/// Spectral coefficients of one block, split by term for inspection.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    pub terms: Vec<(TermKind, Vec<f64>)>,
}

impl SpectralCoefficients {
    pub fn from_slice(block: &UnknownBlock, coeffs: &[f64]) -> Self {
        let m1 = block.degree_max + 1;
        let terms = block
            .terms
            .iter()
            .enumerate()
            .map(|(t, &kind)| (kind, coeffs[t * m1..(t + 1) * m1].to_vec()))
            .collect();
        SpectralCoefficients { terms }
    }
}

/// A piece of a sub-domain's discrete boundary tied to one unknown block.
#[derive(Debug, Clone)]
pub struct BoundaryPiece {
    pub geom: BoundaryGeometry,
    pub block: usize,
    /// positions within `geom.points` lying in `M+` (the rows of the BEP)
    pub rows_in: Vec<usize>,
    cos_theta: Vec<f64>,
}

impl BoundaryPiece {
    pub fn new(geom: BoundaryGeometry, block: usize, cls: &PointClassification) -> Self {
        let rows_in = geom
            .points
            .iter()
            .enumerate()
            .filter(|(_, &p)| cls.is(p, flags::M_PLUS))
            .map(|(i, _)| i)
            .collect();
        let cos_theta = geom.theta.iter().map(|t| t.cos()).collect();
        BoundaryPiece {
            geom,
            block,
            rows_in,
            cos_theta,
        }
    }

    /// Extension entry at piece point `i` for `(term, degree)`.
    #[inline]
    pub fn entry(&self, i: usize, term: TermKind, nu: usize) -> f64 {
        term.factor(self.geom.signed_distance[i]) * crate::legendre::legendre(nu, self.cos_theta[i])
    }
}

/// The extension column of one basis function over a boundary geometry.
pub fn extension_column(geom: &BoundaryGeometry, nu: usize, term: TermKind) -> BoundaryDensity {
    BoundaryDensity(
        geom.theta
            .iter()
            .zip(&geom.signed_distance)
            .map(|(&theta, &d)| term.factor(d) * zonal_basis(nu, theta))
            .collect(),
    )
}

/// One sub-domain with its grid, classification and boundary pieces, plus
/// the union structure used to form effective densities at points shared by
/// two pieces.
#[derive(Debug, Clone)]
pub struct SubdomainCtx {
    pub grid: GridSpec,
    pub cls: PointClassification,
    pub pieces: Vec<BoundaryPiece>,
    /// sorted unique flat indices of every piece point
    pub union_points: Vec<usize>,
    /// reciprocal multiplicity per union point
    union_weight: Vec<f64>,
    /// per piece: union position of each piece point
    piece_to_union: Vec<Vec<usize>>,
}

impl SubdomainCtx {
    pub fn new(grid: GridSpec, cls: PointClassification, pieces: Vec<BoundaryPiece>) -> Result<Self> {
        let mut union_points: Vec<usize> = pieces
            .iter()
            .flat_map(|p| p.geom.points.iter().copied())
            .collect();
        union_points.sort_unstable();
        union_points.dedup();

        // every piece point must be a discrete-boundary point of this grid,
        // and together the pieces must cover the whole discrete boundary
        for pc in &pieces {
            for &pt in &pc.geom.points {
                if !cls.is(pt, flags::GAMMA) {
                    return Err(DpmError::InvalidGrid(
                        "boundary piece contains a point outside the discrete grid boundary".into(),
                    ));
                }
            }
        }
        for &pt in &cls.gamma {
            if union_points.binary_search(&pt).is_err() {
                return Err(DpmError::InvalidGrid(
                    "boundary pieces do not cover the discrete grid boundary".into(),
                ));
            }
        }

        let mut mult = vec![0usize; union_points.len()];
        let mut piece_to_union = Vec::with_capacity(pieces.len());
        for pc in &pieces {
            let map: Vec<usize> = pc
                .geom
                .points
                .iter()
                .map(|pt| union_points.binary_search(pt).unwrap())
                .collect();
            for &u in &map {
                mult[u] += 1;
            }
            piece_to_union.push(map);
        }
        let union_weight = mult.iter().map(|&m| 1.0 / m as f64).collect();

        Ok(SubdomainCtx {
            grid,
            cls,
            pieces,
            union_points,
            union_weight,
            piece_to_union,
        })
    }

    /// Row count of this sub-domain's BEP block.
    pub fn nrows(&self) -> usize {
        self.pieces.iter().map(|p| p.rows_in.len()).sum()
    }

    /// Averages per-piece candidate values into the single-valued effective
    /// density on the union of the piece points. Points carried by only one
    /// piece pass through unchanged.
    pub fn effective_density(&self, piece_values: &[BoundaryDensity]) -> BoundaryDensity {
        assert_eq!(piece_values.len(), self.pieces.len());
        let mut out = vec![0.0; self.union_points.len()];
        for (pi, vals) in piece_values.iter().enumerate() {
            for (k, &u) in self.piece_to_union[pi].iter().enumerate() {
                out[u] += vals.0[k];
            }
        }
        for (v, w) in out.iter_mut().zip(&self.union_weight) {
            *v *= w;
        }
        BoundaryDensity(out)
    }
}

/// The particular solution: the auxiliary problem driven by the scheme
/// right-hand side on `M+` and zero on `M-`, restricted to `N+`.
pub fn particular_solution(
    plan: &SolverPlan,
    f: &GridField,
    cls: &PointClassification,
) -> Result<GridField> {
    let mut q = GridField::zeros(f.n());
    for &idx in &cls.m_plus {
        q.set(idx, f.get(idx));
    }
    solve_ap(plan, &q)
}

/// The difference potential of a density given on `points` (extended by zero
/// elsewhere): the auxiliary problem with right-hand side `L[v]` on `M-` and
/// zero on `M+`, restricted to `N+`.
pub fn difference_potential(
    plan: &SolverPlan,
    density: &BoundaryDensity,
    points: &[usize],
    cls: &PointClassification,
) -> Result<GridField> {
    assert_eq!(density.len(), points.len());
    let n = cls.n;
    let mut v = GridField::zeros(n);
    for (&idx, &val) in points.iter().zip(&density.0) {
        v.set(idx, val);
    }
    let h = plan.h();
    let r = plan.dt() / (h * h);
    let offs = stencil_offsets(n + 2);
    let mut q = GridField::zeros(n);
    {
        let vv = v.values();
        let qv = q.values_mut();
        for &p in &cls.m_minus {
            let mut nb_sum = 0.0;
            for off in offs {
                nb_sum += vv[(p as isize + off) as usize];
            }
            let val = (1.0 + 6.0 * r) * vv[p] - r * nb_sum;
            if val != 0.0 {
                qv[p] = val;
            }
        }
    }
    solve_ap(plan, &q)
}

/// Restriction of a grid function to a point list, canonical order.
pub fn trace(field: &GridField, points: &[usize]) -> Vec<f64> {
    points.iter().map(|&p| field.get(p)).collect()
}

/// `P_gamma v = Tr_gamma P_{N+ gamma} v`, the boundary projection operator.
pub fn apply_p_gamma(
    plan: &SolverPlan,
    cls: &PointClassification,
    v: &BoundaryDensity,
) -> Result<BoundaryDensity> {
    let pot = difference_potential(plan, v, &cls.gamma, cls)?;
    Ok(BoundaryDensity(trace(&pot, &cls.gamma)))
}

/// Discrete generalized Green's formula: interior reconstruction from a
/// boundary density plus the particular solution.
pub fn greens_formula(
    plan: &SolverPlan,
    density: &BoundaryDensity,
    points: &[usize],
    f: &GridField,
    cls: &PointClassification,
) -> Result<GridField> {
    let mut u = difference_potential(plan, density, points, cls)?;
    let ps = particular_solution(plan, f, cls)?;
    u.axpy(1.0, &ps);
    Ok(u)
}

/// The coupled spectral unknown layout over all sub-domains.
#[derive(Debug, Clone)]
pub struct CoupledSetup {
    pub blocks: Vec<UnknownBlock>,
    pub subdomains: Vec<SubdomainCtx>,
    col_offsets: Vec<usize>,
    pub ncols: usize,
}

impl CoupledSetup {
    pub fn new(blocks: Vec<UnknownBlock>, subdomains: Vec<SubdomainCtx>) -> Result<Self> {
        let mut col_offsets = Vec::with_capacity(blocks.len());
        let mut ncols = 0usize;
        for b in &blocks {
            col_offsets.push(ncols);
            ncols += b.ncols();
        }
        let nrows: usize = subdomains.iter().map(|s| s.nrows()).sum();
        if ncols >= nrows {
            return Err(DpmError::UnderDetermined { rows: nrows, cols: ncols });
        }
        for s in &subdomains {
            for p in &s.pieces {
                if p.block >= blocks.len() {
                    return Err(DpmError::InvalidConfig("piece references unknown block".into()));
                }
            }
        }
        Ok(CoupledSetup {
            blocks,
            subdomains,
            col_offsets,
            ncols,
        })
    }

    pub fn nrows(&self) -> usize {
        self.subdomains.iter().map(|s| s.nrows()).sum()
    }

    #[inline]
    fn column_of(&self, c: usize) -> (usize, TermKind, usize) {
        let block = self
            .col_offsets
            .iter()
            .rposition(|&off| off <= c)
            .expect("column offset");
        let local = c - self.col_offsets[block];
        let m1 = self.blocks[block].degree_max + 1;
        let term = self.blocks[block].terms[local / m1];
        (block, term, local % m1)
    }

    pub fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        let start = self.col_offsets[block];
        start..start + self.blocks[block].ncols()
    }

    /// Piece densities induced by one global coefficient vector.
    pub fn reconstruct_densities(&self, coeffs: &DVector<f64>) -> Vec<Vec<BoundaryDensity>> {
        self.subdomains
            .iter()
            .map(|s| {
                s.pieces
                    .iter()
                    .map(|pc| {
                        let block = &self.blocks[pc.block];
                        let base = self.col_offsets[pc.block];
                        let m1 = block.degree_max + 1;
                        let mut vals = vec![0.0; pc.geom.len()];
                        for (t, &term) in block.terms.iter().enumerate() {
                            for nu in 0..=block.degree_max {
                                let c = coeffs[base + t * m1 + nu];
                                if c == 0.0 {
                                    continue;
                                }
                                for i in 0..vals.len() {
                                    vals[i] += c * pc.entry(i, term, nu);
                                }
                            }
                        }
                        BoundaryDensity(vals)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Clamps negative density values to zero in place and returns the largest
/// clamped magnitude.
pub fn clamp_densities(densities: &mut [Vec<BoundaryDensity>]) -> f64 {
    let mut worst = 0.0f64;
    for sub in densities.iter_mut() {
        for d in sub.iter_mut() {
            for v in &mut d.0 {
                if *v < 0.0 {
                    worst = worst.max(-*v);
                    *v = 0.0;
                }
            }
        }
    }
    worst
}

/// Assembled and factorized boundary-equation system for one time step size.
pub struct BepSystem {
    pub dt: f64,
    pub nrows: usize,
    pub ncols: usize,
    /// the assembled matrix `Tr_in (I - P) E`, kept for residual reporting
    pub matrix: DMatrix<f64>,
    qr: nalgebra::linalg::ColPivQR<f64, Dyn, Dyn>,
    r: DMatrix<f64>,
    pub rank: usize,
    pub cond_estimate: f64,
    sub_row_offsets: Vec<usize>,
}

impl std::fmt::Debug for BepSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BepSystem")
            .field("dt", &self.dt)
            .field("nrows", &self.nrows)
            .field("ncols", &self.ncols)
            .field("rank", &self.rank)
            .field("cond_estimate", &self.cond_estimate)
            .finish()
    }
}

/// Assembles the reduced boundary equations with projections for all
/// sub-domains at the plans' common time step and factorizes them for least
/// squares. Column `c` is built from one difference-potential solve per
/// sub-domain whose boundary carries block unknowns of that column.
pub fn assemble_bep(setup: &CoupledSetup, plans: &[Arc<SolverPlan>]) -> Result<BepSystem> {
    if plans.len() != setup.subdomains.len() {
        return Err(DpmError::InvalidConfig("one plan per sub-domain required".into()));
    }
    let dt = plans[0].dt();
    for p in plans.iter() {
        if p.dt() != dt {
            return Err(DpmError::DtMismatch(dt, p.dt()));
        }
    }
    let nrows = setup.nrows();
    let ncols = setup.ncols;
    let mut sub_row_offsets = Vec::with_capacity(setup.subdomains.len());
    let mut acc = 0usize;
    for s in &setup.subdomains {
        sub_row_offsets.push(acc);
        acc += s.nrows();
    }

    let mut matrix = DMatrix::<f64>::zeros(nrows, ncols);
    matrix
        .as_mut_slice()
        .par_chunks_mut(nrows)
        .enumerate()
        .try_for_each(|(c, col)| -> Result<()> {
            let (block, term, nu) = setup.column_of(c);
            for (si, sub) in setup.subdomains.iter().enumerate() {
                if !sub.pieces.iter().any(|p| p.block == block) {
                    continue;
                }
                // effective density induced by this unit coefficient
                let mut w = vec![0.0; sub.union_points.len()];
                for (pi, pc) in sub.pieces.iter().enumerate() {
                    if pc.block != block {
                        continue;
                    }
                    for (k, &u) in sub.piece_to_union[pi].iter().enumerate() {
                        w[u] += pc.entry(k, term, nu);
                    }
                }
                for (v, wt) in w.iter_mut().zip(&sub.union_weight) {
                    *v *= wt;
                }
                let pot = difference_potential(
                    &plans[si],
                    &BoundaryDensity(w),
                    &sub.union_points,
                    &sub.cls,
                )?;
                let mut row = sub_row_offsets[si];
                for pc in &sub.pieces {
                    for &i in &pc.rows_in {
                        let pt = pc.geom.points[i];
                        let own = if pc.block == block {
                            pc.entry(i, term, nu)
                        } else {
                            0.0
                        };
                        col[row] = own - pot.get(pt);
                        row += 1;
                    }
                }
            }
            Ok(())
        })?;

    let qr = matrix.clone().col_piv_qr();
    let r = qr.r();
    let diag_max = r[(0, 0)].abs();
    let tol = diag_max * f64::EPSILON * (nrows.max(ncols) as f64);
    let mut rank = 0usize;
    let mut diag_min = f64::INFINITY;
    for i in 0..ncols.min(nrows) {
        let d = r[(i, i)].abs();
        if d > tol {
            rank += 1;
            diag_min = diag_min.min(d);
        }
    }
    let cond_estimate = if rank > 0 { diag_max / diag_min } else { f64::INFINITY };

    Ok(BepSystem {
        dt,
        nrows,
        ncols,
        matrix,
        qr,
        r,
        rank,
        cond_estimate,
        sub_row_offsets,
    })
}

/// Stacks per-sub-domain particular-solution traces into the BEP right-hand
/// side, in the same row order as the assembled matrix.
pub fn bep_rhs(setup: &CoupledSetup, particular: &[&GridField]) -> DVector<f64> {
    assert_eq!(particular.len(), setup.subdomains.len());
    let mut rhs = DVector::<f64>::zeros(setup.nrows());
    let mut row = 0usize;
    for (sub, ps) in setup.subdomains.iter().zip(particular) {
        for pc in &sub.pieces {
            for &i in &pc.rows_in {
                rhs[row] = ps.get(pc.geom.points[i]);
                row += 1;
            }
        }
    }
    rhs
}

/// Least-squares solution of the factorized system. Rank-deficient systems
/// fall back to the rank-truncated pivoted solution (zero coefficients on
/// the discarded columns). Returns the coefficients and the relative
/// infinity-norm residual of the full system.
pub fn solve_bep(sys: &BepSystem, rhs: &DVector<f64>) -> (DVector<f64>, f64) {
    assert_eq!(rhs.len(), sys.nrows);
    let mut y = rhs.clone();
    sys.qr.q_tr_mul(&mut y);
    let n = sys.ncols;
    let mut x = DVector::<f64>::zeros(n);
    for i in (0..sys.rank).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= sys.r[(i, j)] * x[j];
        }
        x[i] = s / sys.r[(i, i)];
    }
    sys.qr.p().inv_permute_rows(&mut x);

    let mut resid = &sys.matrix * &x - rhs;
    let denom = rhs.amax();
    let rel = if denom > 0.0 {
        resid.amax() / denom
    } else {
        resid.amax()
    };
    // release temporary early under large systems
    resid.fill(0.0);
    (x, rel)
}
