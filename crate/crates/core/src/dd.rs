//! Two-domain decompositions of the sphere with a shared spectral interface.
//!
//! Case 1 cuts out a concentric inner ball (interface away from the sphere
//! surface, suited to blow-up at the center). Case 2 cuts a cap around the
//! north pole with a sphere centered at the pole, so the interface meets the
//! boundary in a wedge circle (suited to blow-up at the boundary). Both
//! sub-domains read their interface Cauchy data from one shared unknown
//! block; signed distances are measured along the single normal pointing out
//! of the inner sub-domain.

use crate::dpm::{boundary_terms, interface_terms, BoundaryPiece, CoupledSetup, SubdomainCtx, UnknownBlock};
use crate::error::{DpmError, Result};
use crate::field::GridField;
use crate::geometry::{dist, Point, Region, Sphere};
use crate::legendre::gauss_legendre;
use crate::mesh::{build_grid, classify_points, BoundaryGeometry, GridSpec};

pub const BLOCK_GAMMA: usize = 0;
pub const BLOCK_INTERFACE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdCase {
    /// concentric interface, `Z` disjoint from the boundary
    Case1,
    /// polar-cap interface meeting the boundary in a wedge circle
    Case2,
}

/// Geometry and spectral layout of a two-domain decomposition.
#[derive(Debug, Clone)]
pub struct SubdomainSetup {
    pub case: DdCase,
    pub boundary: Sphere,
    pub interface: Sphere,
    pub coupled: CoupledSetup,
    /// polar angle of the wedge circle on the boundary sphere (Case 2)
    pub theta_star: Option<f64>,
    /// polar angle of the wedge circle about the interface center (Case 2)
    pub theta_star_interface: Option<f64>,
}

/// Harmonic configuration of the two unknown blocks.
#[derive(Debug, Clone, Copy)]
pub struct DdSpectral {
    pub m_gamma: usize,
    pub beta_gamma: usize,
    pub m_interface: usize,
}

fn blocks(spectral: &DdSpectral) -> Vec<UnknownBlock> {
    vec![
        UnknownBlock {
            terms: boundary_terms(spectral.beta_gamma),
            degree_max: spectral.m_gamma,
        },
        UnknownBlock {
            terms: interface_terms(),
            degree_max: spectral.m_interface,
        },
    ]
}

fn surface_distance(p: Point, s: &Sphere) -> f64 {
    (dist(p, s.center) - s.radius).abs()
}

/// Concentric decomposition: inner ball of radius `r1` on its own fine grid,
/// outer shell on the coarse grid built from the full sphere radius.
pub fn setup_case1(
    r: f64,
    r1: f64,
    n1: usize,
    n2: usize,
    spectral: &DdSpectral,
) -> Result<SubdomainSetup> {
    if !(r1 > 0.0 && r1 < r) {
        return Err(DpmError::InvalidGrid(format!(
            "need 0 < r1 < r, got r1={r1}, r={r}"
        )));
    }
    let boundary = Sphere::new([0.0; 3], r);
    let interface = Sphere::new([0.0; 3], r1);

    let grid1 = build_grid(r1, n1, [0.0; 3])?;
    let cls1 = classify_points(&grid1, &Region::Ball(interface));
    let zeta1 = BoundaryGeometry::build(&grid1, &cls1.gamma, &interface)?;
    let piece_z1 = BoundaryPiece::new(zeta1, BLOCK_INTERFACE, &cls1);
    let sub1 = SubdomainCtx::new(grid1, cls1, vec![piece_z1])?;

    let grid2 = build_grid(r, n2, [0.0; 3])?;
    let cls2 = classify_points(
        &grid2,
        &Region::Difference {
            keep: boundary,
            remove: interface,
        },
    );
    // split the discrete boundary of the shell by the nearest surface
    let mut gamma_pts = Vec::new();
    let mut zeta_pts = Vec::new();
    for &idx in &cls2.gamma {
        let p = grid2.center_of_flat(idx);
        if surface_distance(p, &boundary) <= surface_distance(p, &interface) {
            gamma_pts.push(idx);
        } else {
            zeta_pts.push(idx);
        }
    }
    if gamma_pts.is_empty() || zeta_pts.is_empty() {
        return Err(DpmError::InvalidGrid(
            "shell sub-domain must carry both boundary and interface points".into(),
        ));
    }
    let gamma2 = BoundaryGeometry::build(&grid2, &gamma_pts, &boundary)?;
    let zeta2 = BoundaryGeometry::build(&grid2, &zeta_pts, &interface)?;
    let piece_g2 = BoundaryPiece::new(gamma2, BLOCK_GAMMA, &cls2);
    let piece_z2 = BoundaryPiece::new(zeta2, BLOCK_INTERFACE, &cls2);
    let sub2 = SubdomainCtx::new(grid2, cls2, vec![piece_g2, piece_z2])?;

    Ok(SubdomainSetup {
        case: DdCase::Case1,
        boundary,
        interface,
        coupled: CoupledSetup::new(blocks(spectral), vec![sub1, sub2])?,
        theta_star: None,
        theta_star_interface: None,
    })
}

/// Wedge decomposition: the cap sub-domain is the intersection of the
/// sphere with a ball of radius `r1` centered at the north pole `(0,0,r)`.
/// `eps` widens the polar-angle bands that assign discrete boundary points
/// to the wedge-adjacent pieces; each piece additionally enforces at least
/// two cells of angular width so coarse grids stay covered.
pub fn setup_case2(
    r: f64,
    r1: f64,
    pole: Point,
    n1: usize,
    n2: usize,
    eps: Option<f64>,
    spectral: &DdSpectral,
) -> Result<SubdomainSetup> {
    if !(r1 > 0.0 && r1 < 2.0 * r) {
        return Err(DpmError::InvalidGrid(format!(
            "cap radius out of range: r1={r1}, r={r}"
        )));
    }
    if pole != [0.0, 0.0, r] {
        return Err(DpmError::InvalidConfig(
            "the cap construction requires the north pole (0,0,r)".into(),
        ));
    }
    let boundary = Sphere::new([0.0; 3], r);
    let interface = Sphere::new(pole, r1);
    // wedge circle Z ∩ Γ: polar angle on the boundary sphere and about the
    // interface center
    let cos_star = 1.0 - r1 * r1 / (2.0 * r * r);
    let theta_star = cos_star.acos();
    let theta_star_z = (-r1 / (2.0 * r)).acos();

    let region1 = Region::Intersection {
        a: boundary,
        b: interface,
    };
    let region2 = Region::Difference {
        keep: boundary,
        remove: interface,
    };

    let build_sub = |n: usize,
                     grid_r: f64,
                     grid_center: Point,
                     region: &Region,
                     gamma_window: (f64, f64)|
     -> Result<SubdomainCtx> {
        let grid = build_grid(grid_r, n, grid_center)?;
        let cls = classify_points(&grid, region);
        let h = grid.spacing;
        let prox = 2.0 * h * (1.0 + 1e-9);
        let eps_gamma = eps.unwrap_or(0.0).max(2.0 * h / r);
        let eps_z = eps.unwrap_or(0.0).max(2.0 * h / r1);
        let mut gamma_pts = Vec::new();
        let mut zeta_pts = Vec::new();
        for &idx in &cls.gamma {
            let p = grid.center_of_flat(idx);
            if surface_distance(p, &boundary) <= prox {
                let theta = crate::geometry::boundary_projection(p, &boundary)?.2;
                if theta >= gamma_window.0 - eps_gamma && theta <= gamma_window.1 + eps_gamma {
                    gamma_pts.push(idx);
                }
            }
            if surface_distance(p, &interface) <= prox {
                let theta_z = crate::geometry::boundary_projection(p, &interface)?.2;
                if theta_z >= theta_star_z - eps_z {
                    zeta_pts.push(idx);
                }
            }
        }
        if gamma_pts.is_empty() || zeta_pts.is_empty() {
            return Err(DpmError::InvalidGrid(
                "wedge sub-domain must carry both boundary and interface points".into(),
            ));
        }
        let gamma_geom = BoundaryGeometry::build(&grid, &gamma_pts, &boundary)?;
        let zeta_geom = BoundaryGeometry::build(&grid, &zeta_pts, &interface)?;
        let piece_g = BoundaryPiece::new(gamma_geom, BLOCK_GAMMA, &cls);
        let piece_z = BoundaryPiece::new(zeta_geom, BLOCK_INTERFACE, &cls);
        SubdomainCtx::new(grid, cls, vec![piece_g, piece_z])
    };

    let sub1 = build_sub(n1, r1, pole, &region1, (0.0, theta_star))?;
    let sub2 = build_sub(n2, r, [0.0; 3], &region2, (theta_star, std::f64::consts::PI))?;

    Ok(SubdomainSetup {
        case: DdCase::Case2,
        boundary,
        interface,
        coupled: CoupledSetup::new(blocks(spectral), vec![sub1, sub2])?,
        theta_star: Some(theta_star),
        theta_star_interface: Some(theta_star_z),
    })
}

/// Maximum mismatch of the two sub-domain solutions sampled at probe points
/// on the interface (Gauss–Legendre nodes in the polar angle, on the zero
/// meridian). Diagnostic only.
pub fn interface_continuity_gap(
    setup: &SubdomainSetup,
    field1: &GridField,
    field2: &GridField,
    probes: usize,
) -> f64 {
    let (lo, hi) = match setup.case {
        DdCase::Case1 => (0.0, std::f64::consts::PI),
        DdCase::Case2 => (setup.theta_star_interface.unwrap(), std::f64::consts::PI),
    };
    let (nodes, _) = gauss_legendre(probes);
    let zc = setup.interface.center;
    let r1 = setup.interface.radius;
    let sub1 = &setup.coupled.subdomains[0];
    let sub2 = &setup.coupled.subdomains[1];
    let mut worst = 0.0f64;
    for x in nodes {
        // map from [-1,1] to [cos hi, cos lo] and back to an angle
        let c = 0.5 * (x + 1.0) * (lo.cos() - hi.cos()) + hi.cos();
        let theta = c.clamp(-1.0, 1.0).acos();
        let q = [
            zc[0] + r1 * theta.sin(),
            zc[1],
            zc[2] + r1 * theta.cos(),
        ];
        let a = crate::diagnostics::sample_trilinear(field1, &sub1.grid, q);
        let b = crate::diagnostics::sample_trilinear(field2, &sub2.grid, q);
        worst = worst.max((a - b).abs());
    }
    worst
}
