//! Spheres, regions and orthogonal projections onto spherical surfaces.

use crate::error::{DpmError, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Point, radius: f64) -> Self {
        Sphere { center, radius }
    }

    /// Strict interior test. Points exactly on the surface count as outside.
    pub fn contains(&self, p: Point) -> bool {
        dist(p, self.center) < self.radius
    }
}

/// Solid region a sub-domain occupies. Interiors are open: surface points
/// belong to no region.
#[derive(Debug, Clone, Copy)]
pub enum Region {
    Ball(Sphere),
    /// Inside `keep`, strictly outside `remove` (spherical shell or ball with
    /// a spherical bite taken out).
    Difference { keep: Sphere, remove: Sphere },
    /// Inside both spheres (spherical lens/cap region).
    Intersection { a: Sphere, b: Sphere },
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Ball(s) => s.contains(p),
            Region::Difference { keep, remove } => {
                keep.contains(p) && dist(p, remove.center) > remove.radius
            }
            Region::Intersection { a, b } => a.contains(p) && b.contains(p),
        }
    }
}

pub fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Orthogonal projection of `point` onto the sphere surface.
///
/// Returns `(projection, d, theta, phi, normal)` where `d` is the signed
/// distance along the outward normal (positive outside), `theta` the polar
/// angle of the projection about the sphere center measured from +z and
/// `phi` its azimuthal angle.
pub fn boundary_projection(point: Point, sphere: &Sphere) -> Result<(Point, f64, f64, f64, Point)> {
    let c = sphere.center;
    let r = sphere.radius;
    let v = [point[0] - c[0], point[1] - c[1], point[2] - c[2]];
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if len == 0.0 {
        return Err(DpmError::DegenerateProjection);
    }
    let n = [v[0] / len, v[1] / len, v[2] / len];
    let proj = [c[0] + r * n[0], c[1] + r * n[1], c[2] + r * n[2]];
    let d = len - r;
    let theta = (n[2].clamp(-1.0, 1.0)).acos();
    let phi = n[1].atan2(n[0]);
    Ok((proj, d, theta, phi, n))
}
