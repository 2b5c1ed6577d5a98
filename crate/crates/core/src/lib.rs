//! Difference-potentials solver for the 3D Patlak–Keller–Segel system on a
//! spherical domain embedded in a Cartesian auxiliary cube.

pub mod dpm;
pub mod error;
pub mod field;
pub mod fv;
pub mod geometry;
pub mod legendre;
pub mod mesh;
pub mod poisson;

pub use error::{DpmError, Result};
pub use field::GridField;
pub use geometry::{Region, Sphere};
pub use mesh::{build_grid, classify_points, GridSpec, PointClassification};
