//! Surface meshes, canonical shapes and boundary quadrature.

mod mesh;
mod off;
pub mod operators;
pub mod quadrature;
mod shapes;

pub use mesh::SurfaceMesh;
pub(crate) use mesh::pairwise_sum;
pub use off::{load_mesh, parse_off, write_off};
pub use operators::{assemble, double_surface_integral, Kernel, OperatorOptions, OuterMode};
pub use quadrature::{QuadratureRule, SingularStrategy, TriangleRule};
pub use shapes::{generate_cube, generate_ellipsoid, generate_sphere};
