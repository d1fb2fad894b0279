//! Discrete surface operators with piecewise-constant densities.
//!
//! Two kernels are provided: the Newton kernel `1/|s - t|` and its normal
//! derivative at the target point, `ψ(t, s) = ∂/∂N_t (1/|t - s|)`. Matrix
//! entry `(i, j)` is the integral over source triangle `j` of the kernel with
//! the target either at the centroid of triangle `i` (collocation) or averaged
//! over triangle `i` (Galerkin). No `1/4π` factor is included.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::quadrature::{triangle_potential, triangle_potential_gradient, TriangleRule};
use super::SurfaceMesh;
use crate::linalg::DenseMatrix;

/// Integral kernel on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// `1 / r_st`
    Newton,
    /// `∂(1/r_st)/∂N_t`, derivative at the target point
    NormalDerivative,
}

/// Where the target (outer) variable is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterMode {
    /// Target at the triangle centroid.
    Collocation,
    /// Target averaged over the triangle with the pair's quadrature rule.
    Galerkin,
}

/// Quadrature controls for operator assembly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OperatorOptions {
    /// Rule on both triangles of a well-separated pair.
    pub regular_rule: TriangleRule,
    /// Outer rule for near pairs (inner integral is closed-form).
    pub near_rule: TriangleRule,
    /// Pairs closer than `near_factor` × larger diameter count as near.
    pub near_factor: f64,
    pub outer: OuterMode,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            regular_rule: TriangleRule::Centroid,
            near_rule: TriangleRule::SevenPoint,
            near_factor: 2.0,
            outer: OuterMode::Galerkin,
        }
    }
}

impl OperatorOptions {
    pub fn collocation() -> Self {
        Self {
            outer: OuterMode::Collocation,
            ..Self::default()
        }
    }
}

struct Panels {
    corners: Vec<[Vector3<f64>; 3]>,
    diameters: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl Panels {
    fn new(mesh: &SurfaceMesh) -> Self {
        let corners: Vec<_> = (0..mesh.num_triangles()).map(|t| mesh.corners(t)).collect();
        let diameters = corners.iter().map(super::mesh::triangle_diameter).collect();
        Self {
            corners,
            diameters,
            neighbors: mesh.vertex_neighbors(),
        }
    }

    fn is_near(&self, mesh: &SurfaceMesh, i: usize, j: usize, factor: f64) -> bool {
        if self.neighbors[i].binary_search(&j).is_ok() {
            return true;
        }
        let d = (mesh.centroids()[i] - mesh.centroids()[j]).norm();
        d < factor * self.diameters[i].max(self.diameters[j])
    }
}

/// Assembles the `n × n` matrix of `kernel` on `mesh`.
pub fn assemble(mesh: &SurfaceMesh, kernel: Kernel, opts: &OperatorOptions) -> DenseMatrix<f64> {
    let n = mesh.num_triangles();
    let panels = Panels::new(mesh);
    let areas = mesh.areas();
    let normals = mesh.normals();
    let centroids = mesh.centroids();

    let outer_nodes = |i: usize, rule: TriangleRule| -> Vec<(Vector3<f64>, f64)> {
        match opts.outer {
            OuterMode::Collocation => vec![(centroids[i], 1.0)],
            OuterMode::Galerkin => rule
                .nodes(&panels.corners[i], 1.0)
                .collect(),
        }
    };
    let regular_inner: Vec<Vec<(Vector3<f64>, f64)>> = (0..n)
        .map(|j| opts.regular_rule.nodes(&panels.corners[j], areas[j]).collect())
        .collect();

    DenseMatrix::from_rows(n, n, |i, row| {
        let regular_outer = outer_nodes(i, opts.regular_rule);
        let near_outer = outer_nodes(i, opts.near_rule);
        let ni = normals[i];
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = if panels.is_near(mesh, i, j, opts.near_factor) {
                match kernel {
                    Kernel::Newton => near_outer
                        .iter()
                        .map(|(x, w)| w * triangle_potential(x, &panels.corners[j]))
                        .sum(),
                    // flat panel: ψ vanishes on its own plane
                    Kernel::NormalDerivative if i == j => 0.0,
                    Kernel::NormalDerivative => near_outer
                        .iter()
                        .map(|(x, w)| w * ni.dot(&triangle_potential_gradient(x, &panels.corners[j])))
                        .sum(),
                }
            } else {
                let mut acc = 0.0;
                for (x, wx) in &regular_outer {
                    for (y, wy) in &regular_inner[j] {
                        let d = x - y;
                        let r = d.norm();
                        acc += wx
                            * wy
                            * match kernel {
                                Kernel::Newton => 1.0 / r,
                                Kernel::NormalDerivative => -ni.dot(&d) / (r * r * r),
                            };
                    }
                }
                acc
            };
        }
    })
}

/// `∫_S ∫_S N_p(s) N_q(t) K(s, t) ds dt` with default quadrature.
///
/// For [`Kernel::NormalDerivative`] the derivative is taken at `t`.
pub fn double_surface_integral(mesh: &SurfaceMesh, kernel: Kernel, p: usize, q: usize) -> f64 {
    let m = assemble(mesh, kernel, &OperatorOptions::default());
    double_surface_integral_with(mesh, &m, kernel, p, q)
}

/// Same as [`double_surface_integral`] reusing an assembled operator matrix.
pub fn double_surface_integral_with(
    mesh: &SurfaceMesh,
    matrix: &DenseMatrix<f64>,
    kernel: Kernel,
    p: usize,
    q: usize,
) -> f64 {
    let normals = mesh.normals();
    let areas = mesh.areas();
    // rows are targets: t for ψ, either for the symmetric Newton kernel
    let (outer_axis, inner_axis) = match kernel {
        Kernel::Newton => (p, q),
        Kernel::NormalDerivative => (q, p),
    };
    let inner: Vec<f64> = normals.iter().map(|n| n[inner_axis]).collect();
    let applied = matrix.matvec(&inner);
    let terms: Vec<f64> = (0..mesh.num_triangles())
        .map(|i| areas[i] * normals[i][outer_axis] * applied[i])
        .collect();
    super::mesh::pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_ellipsoid, generate_sphere};
    use std::f64::consts::PI;

    #[test]
    fn sphere_newton_integral() {
        // single-layer potential of cos θ on the unit sphere is (4π/3) cos θ
        let mesh = generate_sphere(1.0, 3).unwrap();
        let value = double_surface_integral(&mesh, Kernel::Newton, 0, 0);
        let expected = (4.0 * PI / 3.0) * (4.0 * PI / 3.0);
        assert!((value / expected - 1.0).abs() < 0.02, "{value} vs {expected}");
    }

    #[test]
    fn newton_kernel_is_symmetric_in_axes() {
        let mesh = generate_ellipsoid([1.0, 0.8, 0.6], 2).unwrap();
        let m = assemble(&mesh, Kernel::Newton, &OperatorOptions::default());
        let xy = double_surface_integral_with(&mesh, &m, Kernel::Newton, 0, 1);
        let yx = double_surface_integral_with(&mesh, &m, Kernel::Newton, 1, 0);
        let xx = double_surface_integral_with(&mesh, &m, Kernel::Newton, 0, 0);
        assert!((xy - yx).abs() < 1e-3 * xx.abs());
    }

    #[test]
    fn off_diagonal_vanishes_for_symmetric_shape() {
        let mesh = generate_ellipsoid([2.0, 1.0, 1.0], 2).unwrap();
        let m = assemble(&mesh, Kernel::Newton, &OperatorOptions::default());
        let xx = double_surface_integral_with(&mesh, &m, Kernel::Newton, 0, 0);
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let v = double_surface_integral_with(&mesh, &m, Kernel::Newton, p, q);
            assert!(v.abs() < 1e-8 * xx, "({p},{q}) = {v}");
        }
    }

    #[test]
    fn scaling_multiplies_by_cube() {
        let mesh = generate_sphere(1.0, 2).unwrap();
        let big = mesh.scaled(1.7).unwrap();
        let a = double_surface_integral(&mesh, Kernel::Newton, 2, 2);
        let b = double_surface_integral(&big, Kernel::Newton, 2, 2);
        assert!((b / a - 1.7f64.powi(3)).abs() < 1e-10);
    }

    #[test]
    fn refinement_differences_shrink() {
        let values: Vec<f64> = (1..=4)
            .map(|r| double_surface_integral(&generate_sphere(1.0, r).unwrap(), Kernel::Newton, 0, 0))
            .collect();
        let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in diffs.windows(2) {
            assert!(w[1] < w[0], "{diffs:?}");
        }
    }

    #[test]
    fn normal_derivative_on_sphere_has_expected_eigenvalue() {
        // ψ acting on cos θ over the unit sphere gives -(2π/3) cos θ
        let mesh = generate_sphere(1.0, 3).unwrap();
        let value = double_surface_integral(&mesh, Kernel::NormalDerivative, 0, 0);
        let expected = -(2.0 * PI / 3.0) * (4.0 * PI / 3.0);
        assert!((value / expected - 1.0).abs() < 0.1, "{value} vs {expected}");
    }
}
