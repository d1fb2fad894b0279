use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};

use super::SurfaceMesh;
use crate::error::{Error, Result};

/// Icosphere of the given radius centred at the origin.
///
/// Starts from the regular icosahedron and splits every triangle into four
/// `refinement` times, projecting new vertices onto the sphere. The result has
/// `20 * 4^refinement` triangles.
pub fn generate_sphere(radius: f64, refinement: u32) -> Result<SurfaceMesh> {
    if !(radius > 0.0) {
        return Err(Error::invalid("sphere radius must be positive"));
    }
    let (unit, triangles) = unit_icosphere(refinement);
    let vertices = unit.into_iter().map(|v| v * radius).collect();
    SurfaceMesh::new(vertices, triangles)
}

/// Ellipsoid with the given semi-axes along x, y, z, as the affine image of an icosphere.
pub fn generate_ellipsoid(semiaxes: [f64; 3], refinement: u32) -> Result<SurfaceMesh> {
    if semiaxes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::invalid("ellipsoid semi-axes must be positive"));
    }
    let (unit, triangles) = unit_icosphere(refinement);
    let scale = Matrix3::from_diagonal(&Vector3::from(semiaxes));
    let vertices = unit.into_iter().map(|v| scale * v).collect();
    SurfaceMesh::new(vertices, triangles)
}

/// Axis-aligned cube of the given edge length centred at the origin.
///
/// Each face is an `n x n` grid of squares, each split into two triangles.
pub fn generate_cube(edge: f64, n: usize) -> Result<SurfaceMesh> {
    if !(edge > 0.0) || n == 0 {
        return Err(Error::invalid("cube needs a positive edge and n >= 1"));
    }
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut triangles = Vec::new();
    let half = n as i64;
    // integer lattice coordinates in [-n, n] with step 2
    let mut vid = |p: [i64; 3], vertices: &mut Vec<Vector3<f64>>| -> usize {
        *index.entry(p).or_insert_with(|| {
            vertices.push(Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64) * (0.5 * edge / half as f64));
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        for side in [-1i64, 1] {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..n as i64 {
                for j in 0..n as i64 {
                    let corner = |di: i64, dj: i64| {
                        let mut p = [0i64; 3];
                        p[axis] = side * half;
                        p[u] = -half + 2 * (i + di);
                        p[v] = -half + 2 * (j + dj);
                        p
                    };
                    let a = vid(corner(0, 0), &mut vertices);
                    let b = vid(corner(1, 0), &mut vertices);
                    let c = vid(corner(1, 1), &mut vertices);
                    let d = vid(corner(0, 1), &mut vertices);
                    if side > 0 {
                        triangles.push([a, b, c]);
                        triangles.push([a, c, d]);
                    } else {
                        triangles.push([a, c, b]);
                        triangles.push([a, d, c]);
                    }
                }
            }
        }
    }
    SurfaceMesh::new(vertices, triangles)
}

fn unit_icosphere(refinement: u32) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vector3::from(*p).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..refinement {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    (vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn base_icosahedron_on_unit_sphere() {
        let m = generate_sphere(1.0, 0).unwrap();
        assert_eq!(m.num_triangles(), 20);
        for v in m.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_count_follows_refinement() {
        for r in 0..4 {
            assert_eq!(generate_sphere(1.0, r).unwrap().num_triangles(), 20 * 4usize.pow(r));
        }
    }

    #[test]
    fn refined_sphere_area_and_volume() {
        let m = generate_sphere(1.0, 3).unwrap();
        assert!((m.area() / (4.0 * PI) - 1.0).abs() < 0.005);
        let m2 = generate_sphere(2.0, 3).unwrap();
        assert!((m2.volume() / (4.0 / 3.0 * PI * 8.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn outward_normals_on_convex_shapes() {
        for m in [
            generate_sphere(1.0, 2).unwrap(),
            generate_ellipsoid([1.0, 1.0, 0.5], 3).unwrap(),
            generate_cube(1.0, 3).unwrap(),
        ] {
            let center = m.center();
            for (c, n) in m.centroids().iter().zip(m.normals()) {
                assert!((c - center).dot(n) > 0.0);
            }
            assert!(m.volume() > 0.0);
        }
    }

    #[test]
    fn unit_ellipsoid_is_the_sphere() {
        let a = generate_sphere(1.0, 2).unwrap();
        let b = generate_ellipsoid([1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(a.triangles(), b.triangles());
        for (x, y) in a.vertices().iter().zip(b.vertices()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn prolate_ellipsoid_volume() {
        let m = generate_ellipsoid([2.0, 1.0, 1.0], 3).unwrap();
        assert!((m.volume() / (4.0 / 3.0 * PI * 2.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn cube_is_exact() {
        let m = generate_cube(2.0, 4).unwrap();
        assert!((m.volume() - 8.0).abs() < 1e-12);
        assert!((m.area() - 24.0).abs() < 1e-12);
        assert_eq!(m.num_triangles(), 6 * 2 * 16);
    }

    #[test]
    fn radius_of_unit_sphere() {
        let m = generate_sphere(1.0, 1).unwrap();
        assert!((m.radius() - 1.0).abs() < 1e-12);
    }
}
