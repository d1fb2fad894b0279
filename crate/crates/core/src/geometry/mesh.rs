use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Closed, consistently oriented triangulated surface with outward normals.
///
/// Per-triangle normals, areas and centroids are cached at construction. All
/// boundary integrals in the crate treat normals and densities as piecewise
/// constant over triangles.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    normals: Vec<Vector3<f64>>,
    areas: Vec<f64>,
    centroids: Vec<Vector3<f64>>,
}

impl SurfaceMesh {
    /// Builds a mesh, checking that it is a closed orientable 2-manifold.
    ///
    /// If the enclosed signed volume is negative every triangle is flipped so
    /// that normals point outward.
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.len() < 4 {
            return Err(Error::invalid(format!(
                "a closed surface needs at least 4 triangles, got {}",
                triangles.len()
            )));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::invalid(format!(
                        "triangle {t} references vertex {v} but only {} vertices exist",
                        vertices.len()
                    )));
                }
            }
        }
        check_closed_manifold(&triangles)?;

        let mut mesh = Self::from_raw(vertices, triangles)?;
        if mesh.volume() < 0.0 {
            for tri in &mut mesh.triangles {
                tri.swap(1, 2);
            }
            mesh = Self::from_raw(mesh.vertices, mesh.triangles)?;
        }
        Ok(mesh)
    }

    fn from_raw(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        for (t, &[a, b, c]) in triangles.iter().enumerate() {
            let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
            let cross = (pb - pa).cross(&(pc - pa));
            let norm = cross.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::DegenerateTriangle(t));
            }
            normals.push(cross / norm);
            areas.push(0.5 * norm);
            centroids.push((pa + pb + pc) / 3.0);
        }
        Ok(Self {
            vertices,
            triangles,
            normals,
            areas,
            centroids,
        })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn centroids(&self) -> &[Vector3<f64>] {
        &self.centroids
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Corner positions of triangle `t`.
    pub fn corners(&self, t: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Total surface area.
    pub fn area(&self) -> f64 {
        pairwise_sum(&self.areas)
    }

    /// Enclosed volume from the divergence theorem.
    pub fn volume(&self) -> f64 {
        let terms: Vec<f64> = self
            .triangles
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// Area-weighted centroid of the surface.
    pub fn center(&self) -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for (c, a) in self.centroids.iter().zip(&self.areas) {
            acc += c * *a;
        }
        acc / self.area()
    }

    /// Half the largest vertex-to-vertex distance.
    pub fn radius(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max((a - b).norm_squared());
            }
        }
        0.5 * best.sqrt()
    }

    /// Largest triangle diameter, the mesh size `h`.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| triangle_diameter(&self.corners(t)))
            .fold(0.0, f64::max)
    }

    /// Returns the image of the mesh under `x -> linear * x + shift`.
    ///
    /// Normals are recomputed from the mapped vertices.
    pub fn transformed(&self, linear: &Matrix3<f64>, shift: &Vector3<f64>) -> Result<Self> {
        let vertices = self.vertices.iter().map(|v| linear * v + shift).collect();
        Self::new(vertices, self.triangles.clone())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        self.transformed(&(Matrix3::identity() * factor), &Vector3::zeros())
    }

    pub fn translated(&self, shift: &Vector3<f64>) -> Result<Self> {
        self.transformed(&Matrix3::identity(), shift)
    }

    /// For each triangle, the sorted list of triangles sharing at least one vertex with it.
    pub(crate) fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut by_vertex = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                by_vertex[v].push(t);
            }
        }
        self.triangles
            .iter()
            .map(|tri| {
                let mut out: Vec<usize> = tri.iter().flat_map(|&v| by_vertex[v].iter().copied()).collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect()
    }
}

pub(crate) fn triangle_diameter(c: &[Vector3<f64>; 3]) -> f64 {
    (c[0] - c[1])
        .norm()
        .max((c[1] - c[2]).norm())
        .max((c[2] - c[0]).norm())
}

fn check_closed_manifold(triangles: &[[usize; 3]]) -> Result<()> {
    // undirected edge -> (count, net orientation)
    let mut edges: HashMap<(usize, usize), (usize, i32)> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let entry = edges.entry(key).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += if a < b { 1 } else { -1 };
        }
    }
    let mut keys: Vec<_> = edges.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let (count, net) = edges[&key];
        match count {
            1 => return Err(Error::OpenSurface(key.0, key.1)),
            2 if net != 0 => return Err(Error::InconsistentOrientation(key.0, key.1)),
            2 => {}
            n => return Err(Error::NonManifoldEdge(key.0, key.1, n)),
        }
    }
    Ok(())
}

/// Pairwise summation in fixed index order.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
