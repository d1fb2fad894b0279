//! Serde adapters for file formats: 3×3 matrices as nested row arrays and
//! complex numbers as `[re, im]`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub mod mat3 {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let r: [[f64; 3]; 3] = Deserialize::deserialize(d)?;
        Ok(from_rows(&r))
    }
}

pub mod opt_mat3 {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<Matrix3<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix3<f64>>, D::Error> {
        let r: Option<[[f64; 3]; 3]> = Deserialize::deserialize(d)?;
        Ok(r.as_ref().map(from_rows))
    }
}

pub mod vec3 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let a: [f64; 3] = Deserialize::deserialize(d)?;
        Ok(Vector3::from(a))
    }
}

pub fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

pub fn from_rows(r: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| r[i][j])
}

pub fn complex_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}
