//! Dipole far fields and the 6×6 scattering matrix of one small body.

use nalgebra::{Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::electrostatics::alpha_from_b;
use crate::error::{Error, Result};
use crate::green::{plane_wave, CMat3, CVec3, C64};

/// Background permittivity and permeability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmConstants {
    pub epsilon0: f64,
    pub mu0: f64,
}

impl Default for EmConstants {
    fn default() -> Self {
        Self { epsilon0: 1.0, mu0: 1.0 }
    }
}

impl EmConstants {
    pub fn new(epsilon0: f64, mu0: f64) -> Result<Self> {
        if !(epsilon0 > 0.0 && mu0 > 0.0) {
            return Err(Error::invalid("epsilon0 and mu0 must be positive"));
        }
        Ok(Self { epsilon0, mu0 })
    }

    /// `√(ε0/μ0)`
    pub fn admittance(&self) -> f64 {
        (self.epsilon0 / self.mu0).sqrt()
    }

    /// `√(μ0³/ε0)`
    pub(crate) fn magnetic_coupling(&self) -> f64 {
        (self.mu0.powi(3) / self.epsilon0).sqrt()
    }
}

pub(crate) fn check_unit(v: &Vector3<f64>, name: &str) -> Result<()> {
    if !((v.norm() - 1.0).abs() < 1e-9) {
        return Err(Error::invalid(format!("{name} must be a unit vector, |{name}| = {}", v.norm())));
    }
    Ok(())
}

pub(crate) fn complexify(v: &Vector3<f64>) -> CVec3 {
    v.map(|x| C64::new(x, 0.0))
}

/// Far-zone pair `(E_sc, H_sc)` radiated in direction `ν′` by moments `P`, `M`.
pub fn dipole_far_fields(
    p: &CVec3,
    m: &CVec3,
    nu_prime: &Vector3<f64>,
    k: f64,
    constants: &EmConstants,
) -> Result<(CVec3, CVec3)> {
    check_unit(nu_prime, "nu'")?;
    let n = complexify(nu_prime);
    let pref = k * k / (4.0 * PI);
    let e = (n.cross(&p.cross(&n)) / C64::from(constants.epsilon0)
        + m.cross(&n) * C64::from((constants.mu0 / constants.epsilon0).sqrt()))
        * C64::from(pref);
    let h = n.cross(&e) * C64::from(constants.admittance());
    Ok((e, h))
}

/// Linear map from the field `(E, H)` at a body to its far-zone scattered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SMatrix6 {
    pub matrix: Matrix6<C64>,
}

impl SMatrix6 {
    pub fn zero() -> Self {
        Self { matrix: Matrix6::zeros() }
    }

    pub fn apply(&self, e: &CVec3, h: &CVec3) -> (CVec3, CVec3) {
        let u = self.matrix * nalgebra::Vector6::new(e[0], e[1], e[2], h[0], h[1], h[2]);
        (CVec3::new(u[0], u[1], u[2]), CVec3::new(u[3], u[4], u[5]))
    }

    pub fn block(&self, row: usize, col: usize) -> CMat3 {
        self.matrix.fixed_view::<3, 3>(3 * row, 3 * col).into_owned()
    }
}

fn cross_matrix(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0)
}

/// S-matrix from real tensors `α`, `β̃`.
pub fn build_smatrix(
    alpha: &Matrix3<f64>,
    beta_tilde: &Matrix3<f64>,
    volume: f64,
    nu_prime: &Vector3<f64>,
    k: f64,
    constants: &EmConstants,
) -> Result<SMatrix6> {
    build_smatrix_complex(&alpha.map(C64::from), &beta_tilde.map(C64::from), volume, nu_prime, k, constants)
}

/// S-matrix from complex tensors (lossy bodies).
pub fn build_smatrix_complex(
    alpha: &CMat3,
    beta_tilde: &CMat3,
    volume: f64,
    nu_prime: &Vector3<f64>,
    k: f64,
    constants: &EmConstants,
) -> Result<SMatrix6> {
    check_unit(nu_prime, "nu'")?;
    if !(volume > 0.0) {
        return Err(Error::invalid("body volume must be positive"));
    }
    Ok(smatrix_unchecked(alpha, beta_tilde, volume, nu_prime, k, constants))
}

pub(crate) fn smatrix_unchecked(
    alpha: &CMat3,
    beta_tilde: &CMat3,
    volume: f64,
    n: &Vector3<f64>,
    k: f64,
    constants: &EmConstants,
) -> SMatrix6 {
    let proj = (Matrix3::identity() - n * n.transpose()).map(C64::from);
    let cross = cross_matrix(n).map(C64::from);
    let blocks = [
        proj * alpha,
        cross * beta_tilde * C64::from(-constants.magnetic_coupling()),
        cross * alpha * C64::from(constants.admittance()),
        proj * beta_tilde * C64::from(constants.mu0),
    ];
    let pref = C64::from(k * k * volume / (4.0 * PI));
    let mut matrix = Matrix6::zeros();
    for (b, block) in blocks.iter().enumerate() {
        matrix.fixed_view_mut::<3, 3>(3 * (b / 2), 3 * (b % 2)).copy_from(&(block * pref));
    }
    SMatrix6 { matrix }
}

/// `β̃ = α(γ̃) + β`.
pub fn compose_beta_tilde(alpha_gamma_tilde: &Matrix3<f64>, beta: &Matrix3<f64>) -> Matrix3<f64> {
    alpha_gamma_tilde + beta
}

/// `β̃⁽ⁿ⁾` from b-tensors and the magnetic contrast `γ̃ = (μ − μ0)/(μ + μ0)`.
pub fn beta_tilde_from_b(b: &[Matrix3<f64>], gamma_tilde: f64, n: usize) -> Result<Matrix3<f64>> {
    Ok(compose_beta_tilde(&alpha_from_b(b, gamma_tilde, n)?, &alpha_from_b(b, -1.0, n)?))
}

/// Plane wave `E_0 = p̂ e^{ikν·x}`, `H_0 = √(ε0/μ0) ν × E_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmIncident {
    pub wavenumber: f64,
    pub direction: Vector3<f64>,
    pub polarization: Vector3<f64>,
    pub constants: EmConstants,
}

impl EmIncident {
    /// Normalizes `direction`; `polarization` defaults to the unit vector
    /// closest to `x̂` that is orthogonal to `direction`.
    pub fn new(
        wavenumber: f64,
        direction: Vector3<f64>,
        polarization: Option<Vector3<f64>>,
        constants: EmConstants,
    ) -> Result<Self> {
        if !(wavenumber > 0.0) {
            return Err(Error::invalid("wavenumber must be positive"));
        }
        let nu = direction
            .try_normalize(0.0)
            .ok_or_else(|| Error::invalid("incident direction must be nonzero"))?;
        let pol = match polarization {
            Some(p) => {
                let p = p.try_normalize(0.0).ok_or_else(|| Error::invalid("polarization must be nonzero"))?;
                if p.dot(&nu).abs() > 1e-9 {
                    return Err(Error::invalid("polarization must be orthogonal to the incident direction"));
                }
                p
            }
            None => {
                let seed = if nu.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
                (seed - nu * nu.dot(&seed)).normalize()
            }
        };
        Ok(Self {
            wavenumber,
            direction: nu,
            polarization: pol,
            constants,
        })
    }

    pub fn fields(&self, x: &Vector3<f64>) -> (CVec3, CVec3) {
        let phase = plane_wave(self.wavenumber, &self.direction, x);
        let e = complexify(&self.polarization) * phase;
        let h = complexify(&self.direction).cross(&e) * C64::from(self.constants.admittance());
        (e, h)
    }
}
