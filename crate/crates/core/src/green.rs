//! Free-space Helmholtz kernels and their derivatives.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;
pub type CVec3 = Vector3<C64>;
pub type CMat3 = Matrix3<C64>;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Acoustic kernel `e^{ikr} / (4πr)`.
pub fn helmholtz(k: f64, r: f64) -> C64 {
    (I * k * r).exp() / (4.0 * PI * r)
}

/// Electromagnetic kernel `e^{ikr} / r` (no `4π`).
pub fn helmholtz_em(k: f64, r: f64) -> C64 {
    (I * k * r).exp() / r
}

/// `d/dr` of a kernel `g` of the form `e^{ikr}/(c r)`, given `g` itself.
pub fn radial_derivative(k: f64, r: f64, g: C64) -> C64 {
    (I * k - 1.0 / r) * g
}

/// `e^{ikν·x}`
pub fn plane_wave(k: f64, nu: &Vector3<f64>, x: &Vector3<f64>) -> C64 {
    (I * k * nu.dot(x)).exp()
}

/// Acoustic kernel and the pieces of its target derivatives at `d = x − y`.
#[derive(Debug, Clone, Copy)]
pub struct KernelPoint {
    pub r: f64,
    /// `(x − y)/|x − y|`
    pub n: Vector3<f64>,
    pub g: C64,
    /// `∂g/∂r`
    pub dg: C64,
}

impl KernelPoint {
    pub fn acoustic(k: f64, d: &Vector3<f64>) -> Self {
        let r = d.norm();
        let g = helmholtz(k, r);
        Self {
            r,
            n: d / r,
            g,
            dg: radial_derivative(k, r, g),
        }
    }

    /// `∇_x g`
    pub fn gradient(&self) -> CVec3 {
        self.n.map(|v| self.dg * v)
    }

    /// `∂_l (g n_p)` as the matrix with row `l`, column `p`.
    pub fn dipole_gradient(&self) -> CMat3 {
        let nn = self.n * self.n.transpose();
        let t = (Matrix3::identity() - nn) / self.r;
        CMat3::from_fn(|l, p| self.dg * nn[(l, p)] + self.g * t[(l, p)])
    }
}

/// Radius of the ball with volume `cell_volume`.
pub fn equivalent_radius(cell_volume: f64) -> f64 {
    (3.0 * cell_volume / (4.0 * PI)).cbrt()
}

/// `∫_{|y|<R} e^{ik|y|}/(4π|y|) dy`, which tends to `R²/2` as `kR → 0`.
pub fn ball_integral(k: f64, radius: f64) -> C64 {
    let kr = k * radius;
    if kr < 1e-3 {
        // series avoids cancellation: R²/2 + ikR³/3 − k²R⁴/8
        let r2 = radius * radius;
        return C64::new(r2 / 2.0 - k * k * r2 * r2 / 8.0, k * r2 * radius / 3.0);
    }
    ((I * kr).exp() * (1.0 - I * kr) - 1.0) / (k * k)
}

/// `∫_{|y|<R} ∂_l(g n_p)(y) dy = δ_lp R e^{ikR}/3`; returns the scalar factor.
pub fn ball_dipole_gradient_integral(k: f64, radius: f64) -> C64 {
    radius * (I * k * radius).exp() / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_satisfies_helmholtz() {
        let k = 1.7;
        let x = Vector3::new(0.4, -0.3, 0.9);
        let h = 1e-3;
        let f = |p: Vector3<f64>| helmholtz(k, p.norm());
        let mut lap = -6.0 * f(x);
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = h;
            lap += f(x + e) + f(x - e);
        }
        lap /= h * h;
        let res = (lap + k * k * f(x)).norm() / (k * k * f(x).norm());
        assert!(res < 1e-5, "{res}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let k = 2.3;
        let d = Vector3::new(0.3, 0.5, -0.7);
        let kp = KernelPoint::acoustic(k, &d);
        let h = 1e-6;
        let grad = kp.gradient();
        let dg = kp.dipole_gradient();
        for l in 0..3 {
            let mut e = Vector3::zeros();
            e[l] = h;
            let p = KernelPoint::acoustic(k, &(d + e));
            let m = KernelPoint::acoustic(k, &(d - e));
            let fd = (p.g - m.g) / (2.0 * h);
            assert!((fd - grad[l]).norm() < 1e-7);
            for q in 0..3 {
                let fd = (p.g * p.n[q] - m.g * m.n[q]) / (2.0 * h);
                assert!((fd - dg[(l, q)]).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn ball_integrals_match_radial_quadrature() {
        let (k, radius) = (2.0, 0.4);
        let m = 20000;
        let dr = radius / m as f64;
        let mut mono = C64::new(0.0, 0.0);
        let mut dip = C64::new(0.0, 0.0);
        for i in 0..m {
            let r = (i as f64 + 0.5) * dr;
            let g = helmholtz(k, r);
            mono += 4.0 * PI * r * r * g * dr;
            // angular mean of n_l n_l is 1/3, of δ_ll − n_l n_l is 2/3
            dip += 4.0 * PI * r * r * (radial_derivative(k, r, g) / 3.0 + g * 2.0 / (3.0 * r)) * dr;
        }
        assert!((mono - ball_integral(k, radius)).norm() < 1e-8);
        assert!((dip - ball_dipole_gradient_integral(k, radius)).norm() < 1e-8);
        let tiny = 1e-5;
        assert_relative_eq!(ball_integral(k, tiny).re, tiny * tiny / 2.0, max_relative = 1e-9);
        let exact = ((I * 2e-3).exp() * (1.0 - I * 2e-3) - 1.0) / 1.0;
        assert!((ball_integral(1.0, 2e-3) - exact).norm() < 1e-12);
    }

    #[test]
    fn em_kernel_differs_by_four_pi() {
        assert_relative_eq!((helmholtz_em(1.3, 2.0) / helmholtz(1.3, 2.0)).re, 4.0 * PI, epsilon = 1e-12);
    }
}
