//! Capacitance and polarizability tensors of a single body.
//!
//! The polarizability tensor is built from the series
//!
//! ```text
//! α⁽ⁿ⁾(γ) = (2/V) Σ_{m=0}^{n} (−1/2π)^m (γ^{n+2} − γ^{m+1})/(γ − 1) b⁽ᵐ⁾
//! ```
//!
//! with `b⁽⁰⁾ = V·I` and `b⁽ᵐ⁾_pq = ∫∫ N_p(s) [S Ψ^{m−1} N_q](s) ds`, where `S`
//! is the Newton (`1/r`) single layer and `Ψ` the surface operator with kernel
//! `∂(1/r_ts)/∂N_t`. The magnetic tensor is `β = α(−1)`.
//!
//! Units: ε0 = 1, so a sphere of radius `a` has capacitance `4πa`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{CMat3, C64};
use crate::geometry::{assemble, pairwise_sum, Kernel, OperatorOptions, SurfaceMesh};
use crate::linalg::{gmres, lu_solve, GmresOptions, SolveReport};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Numerical controls for the single-body computations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ElectrostaticsOptions {
    /// Operators for the b-tensor chain.
    pub operator: OperatorOptions,
    /// Operator for the capacitance collocation system.
    pub capacitance_operator: OperatorOptions,
    /// Systems larger than this are solved by GMRES.
    pub dense_limit: usize,
    pub tolerance: f64,
}

impl Default for ElectrostaticsOptions {
    fn default() -> Self {
        Self {
            operator: OperatorOptions::default(),
            capacitance_operator: OperatorOptions::collocation(),
            dense_limit: 1500,
            tolerance: 1e-12,
        }
    }
}

/// Surface charge solving the unit-potential conductor problem.
#[derive(Debug, Clone)]
pub struct ChargeDensity {
    /// Total charge, which equals the capacitance.
    pub capacitance: f64,
    /// Piecewise-constant density per triangle.
    pub density: Vec<f64>,
    pub report: SolveReport,
}

/// Capacitance of `mesh` as a perfect conductor (ε0 = 1).
pub fn capacitance(mesh: &SurfaceMesh) -> Result<f64> {
    Ok(conductor_charge(mesh, &ElectrostaticsOptions::default())?.capacitance)
}

/// Solves `∫ σ(s') / (4π|s − s'|) ds' = 1` by centroid collocation.
pub fn conductor_charge(mesh: &SurfaceMesh, opts: &ElectrostaticsOptions) -> Result<ChargeDensity> {
    let mut single = assemble(mesh, Kernel::Newton, &opts.capacitance_operator);
    let n = mesh.num_triangles();
    for i in 0..n {
        for j in 0..n {
            single.set(i, j, single.get(i, j) / FOUR_PI);
        }
    }
    let ones = vec![1.0; n];
    let (density, report) = if n <= opts.dense_limit {
        lu_solve(&single, &ones)?
    } else {
        gmres(
            &single,
            &ones,
            None,
            &GmresOptions {
                tolerance: opts.tolerance,
                restart: 100,
                max_iterations: 2000,
            },
        )?
    };
    let charges: Vec<f64> = density.iter().zip(mesh.areas()).map(|(s, a)| s * a).collect();
    let capacitance = pairwise_sum(&charges);
    if !(capacitance > 0.0) {
        return Err(Error::SingularSystem(format!(
            "collocation produced non-positive capacitance {capacitance}"
        )));
    }
    Ok(ChargeDensity {
        capacitance,
        density,
        report,
    })
}

/// The tensors `b⁽⁰⁾ … b⁽ᵐᵃˣ⁾`.
pub fn b_tensors(mesh: &SurfaceMesh, max_order: usize, opts: &ElectrostaticsOptions) -> Vec<Matrix3<f64>> {
    let mut out = vec![Matrix3::identity() * mesh.volume()];
    if max_order == 0 {
        return out;
    }
    let single = assemble(mesh, Kernel::Newton, &opts.operator);
    let psi = if max_order >= 2 {
        Some(assemble(mesh, Kernel::NormalDerivative, &opts.operator))
    } else {
        None
    };
    let n = mesh.num_triangles();
    let areas = mesh.areas();
    let normals = mesh.normals();
    // chains[q] = Ψ^{m-1} N_q
    let mut chains: Vec<Vec<f64>> = (0..3)
        .map(|q| normals.iter().map(|nrm| nrm[q]).collect())
        .collect();
    for m in 1..=max_order {
        let mut b = Matrix3::zeros();
        for (q, chain) in chains.iter().enumerate() {
            let layer = single.matvec(chain);
            for p in 0..3 {
                let terms: Vec<f64> = (0..n).map(|i| areas[i] * normals[i][p] * layer[i]).collect();
                b[(p, q)] = pairwise_sum(&terms);
            }
        }
        out.push(b);
        if m < max_order {
            let psi = psi.as_ref().expect("assembled for max_order >= 2");
            for chain in chains.iter_mut() {
                *chain = psi.matvec(chain);
            }
        }
    }
    out
}

/// A single tensor `b⁽ᵐ⁾` with default quadrature.
pub fn b_tensor(mesh: &SurfaceMesh, m: usize) -> Matrix3<f64> {
    b_tensors(mesh, m, &ElectrostaticsOptions::default())
        .pop()
        .expect("b_tensors returns max_order + 1 entries")
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma = {gamma} outside [-1, 1]")));
    }
    if gamma == 1.0 {
        return Err(Error::invalid(
            "gamma = 1 (perfect conductor) is not covered by the series",
        ));
    }
    Ok(())
}

/// `α⁽ⁿ⁾(γ)` from precomputed tensors `b[0..=n]`; `b[0]` must be `V·I`.
pub fn alpha_from_b(b: &[Matrix3<f64>], gamma: f64, n: usize) -> Result<Matrix3<f64>> {
    check_gamma(gamma)?;
    if n < 1 {
        return Err(Error::invalid("series order n must be at least 1"));
    }
    if b.len() < n + 1 {
        return Err(Error::invalid(format!(
            "order {n} needs {} b-tensors, got {}",
            n + 1,
            b.len()
        )));
    }
    let volume = b[0][(0, 0)];
    if !(volume > 0.0) {
        return Err(Error::invalid("b(0) must be V·I with V > 0"));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let top = gamma.powi(n as i32 + 2);
    let mut alpha = Matrix3::zeros();
    for (m, bm) in b.iter().enumerate().take(n + 1) {
        let sign = if m % 2 == 0 { 2.0 } else { -2.0 };
        let s = sign * (top - gamma.powi(m as i32 + 1)) / (gamma - 1.0);
        let d = two_pi.powi(m as i32) * volume;
        alpha += (bm * s) / d;
    }
    Ok(alpha)
}

/// Same series for a complex contrast, as produced by a lossy permittivity.
pub fn alpha_from_b_complex(b: &[Matrix3<f64>], gamma: C64, n: usize) -> Result<CMat3> {
    if !(gamma.norm() < 1.0) {
        return Err(Error::invalid(format!("complex contrast {gamma} must satisfy |gamma| < 1")));
    }
    if n < 1 || b.len() < n + 1 {
        return Err(Error::invalid(format!("order {n} needs {} b-tensors, got {}", n + 1, b.len())));
    }
    let volume = b[0][(0, 0)];
    if !(volume > 0.0) {
        return Err(Error::invalid("b(0) must be V·I with V > 0"));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let top = gamma.powi(n as i32 + 2);
    let mut alpha = CMat3::zeros();
    for (m, bm) in b.iter().enumerate().take(n + 1) {
        let sign = if m % 2 == 0 { 2.0 } else { -2.0 };
        let s = (top - gamma.powi(m as i32 + 1)) * sign / (gamma - 1.0);
        let d = two_pi.powi(m as i32) * volume;
        alpha += bm.map(|v| s * v / d);
    }
    Ok(alpha)
}

/// Electric polarizability `α⁽ⁿ⁾(γ)` of `mesh`, with `γ = (ε − ε0)/(ε + ε0)`.
pub fn alpha_series(mesh: &SurfaceMesh, gamma: f64, n: usize) -> Result<Matrix3<f64>> {
    check_gamma(gamma)?;
    let b = b_tensors(mesh, n, &ElectrostaticsOptions::default());
    alpha_from_b(&b, gamma, n)
}

/// Magnetic polarizability `β⁽ⁿ⁾ = α⁽ⁿ⁾(−1)`.
pub fn beta_tensor(mesh: &SurfaceMesh, n: usize) -> Result<Matrix3<f64>> {
    alpha_series(mesh, -1.0, n)
}

/// Geometric-rate estimate of the series tail.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceEstimate {
    /// Fitted ratio `q` of successive differences.
    pub ratio: f64,
    /// False when the differences are not monotonically decreasing.
    pub reliable: bool,
    /// `‖α⁽ⁿ⁺¹⁾ − α⁽ⁿ⁾‖_F` for `n = 1, 2, …`.
    pub differences: Vec<f64>,
}

/// Fits `q` in `‖α − α⁽ⁿ⁾‖ = O(qⁿ)` from the available tensors.
///
/// Needs at least three series orders, i.e. `b_tensors.len() >= 4`.
pub fn convergence_estimate(b_tensors: &[Matrix3<f64>], gamma: f64) -> Result<ConvergenceEstimate> {
    check_gamma(gamma)?;
    let max_n = b_tensors.len().saturating_sub(1);
    if max_n < 3 {
        return Err(Error::invalid(
            "convergence estimate needs at least three series orders (n = 1, 2, 3)",
        ));
    }
    let alphas: Vec<Matrix3<f64>> = (1..=max_n)
        .map(|n| alpha_from_b(b_tensors, gamma, n))
        .collect::<Result<_>>()?;
    let differences: Vec<f64> = alphas.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let scale = alphas.last().map(|a| a.norm()).unwrap_or(0.0);
    if differences.iter().all(|&d| d <= 1e-15 * scale.max(1e-300)) {
        return Ok(ConvergenceEstimate {
            ratio: 0.0,
            reliable: true,
            differences,
        });
    }
    let reliable = differences.windows(2).all(|w| w[1] < w[0]) && differences.iter().all(|&d| d > 0.0);
    // least-squares slope of ln d_n against n
    let pts: Vec<(f64, f64)> = differences
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(i, &d)| (i as f64, d.ln()))
        .collect();
    let ratio = if pts.len() < 2 {
        0.0
    } else {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    };
    Ok(ConvergenceEstimate {
        ratio,
        reliable: reliable && ratio < 1.0,
        differences,
    })
}

/// Everything computed for one body shape.
#[derive(Debug, Clone, Serialize)]
pub struct PolarizabilityResult {
    pub capacitance: f64,
    pub volume: f64,
    pub area: f64,
    /// Half the largest vertex-to-vertex distance.
    pub radius: f64,
    /// `b⁽⁰⁾ … b⁽ⁿ⁾`.
    pub b: Vec<Matrix3<f64>>,
    pub alpha: Matrix3<f64>,
    pub beta: Matrix3<f64>,
    pub gamma: f64,
    pub order: usize,
    pub convergence_ratio: Option<f64>,
    pub convergence_reliable: bool,
}

/// Computes capacitance, b-tensors, `α⁽ⁿ⁾(γ)` and `β⁽ⁿ⁾` in one pass.
pub fn polarizability(
    mesh: &SurfaceMesh,
    gamma: f64,
    order: usize,
    opts: &ElectrostaticsOptions,
) -> Result<PolarizabilityResult> {
    check_gamma(gamma)?;
    if order < 1 {
        return Err(Error::invalid("series order must be at least 1"));
    }
    let charge = conductor_charge(mesh, opts)?;
    let b = b_tensors(mesh, order, opts);
    let alpha = alpha_from_b(&b, gamma, order)?;
    let beta = alpha_from_b(&b, -1.0, order)?;
    let estimate = if order >= 3 {
        Some(convergence_estimate(&b, gamma)?)
    } else {
        None
    };
    Ok(PolarizabilityResult {
        capacitance: charge.capacitance,
        volume: mesh.volume(),
        area: mesh.area(),
        radius: mesh.radius(),
        b,
        alpha,
        beta,
        gamma,
        order,
        convergence_ratio: estimate.as_ref().map(|e| e.ratio),
        convergence_reliable: estimate.map(|e| e.reliable).unwrap_or(false),
    })
}

/// `γ = (ε − ε0)/(ε + ε0)`.
pub fn contrast(permittivity: f64, background: f64) -> f64 {
    (permittivity - background) / (permittivity + background)
}

/// `ε + i4πσ/ω`
pub fn lossy_permittivity(permittivity: f64, conductivity: f64, omega: f64) -> C64 {
    C64::new(permittivity, 4.0 * std::f64::consts::PI * conductivity / omega)
}

/// `γ = (ε − ε0)/(ε + ε0)` for complex `ε`.
pub fn complex_contrast(permittivity: C64, background: f64) -> C64 {
    (permittivity - background) / (permittivity + background)
}
