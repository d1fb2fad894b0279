//! Many-body self-consistent field for point-like small bodies.

use log::warn;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{check_regime, BoundaryKind, ParticleEnsemble, RegimeDiagnostics, RegimeMode, RegimeThresholds};
use crate::error::{Error, Result};
use crate::green::{plane_wave, CVec3, KernelPoint, C64};
use crate::linalg::{gmres, lu_solve, relative_residual, DenseMatrix, GmresOptions, LinearOperator, SolveReport};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Solver controls for the discrete systems.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteOptions {
    /// Largest number of unknowns solved by dense LU; larger systems use
    /// matrix-free GMRES.
    pub dense_limit: usize,
    pub gmres: GmresOptions,
    pub thresholds: RegimeThresholds,
    /// Field points closer than this multiple of the body radius trigger a warning.
    pub point_safety: f64,
}

impl Default for DiscreteOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            gmres: GmresOptions {
                tolerance: 1e-11,
                restart: 100,
                max_iterations: 2000,
            },
            thresholds: RegimeThresholds::default(),
            point_safety: 10.0,
        }
    }
}

/// Self-consistent values at the bodies and the resulting source strengths.
///
/// Body `j` radiates `g(x, s_j) (Q_j + n·D_j)` with `n = (x − s_j)/|x − s_j|`;
/// `D_j` is absent except for hard bodies.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteFieldSolution {
    pub boundary: BoundaryKind,
    pub wavenumber: f64,
    pub direction: Vector3<f64>,
    pub positions: Vec<Vector3<f64>>,
    pub u: Vec<C64>,
    pub grad_u: Option<Vec<CVec3>>,
    pub charges: Vec<C64>,
    pub dipoles: Option<Vec<CVec3>>,
    pub report: SolveReport,
    pub regime: Option<RegimeDiagnostics>,
    #[serde(skip)]
    warn_distance: f64,
}

impl DiscreteFieldSolution {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Direction-dependent strength `Q_j + n·D_j`.
    pub fn strength(&self, j: usize, n: &Vector3<f64>) -> C64 {
        let dip = self.dipoles.as_ref().map_or(C64::new(0.0, 0.0), |d| dot_real(n, &d[j]));
        self.charges[j] + dip
    }

    pub fn incident(&self, x: &Vector3<f64>) -> C64 {
        plane_wave(self.wavenumber, &self.direction, x)
    }

    /// Total field `u_0(x) + Σ_j g(x, s_j)(Q_j + n·D_j)`.
    pub fn evaluate(&self, points: &[Vector3<f64>]) -> Vec<C64> {
        let limit = self.warn_distance;
        let out: Vec<(C64, Option<usize>)> = points
            .par_iter()
            .map(|x| {
                let mut u = self.incident(x);
                let mut near = None;
                for (j, s) in self.positions.iter().enumerate() {
                    let d = x - s;
                    if near.is_none() && d.norm() <= limit {
                        near = Some(j);
                    }
                    let kp = KernelPoint::acoustic(self.wavenumber, &d);
                    u += kp.g * self.strength(j, &kp.n);
                }
                (u, near)
            })
            .collect();
        let flagged: Vec<_> = points.iter().zip(&out).filter_map(|(x, (_, n))| n.map(|j| (x, j))).collect();
        if let Some((x, j)) = flagged.first() {
            warn!(
                "{} field point(s) lie within {limit:.3e} of a body; the point approximation is inaccurate there (first: {:?} near body {j})",
                flagged.len(),
                x.as_slice()
            );
        }
        out.into_iter().map(|(u, _)| u).collect()
    }

    /// `A(n̂) = (1/4π) Σ_j e^{−ik n̂·s_j}(Q_j + n̂·D_j)`.
    pub fn far_field(&self, directions: &[Vector3<f64>]) -> Vec<C64> {
        directions
            .iter()
            .map(|dir| {
                let n = dir.normalize();
                let sum: C64 = self
                    .positions
                    .iter()
                    .enumerate()
                    .map(|(j, s)| (-I * self.wavenumber * n.dot(s)).exp() * self.strength(j, &n))
                    .sum();
                sum / (4.0 * std::f64::consts::PI)
            })
            .collect()
    }
}

fn dot_real(n: &Vector3<f64>, v: &CVec3) -> C64 {
    v[0] * n[0] + v[1] * n[1] + v[2] * n[2]
}

/// Per-body map from `(u, ∇u)` at the body to the strengths `(Q, D)`.
#[derive(Debug, Clone, Copy)]
enum BodyResponse {
    /// `Q = −w u`
    Monopole(f64),
    /// `Q = −k²V u`, `D = ikV β ∇u`
    Dipole { k2v: f64, ikv_beta: [[C64; 3]; 3] },
}

impl BodyResponse {
    fn strengths(&self, x: &[C64]) -> (C64, [C64; 3]) {
        match *self {
            BodyResponse::Monopole(w) => (-w * x[0], [C64::new(0.0, 0.0); 3]),
            BodyResponse::Dipole { k2v, ikv_beta } => {
                let mut d = [C64::new(0.0, 0.0); 3];
                for (p, dp) in d.iter_mut().enumerate() {
                    *dp = (0..3).map(|q| ikv_beta[p][q] * x[1 + q]).sum();
                }
                (-k2v * x[0], d)
            }
        }
    }
}

/// Contribution at target `x` (value, and gradient when `block == 4`) of a
/// source with strengths `(q, d)` at offset `diff = x − s`.
fn radiate(k: f64, diff: &Vector3<f64>, q: C64, d: &[C64; 3], block: usize, out: &mut [C64]) {
    let kp = KernelPoint::acoustic(k, diff);
    let nd = d[0] * kp.n[0] + d[1] * kp.n[1] + d[2] * kp.n[2];
    out[0] += kp.g * (q + nd);
    if block == 4 {
        let grad = kp.gradient();
        let dg = kp.dipole_gradient();
        for l in 0..3 {
            out[1 + l] += grad[l] * q + dg[(l, 0)] * d[0] + dg[(l, 1)] * d[1] + dg[(l, 2)] * d[2];
        }
    }
}

/// `x_m − Σ_{j≠m} K(m, j) x_j` with `K` built from [`radiate`].
struct FoldyLax<'a> {
    k: f64,
    block: usize,
    positions: &'a [Vector3<f64>],
    response: Vec<BodyResponse>,
}

impl FoldyLax<'_> {
    fn assemble(&self) -> DenseMatrix<C64> {
        let b = self.block;
        let n = self.dim();
        DenseMatrix::from_row_blocks(n, n, b, |m, rows| {
            for (j, resp) in self.response.iter().enumerate() {
                if j == m {
                    for r in 0..b {
                        rows[r * n + m * b + r] = C64::new(1.0, 0.0);
                    }
                    continue;
                }
                let kp = KernelPoint::acoustic(self.k, &(self.positions[m] - self.positions[j]));
                match *resp {
                    BodyResponse::Monopole(w) => rows[j] = kp.g * w,
                    BodyResponse::Dipole { k2v, ikv_beta } => {
                        // value row: g(−k²V) | g n_p (ikVβ)_pq
                        // gradient rows: g' n_l (−k²V) | ∂_l(g n_p) (ikVβ)_pq
                        let grad = kp.gradient();
                        let dg = kp.dipole_gradient();
                        let c = j * 4;
                        rows[c] = kp.g * k2v;
                        for l in 0..3 {
                            rows[(1 + l) * n + c] = grad[l] * k2v;
                        }
                        for q in 0..3 {
                            let mut v = C64::new(0.0, 0.0);
                            for p in 0..3 {
                                v += kp.g * kp.n[p] * ikv_beta[p][q];
                            }
                            rows[c + 1 + q] = -v;
                            for l in 0..3 {
                                let mut v = C64::new(0.0, 0.0);
                                for p in 0..3 {
                                    v += dg[(l, p)] * ikv_beta[p][q];
                                }
                                rows[(1 + l) * n + c + 1 + q] = -v;
                            }
                        }
                    }
                }
            }
        })
    }
}

impl LinearOperator<C64> for FoldyLax<'_> {
    fn dim(&self) -> usize {
        self.block * self.positions.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let b = self.block;
        let strengths: Vec<(C64, [C64; 3])> = x
            .chunks(b)
            .zip(&self.response)
            .map(|(xj, resp)| resp.strengths(xj))
            .collect();
        y.par_chunks_mut(b).enumerate().for_each(|(m, ym)| {
            let mut acc = [C64::new(0.0, 0.0); 4];
            for (j, (q, d)) in strengths.iter().enumerate() {
                if j != m {
                    radiate(self.k, &(self.positions[m] - self.positions[j]), *q, d, b, &mut acc);
                }
            }
            for r in 0..b {
                ym[r] = x[m * b + r] - acc[r];
            }
        });
    }
}

fn require(ensemble: &ParticleEnsemble, kind: BoundaryKind) -> Result<()> {
    if ensemble.physics.boundary != kind {
        return Err(Error::invalid(format!(
            "ensemble boundary is {:?}, solver expects {:?}",
            ensemble.physics.boundary, kind
        )));
    }
    Ok(())
}

fn regime(ensemble: &ParticleEnsemble, opts: &DiscreteOptions) -> Result<Option<RegimeDiagnostics>> {
    if ensemble.is_empty() {
        return Ok(None);
    }
    let diag = check_regime(ensemble, RegimeMode::Acoustic, &opts.thresholds)?;
    for v in diag.violations() {
        warn!("acoustic regime: {v}");
    }
    if ensemble.len() > 1 && !(diag.min_distance > 0.0) {
        return Err(Error::SingularSystem("two bodies share a position".into()));
    }
    Ok(Some(diag))
}

fn solve_system(ensemble: &ParticleEnsemble, response: Vec<BodyResponse>, block: usize, opts: &DiscreteOptions) -> Result<DiscreteFieldSolution> {
    let regime = regime(ensemble, opts)?;
    let k = ensemble.physics.wavenumber;
    let nu = ensemble.physics.direction;
    let positions = ensemble.positions();
    let mut rhs = Vec::with_capacity(block * positions.len());
    for s in &positions {
        let u0 = plane_wave(k, &nu, s);
        rhs.push(u0);
        if block == 4 {
            rhs.extend(nu.iter().map(|&v| I * k * v * u0));
        }
    }
    let sys = FoldyLax {
        k,
        block,
        positions: &positions,
        response,
    };
    let (x, report) = if rhs.is_empty() {
        (Vec::new(), SolveReport::trivial())
    } else if sys.dim() <= opts.dense_limit {
        lu_solve(&sys.assemble(), &rhs)?
    } else {
        gmres(&sys, &rhs, Some(&rhs), &opts.gmres)?
    };
    let report = if report.relative_residual > 0.0 || x.is_empty() {
        report
    } else {
        SolveReport {
            relative_residual: relative_residual(&sys, &x, &rhs),
            ..report
        }
    };
    let mut u = Vec::with_capacity(positions.len());
    let mut grad = Vec::new();
    let mut charges = Vec::new();
    let mut dipoles = Vec::new();
    for (xj, resp) in x.chunks(block).zip(&sys.response) {
        u.push(xj[0]);
        let (q, d) = resp.strengths(xj);
        charges.push(q);
        if block == 4 {
            grad.push(CVec3::new(xj[1], xj[2], xj[3]));
            dipoles.push(CVec3::new(d[0], d[1], d[2]));
        }
    }
    Ok(DiscreteFieldSolution {
        boundary: ensemble.physics.boundary,
        wavenumber: k,
        direction: nu,
        positions,
        u,
        grad_u: (block == 4).then_some(grad),
        charges,
        dipoles: (block == 4).then_some(dipoles),
        report,
        regime,
        warn_distance: ensemble.max_radius() * opts.point_safety,
    })
}

/// Soft bodies: `u_m + Σ_{j≠m} g(s_m, s_j) C_j u_j = u_0(s_m)`, `Q_j = −C_j u_j`.
pub fn solve_dirichlet(ensemble: &ParticleEnsemble, opts: &DiscreteOptions) -> Result<DiscreteFieldSolution> {
    require(ensemble, BoundaryKind::Dirichlet)?;
    let resp = ensemble.bodies.iter().map(|b| BodyResponse::Monopole(b.capacitance)).collect();
    solve_system(ensemble, resp, 1, opts)
}

/// Impedance bodies: the soft system with `C_j` replaced by `h|S_j|/(1 + h|S_j|/C_j)`.
pub fn solve_impedance(ensemble: &ParticleEnsemble, opts: &DiscreteOptions) -> Result<DiscreteFieldSolution> {
    require(ensemble, BoundaryKind::Impedance)?;
    if let Some(j) = ensemble.bodies.iter().position(|b| !(b.h >= 0.0)) {
        return Err(Error::invalid(format!("body {j} has negative impedance h")));
    }
    let resp = ensemble.bodies.iter().map(|b| BodyResponse::Monopole(b.impedance_weight())).collect();
    solve_system(ensemble, resp, 1, opts)
}

/// Hard bodies: unknowns `u_e` and `∇u_e` per body with `Δu_e = −k²u_e`.
pub fn solve_neumann(ensemble: &ParticleEnsemble, opts: &DiscreteOptions) -> Result<DiscreteFieldSolution> {
    require(ensemble, BoundaryKind::Neumann)?;
    let k = ensemble.physics.wavenumber;
    let resp = ensemble
        .bodies
        .iter()
        .map(|b| BodyResponse::Dipole {
            k2v: k * k * b.volume,
            ikv_beta: std::array::from_fn(|p| std::array::from_fn(|q| I * k * b.volume * b.beta[(p, q)])),
        })
        .collect();
    solve_system(ensemble, resp, 4, opts)
}

/// Dispatches on the ensemble's boundary kind.
pub fn solve_discrete(ensemble: &ParticleEnsemble, opts: &DiscreteOptions) -> Result<DiscreteFieldSolution> {
    match ensemble.physics.boundary {
        BoundaryKind::Dirichlet => solve_dirichlet(ensemble, opts),
        BoundaryKind::Neumann => solve_neumann(ensemble, opts),
        BoundaryKind::Impedance => solve_impedance(ensemble, opts),
    }
}

/// `u_e` at arbitrary points; warns for points near a body.
pub fn evaluate_field(solution: &DiscreteFieldSolution, points: &[Vector3<f64>]) -> Vec<C64> {
    solution.evaluate(points)
}

/// Far-field scattering amplitude in each direction.
pub fn cross_section(solution: &DiscreteFieldSolution, directions: &[Vector3<f64>]) -> Vec<C64> {
    solution.far_field(directions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_ensemble, BodyTemplate, Physics};
    use crate::grid::Region;
    use crate::green::helmholtz;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn region() -> Region {
        Region::centered_cube(20.0).unwrap()
    }

    fn ensemble(kind: BoundaryKind, k: f64, bodies: &[(Vector3<f64>, BodyTemplate)]) -> ParticleEnsemble {
        let phys = Physics::new(kind, k, Vector3::new(0.0, 0.0, 1.0)).unwrap();
        ParticleEnsemble::new(bodies.iter().map(|(p, t)| t.at(*p)).collect(), phys, region()).unwrap()
    }

    fn opts() -> DiscreteOptions {
        DiscreteOptions::default()
    }

    #[test]
    fn empty_ensemble_returns_incident_wave() {
        for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Impedance] {
            let e = ensemble(kind, 1.0, &[]);
            let sol = solve_discrete(&e, &opts()).unwrap();
            assert!(sol.is_empty());
            let x = Vector3::new(0.3, -1.0, 2.0);
            assert_eq!(sol.evaluate(&[x])[0], plane_wave(1.0, &Vector3::z(), &x));
        }
    }

    #[test]
    fn single_soft_body() {
        let t = BodyTemplate::sphere(0.01);
        let s = Vector3::new(0.2, 0.1, 0.7);
        let e = ensemble(BoundaryKind::Dirichlet, 2.0, &[(s, t.clone())]);
        let sol = solve_dirichlet(&e, &opts()).unwrap();
        let u0 = plane_wave(2.0, &Vector3::z(), &s);
        assert_eq!(sol.u[0], u0);
        assert!((sol.charges[0] + t.capacitance * u0).norm() < 1e-15);
        let x = s + Vector3::new(1.0, 2.0, 2.0);
        let expected = plane_wave(2.0, &Vector3::z(), &x) - helmholtz(2.0, 3.0) * t.capacitance * u0;
        assert!((sol.evaluate(&[x])[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn two_soft_bodies_match_hand_solved_system() {
        let k = 1.3;
        let t1 = BodyTemplate::sphere(0.05);
        let t2 = BodyTemplate::sphere(0.08);
        let s1 = Vector3::new(-0.5, 0.0, 0.2);
        let s2 = Vector3::new(0.5, 0.0, -0.2);
        let e = ensemble(BoundaryKind::Dirichlet, k, &[(s1, t1.clone()), (s2, t2.clone())]);
        let sol = solve_dirichlet(&e, &opts()).unwrap();
        // [1, gC2; gC1, 1] u = u0 by Cramer's rule
        let r = (s1 - s2).norm();
        let g = (I * k * r).exp() / (4.0 * PI * r);
        let (a12, a21) = (g * t2.capacitance, g * t1.capacitance);
        let (b1, b2) = ((I * k * s1.z).exp(), (I * k * s2.z).exp());
        let det = 1.0 - a12 * a21;
        let u1 = (b1 - a12 * b2) / det;
        let u2 = (b2 - a21 * b1) / det;
        assert!((sol.u[0] - u1).norm() < 1e-12);
        assert!((sol.u[1] - u2).norm() < 1e-12);
        assert!(sol.report.relative_residual < 1e-10);
    }

    #[test]
    fn coincident_bodies_are_singular() {
        let t = BodyTemplate::sphere(0.01);
        let e = ensemble(BoundaryKind::Dirichlet, 1.0, &[(Vector3::zeros(), t.clone()), (Vector3::zeros(), t)]);
        assert!(matches!(solve_dirichlet(&e, &opts()), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn wrong_boundary_is_rejected() {
        let e = ensemble(BoundaryKind::Neumann, 1.0, &[]);
        assert!(matches!(solve_dirichlet(&e, &opts()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_hard_body_strength() {
        let k = 0.7;
        let t = BodyTemplate::sphere(0.02);
        let s = Vector3::new(0.1, 0.2, 0.3);
        let e = ensemble(BoundaryKind::Neumann, k, &[(s, t.clone())]);
        let sol = solve_neumann(&e, &opts()).unwrap();
        let u0 = plane_wave(k, &Vector3::z(), &s);
        let nu = Vector3::z();
        assert_eq!(sol.u[0], u0);
        let forward = sol.strength(0, &nu);
        let expected = 0.5 * k * k * t.volume * u0;
        assert!((forward - expected).norm() < 1e-15 * expected.norm().max(1.0));
        let n = Vector3::new(1.0, -2.0, 0.5).normalize();
        let general = -k * k * t.volume * u0 * (1.0 + (n.transpose() * t.beta * nu)[0]);
        assert!((sol.strength(0, &n) - general).norm() < 1e-15);
    }

    #[test]
    fn hard_gradient_equations_match_finite_differences() {
        let k = 1.1;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut bodies = Vec::new();
        for i in 0..4 {
            let mut t = BodyTemplate::sphere(0.2);
            t.beta = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            bodies.push((Vector3::new(i as f64, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)), t));
        }
        let e = ensemble(BoundaryKind::Neumann, k, &bodies);
        let sol = solve_neumann(&e, &opts()).unwrap();
        // u and ∇u at body m are u_0 plus the other bodies' fields
        let h = 1e-5;
        for m in 0..4 {
            let others = DiscreteFieldSolution {
                positions: sol.positions.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, p)| *p).collect(),
                charges: sol.charges.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, p)| *p).collect(),
                dipoles: Some(sol.dipoles.as_ref().unwrap().iter().enumerate().filter(|&(j, _)| j != m).map(|(_, p)| *p).collect()),
                ..sol.clone()
            };
            let s = sol.positions[m];
            assert!((others.evaluate(&[s])[0] - sol.u[m]).norm() < 1e-12);
            for l in 0..3 {
                let mut e = Vector3::zeros();
                e[l] = h;
                let v = others.evaluate(&[s + e, s - e]);
                let fd = (v[0] - v[1]) / (2.0 * h);
                assert!((fd - sol.grad_u.as_ref().unwrap()[m][l]).norm() < 1e-7, "{fd} vs {}", sol.grad_u.as_ref().unwrap()[m][l]);
            }
        }
    }

    #[test]
    fn impedance_limits() {
        let mut t = BodyTemplate::sphere(0.05);
        let pts: Vec<_> = (0..5).map(|i| Vector3::new(i as f64 * 0.9, 0.3 * i as f64, -0.2)).collect();
        t.h = 0.0;
        let e0 = ensemble(BoundaryKind::Impedance, 1.0, &pts.iter().map(|p| (*p, t.clone())).collect::<Vec<_>>());
        let s0 = solve_impedance(&e0, &opts()).unwrap();
        for (u, p) in s0.u.iter().zip(&pts) {
            assert_eq!(*u, plane_wave(1.0, &Vector3::z(), p));
        }
        t.h = 1e12;
        let einf = ensemble(BoundaryKind::Impedance, 1.0, &pts.iter().map(|p| (*p, t.clone())).collect::<Vec<_>>());
        let si = solve_impedance(&einf, &opts()).unwrap();
        let sd = solve_dirichlet(&einf.with_boundary(BoundaryKind::Dirichlet), &opts()).unwrap();
        let diff: f64 = si.u.iter().zip(&sd.u).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let nrm: f64 = sd.u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / nrm < 1e-6);
    }

    #[test]
    fn gmres_path_matches_dense() {
        let t = BodyTemplate::sphere(0.02);
        let phys = Physics::new(BoundaryKind::Neumann, 1.5, Vector3::new(1.0, 1.0, 0.0)).unwrap();
        let e = sample_ensemble(Region::centered_cube(4.0).unwrap(), 30, 0.5, &t, phys, 9).unwrap();
        let dense = solve_discrete(&e, &opts()).unwrap();
        let iter = solve_discrete(&e, &DiscreteOptions { dense_limit: 0, ..opts() }).unwrap();
        assert_eq!(iter.report.method, crate::linalg::SolverKind::Gmres);
        for (a, b) in dense.u.iter().zip(&iter.u) {
            assert!((a - b).norm() < 1e-9);
        }
        let soft = e.with_boundary(BoundaryKind::Dirichlet);
        let dense = solve_discrete(&soft, &opts()).unwrap();
        let iter = solve_discrete(&soft, &DiscreteOptions { dense_limit: 0, ..opts() }).unwrap();
        for (a, b) in dense.u.iter().zip(&iter.u) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn far_field_of_single_soft_body_is_isotropic() {
        let t = BodyTemplate::sphere(0.01);
        let e = ensemble(BoundaryKind::Dirichlet, 1.0, &[(Vector3::zeros(), t.clone())]);
        let sol = solve_dirichlet(&e, &opts()).unwrap();
        let dirs = [Vector3::x(), Vector3::y(), -Vector3::z(), Vector3::new(1.0, 1.0, 1.0)];
        for a in sol.far_field(&dirs) {
            assert!((a + t.capacitance / (4.0 * PI)).norm() < 1e-15);
        }
        let hard = solve_neumann(&e.with_boundary(BoundaryKind::Neumann), &opts()).unwrap();
        let amps = hard.far_field(&[Vector3::z(), -Vector3::z()]);
        assert!((amps[0] - amps[1]).norm() > 0.1 * amps[0].norm());
    }

    #[test]
    fn far_field_matches_distant_evaluation() {
        let k = 2.0;
        let t = BodyTemplate::sphere(0.02);
        let e = ensemble(BoundaryKind::Dirichlet, k, &[(Vector3::new(0.3, 0.0, 0.0), t.clone()), (Vector3::new(-0.4, 0.2, 0.1), t)]);
        let sol = solve_dirichlet(&e, &opts()).unwrap();
        let r = 1e3 * 2.0 * PI / k;
        for n in [Vector3::x(), Vector3::new(0.3, -0.5, 0.8).normalize(), -Vector3::z()] {
            let x = n * r;
            let near = (sol.evaluate(&[x])[0] - sol.incident(&x)) * r * (-I * k * r).exp();
            let far = sol.far_field(&[n])[0];
            assert!((near - far).norm() < 1e-3 * far.norm());
        }
    }

    #[test]
    fn scattered_field_decays_like_one_over_r() {
        let k = 3.0;
        let t = BodyTemplate::sphere(0.02);
        let e = ensemble(BoundaryKind::Dirichlet, k, &[(Vector3::new(0.3, 0.0, 0.0), t.clone()), (Vector3::new(-0.4, 0.2, 0.1), t)]);
        let sol = solve_dirichlet(&e, &opts()).unwrap();
        let n = Vector3::new(0.2, 0.9, 0.1).normalize();
        let r = 2000.0;
        let scat = |x: Vector3<f64>| (sol.evaluate(&[x])[0] - sol.incident(&x)).norm();
        let ratio = scat(n * r) / scat(n * 2.0 * r);
        assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn soft_reciprocity() {
        let t = BodyTemplate::sphere(0.1);
        for seed in 0..3 {
            let phys = Physics::new(BoundaryKind::Dirichlet, 1.0, Vector3::z()).unwrap();
            let e = sample_ensemble(Region::centered_cube(4.0).unwrap(), 5, 1.0, &t, phys, seed).unwrap();
            let nu = Vector3::new(0.2, -0.3, 0.9).normalize();
            let n = Vector3::new(-0.7, 0.1, 0.4).normalize();
            let mut fwd = e.clone();
            fwd.physics.direction = nu;
            let mut back = e.clone();
            back.physics.direction = -n;
            let a = solve_dirichlet(&fwd, &opts()).unwrap().far_field(&[n])[0];
            let b = solve_dirichlet(&back, &opts()).unwrap().far_field(&[-nu])[0];
            assert!((a - b).norm() < 1e-6 * a.norm());
        }
    }

    #[test]
    fn hard_scattering_is_weaker_by_ka_squared() {
        let a = 0.01;
        let k = 0.01 / a;
        let t = BodyTemplate::sphere(a);
        let e = ensemble(BoundaryKind::Dirichlet, k, &[(Vector3::zeros(), t)]);
        let soft = solve_dirichlet(&e, &opts()).unwrap();
        let hard = solve_neumann(&e.with_boundary(BoundaryKind::Neumann), &opts()).unwrap();
        let n = Vector3::new(1.0, 0.0, 0.0);
        let ratio = hard.strength(0, &n).norm() / soft.strength(0, &n).norm();
        assert!(ratio < 10.0 * (k * a).powi(2));
    }

    #[test]
    fn removing_a_body_perturbs_linearly_in_its_capacitance() {
        let k = 1.0;
        let t = BodyTemplate::sphere(0.02);
        let mut bodies: Vec<_> = (0..4).map(|i| (Vector3::new(i as f64, 0.0, 0.0), t.clone())).collect();
        let probe = Vector3::new(-5.0, 3.0, 1.0);
        let without = solve_dirichlet(&ensemble(BoundaryKind::Dirichlet, k, &bodies), &opts()).unwrap().evaluate(&[probe])[0];
        let mut deltas = Vec::new();
        for c in [1e-2, 5e-3, 2.5e-3] {
            let mut extra = t.clone();
            extra.capacitance = c;
            bodies.push((Vector3::new(1.5, 2.0, 0.0), extra));
            let with = solve_dirichlet(&ensemble(BoundaryKind::Dirichlet, k, &bodies), &opts()).unwrap().evaluate(&[probe])[0];
            bodies.pop();
            deltas.push((with - without).norm());
        }
        assert!((deltas[0] / deltas[1] - 2.0).abs() < 1e-2);
        assert!((deltas[1] / deltas[2] - 2.0).abs() < 1e-2);
    }
}
