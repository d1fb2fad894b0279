//! Nyström solvers for the continuum self-consistent field equations.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::ensemble::DensityFields;
use crate::error::{Error, Result};
use crate::green::{ball_dipole_gradient_integral, ball_integral, equivalent_radius, plane_wave, CVec3, KernelPoint, C64};
use crate::grid::Grid;
use crate::linalg::{GmresOptions, SolveReport};
use crate::volume::{Term, VolumeSystem};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Which continuum equation is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuumProblem {
    /// Density `C(y)`.
    Soft,
    /// Density `b(y)`.
    Impedance,
    /// Densities `V(y)` and `β(y)V(y)`, unknowns `u` and `∇u`.
    Hard,
}

#[derive(Debug, Clone, Copy)]
pub struct ContinuumOptions {
    /// Largest number of unknowns solved by dense LU.
    pub dense_limit: usize,
    pub gmres: GmresOptions,
}

impl Default for ContinuumOptions {
    fn default() -> Self {
        Self {
            dense_limit: 1000,
            gmres: GmresOptions {
                tolerance: 1e-10,
                restart: 80,
                max_iterations: 3000,
            },
        }
    }
}

/// Self-consistent field at the grid nodes.
#[derive(Debug, Clone, Serialize)]
pub struct GridFieldSolution {
    pub grid: Grid,
    pub problem: ContinuumProblem,
    pub wavenumber: f64,
    pub direction: Vector3<f64>,
    pub u: Vec<C64>,
    pub grad_u: Option<Vec<CVec3>>,
    pub report: SolveReport,
    pub notes: Vec<String>,
}

impl GridFieldSolution {
    pub fn incident(&self, x: &Vector3<f64>) -> C64 {
        plane_wave(self.wavenumber, &self.direction, x)
    }
}

fn check_physics(k: f64, nu: &Vector3<f64>) -> Result<Vector3<f64>> {
    if !(k > 0.0) {
        return Err(Error::invalid("wavenumber must be positive"));
    }
    let n = nu.norm();
    if !(n > 0.0) {
        return Err(Error::invalid("incident direction must be nonzero"));
    }
    Ok(nu / n)
}

fn check_nonnegative(name: &str, v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !(*x >= 0.0)) {
        return Err(Error::invalid(format!("{name} must be non-negative, cell {i} has {}", v[i])));
    }
    Ok(())
}

fn monopole_system(grid: Grid, k: f64, weight: &[f64]) -> VolumeSystem {
    let dv = grid.cell_volume();
    VolumeSystem {
        grid,
        block: 1,
        sources: 1,
        components: 1,
        kernel: Box::new(move |d, out| out[0] = KernelPoint::acoustic(k, d).g),
        self_values: vec![ball_integral(k, equivalent_radius(dv)) / dv],
        terms: vec![Term {
            out: 0,
            src: 0,
            comp: 0,
            coef: C64::new(1.0, 0.0),
        }],
        local: weight.iter().map(|&c| (c != 0.0).then(|| vec![C64::new(-c * dv, 0.0)])).collect(),
    }
}

fn hard_system(grid: Grid, k: f64, volume: &[f64], beta_volume: &[Matrix3<f64>]) -> VolumeSystem {
    let dv = grid.cell_volume();
    let radius = equivalent_radius(dv);
    // components: g | g n_p | ∂_l g | ∂_l(g n_p) at 7 + 3l + p
    let mut self_values = vec![C64::new(0.0, 0.0); 16];
    self_values[0] = ball_integral(k, radius) / dv;
    for l in 0..3 {
        self_values[7 + 4 * l] = ball_dipole_gradient_integral(k, radius) / dv;
    }
    let one = C64::new(1.0, 0.0);
    let mut terms = vec![Term { out: 0, src: 0, comp: 0, coef: one }];
    for p in 0..3 {
        terms.push(Term { out: 0, src: 1 + p, comp: 1 + p, coef: one });
    }
    for l in 0..3 {
        terms.push(Term { out: 1 + l, src: 0, comp: 4 + l, coef: one });
        for p in 0..3 {
            terms.push(Term { out: 1 + l, src: 1 + p, comp: 7 + 3 * l + p, coef: one });
        }
    }
    let local = volume
        .iter()
        .zip(beta_volume)
        .map(|(&v, bv)| {
            if v == 0.0 && bv.iter().all(|x| *x == 0.0) {
                return None;
            }
            let mut l = vec![C64::new(0.0, 0.0); 16];
            l[0] = C64::new(-k * k * v * dv, 0.0);
            for p in 0..3 {
                for q in 0..3 {
                    l[(1 + p) * 4 + 1 + q] = I * k * dv * bv[(p, q)];
                }
            }
            Some(l)
        })
        .collect();
    VolumeSystem {
        grid,
        block: 4,
        sources: 4,
        components: 16,
        kernel: Box::new(move |d, out| {
            let kp = KernelPoint::acoustic(k, d);
            out[0] = kp.g;
            let grad = kp.gradient();
            let dg = kp.dipole_gradient();
            for a in 0..3 {
                out[1 + a] = kp.g * kp.n[a];
                out[4 + a] = grad[a];
                for p in 0..3 {
                    out[7 + 3 * a + p] = dg[(a, p)];
                }
            }
        }),
        self_values,
        terms,
        local,
    }
}

fn build(fields: &DensityFields, problem: ContinuumProblem, k: f64) -> Result<VolumeSystem> {
    Ok(match problem {
        ContinuumProblem::Soft => {
            check_nonnegative("C(y)", &fields.capacitance)?;
            monopole_system(fields.grid, k, &fields.capacitance)
        }
        ContinuumProblem::Impedance => {
            check_nonnegative("b(y)", &fields.impedance)?;
            monopole_system(fields.grid, k, &fields.impedance)
        }
        ContinuumProblem::Hard => {
            check_nonnegative("V(y)", &fields.volume)?;
            hard_system(fields.grid, k, &fields.volume, &fields.beta_volume)
        }
    })
}

fn incident(grid: &Grid, problem: ContinuumProblem, k: f64, nu: &Vector3<f64>) -> Vec<C64> {
    let mut rhs = Vec::new();
    for x in grid.centers() {
        let u0 = plane_wave(k, nu, &x);
        rhs.push(u0);
        if problem == ContinuumProblem::Hard {
            rhs.extend(nu.iter().map(|&v| I * k * v * u0));
        }
    }
    rhs
}

fn notes(problem: ContinuumProblem) -> Vec<String> {
    match problem {
        ContinuumProblem::Hard => vec![
            "closure: laplacian of u_e replaced by -k^2 u_e".into(),
            "self-cell dipole term set to zero by parity; monopole uses the equal-volume ball".into(),
            "V(y) is treated as a finite density; the hard-body equation is approximate".into(),
        ],
        _ => vec!["self-cell uses the exact Helmholtz integral over the equal-volume ball".into()],
    }
}

fn unpack(
    fields: &DensityFields,
    problem: ContinuumProblem,
    k: f64,
    nu: Vector3<f64>,
    x: Vec<C64>,
    report: SolveReport,
) -> GridFieldSolution {
    let (u, grad_u) = if problem == ContinuumProblem::Hard {
        let u = x.chunks(4).map(|c| c[0]).collect();
        let g = x.chunks(4).map(|c| CVec3::new(c[1], c[2], c[3])).collect();
        (u, Some(g))
    } else {
        (x, None)
    };
    GridFieldSolution {
        grid: fields.grid,
        problem,
        wavenumber: k,
        direction: nu,
        u,
        grad_u,
        report,
        notes: notes(problem),
    }
}

fn pack(solution: &GridFieldSolution) -> Vec<C64> {
    match &solution.grad_u {
        Some(g) => solution
            .u
            .iter()
            .zip(g)
            .flat_map(|(u, g)| [*u, g[0], g[1], g[2]])
            .collect(),
        None => solution.u.clone(),
    }
}

/// Solves the continuum equation for `problem` on the fields' grid.
pub fn solve_continuum(
    fields: &DensityFields,
    problem: ContinuumProblem,
    k: f64,
    nu: &Vector3<f64>,
    opts: &ContinuumOptions,
) -> Result<GridFieldSolution> {
    let nu = check_physics(k, nu)?;
    let sys = build(fields, problem, k)?;
    let rhs = incident(&fields.grid, problem, k, &nu);
    let (x, report) = sys.solve(&rhs, opts.dense_limit, &opts.gmres)?;
    Ok(unpack(fields, problem, k, nu, x, report))
}

/// `u_e = u_0 − ∫ g C u_e`.
pub fn solve_soft(fields: &DensityFields, k: f64, nu: &Vector3<f64>, opts: &ContinuumOptions) -> Result<GridFieldSolution> {
    solve_continuum(fields, ContinuumProblem::Soft, k, nu, opts)
}

/// `u_e = u_0 − ∫ g b u_e`.
pub fn solve_impedance_continuum(fields: &DensityFields, k: f64, nu: &Vector3<f64>, opts: &ContinuumOptions) -> Result<GridFieldSolution> {
    solve_continuum(fields, ContinuumProblem::Impedance, k, nu, opts)
}

/// Hard-body integro-differential equation with `Δu_e = −k²u_e`.
pub fn solve_hard(fields: &DensityFields, k: f64, nu: &Vector3<f64>, opts: &ContinuumOptions) -> Result<GridFieldSolution> {
    solve_continuum(fields, ContinuumProblem::Hard, k, nu, opts)
}

/// First Neumann-series term `u_0 + K L u_0` on the grid.
pub fn born_continuum(fields: &DensityFields, problem: ContinuumProblem, k: f64, nu: &Vector3<f64>) -> Result<GridFieldSolution> {
    let nu = check_physics(k, nu)?;
    let sys = build(fields, problem, k)?;
    let rhs = incident(&fields.grid, problem, k, &nu);
    let s = sys.scatter(&rhs);
    let x = rhs.iter().zip(s).map(|(a, b)| a + b).collect();
    Ok(unpack(fields, problem, k, nu, x, SolveReport::trivial()))
}

/// `u_e` (and `∇u_e` for hard bodies) at arbitrary points by the same quadrature.
pub fn evaluate_continuum(solution: &GridFieldSolution, fields: &DensityFields, points: &[Vector3<f64>]) -> Result<Vec<C64>> {
    let sys = build(fields, solution.problem, solution.wavenumber)?;
    let s = sys.scatter_at(&pack(solution), points);
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| solution.incident(p) + s[i * sys.block])
        .collect())
}

/// `‖(∇²_h + k² − C) u_e‖ / ‖k² u_e‖` over interior nodes, with central differences.
pub fn schrodinger_residual(solution: &GridFieldSolution, fields: &DensityFields) -> Result<f64> {
    let grid = solution.grid;
    if grid.dims.iter().any(|&d| d < 5) {
        return Err(Error::invalid(format!(
            "residual needs at least 5 nodes per axis, grid is {:?}",
            grid.dims
        )));
    }
    if solution.problem != ContinuumProblem::Soft {
        return Err(Error::invalid("the residual is defined for soft-body solutions"));
    }
    let k2 = solution.wavenumber.powi(2);
    let h = grid.spacing();
    let [nx, ny, nz] = grid.dims;
    let u = &solution.u;
    let mut num = 0.0;
    let mut den = 0.0;
    for kk in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let c = grid.index(i, j, kk);
                let lap = (u[grid.index(i + 1, j, kk)] + u[grid.index(i - 1, j, kk)] - 2.0 * u[c]) / (h[0] * h[0])
                    + (u[grid.index(i, j + 1, kk)] + u[grid.index(i, j - 1, kk)] - 2.0 * u[c]) / (h[1] * h[1])
                    + (u[grid.index(i, j, kk + 1)] + u[grid.index(i, j, kk - 1)] - 2.0 * u[c]) / (h[2] * h[2]);
                let r = lap + (k2 - fields.capacitance[c]) * u[c];
                num += r.norm_sqr();
                den += (k2 * u[c]).norm_sqr();
            }
        }
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::discrete::{solve_neumann, DiscreteOptions};
    use crate::ensemble::{bin_densities, sample_ensemble, BodyTemplate, BoundaryKind, ParticleEnsemble, Physics};
    use crate::green::helmholtz;
    use crate::grid::Region;

    fn grid(n: usize, side: f64) -> Grid {
        Grid::new(Region::centered_cube(side).unwrap(), [n; 3]).unwrap()
    }

    fn opts() -> ContinuumOptions {
        ContinuumOptions::default()
    }

    fn rel(a: &[C64], b: &[C64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let n: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (d / n).sqrt()
    }

    fn smooth_fields(n: usize, side: f64, c0: f64) -> DensityFields {
        let r = 0.4 * side;
        DensityFields::from_capacitance_fn(grid(n, side), |y| {
            let t = y.norm_squared() / (r * r);
            if t < 1.0 {
                c0 * (1.0 - t).powi(2)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn zero_density_returns_incident_field() {
        let f = DensityFields::zeros(grid(4, 2.0));
        let nu = Vector3::new(0.0, 1.0, 1.0);
        for problem in [ContinuumProblem::Soft, ContinuumProblem::Impedance, ContinuumProblem::Hard] {
            let s = solve_continuum(&f, problem, 1.3, &nu, &opts()).unwrap();
            for (i, x) in f.grid.centers().iter().enumerate() {
                assert_eq!(s.u[i], s.incident(x));
                if let Some(g) = &s.grad_u {
                    let expect = s.direction.map(|v| I * 1.3 * v * s.incident(x));
                    assert_eq!(g[i], expect);
                }
            }
        }
    }

    #[test]
    fn negative_density_is_rejected() {
        let mut f = DensityFields::zeros(grid(2, 1.0));
        f.capacitance[3] = -1.0;
        assert!(matches!(solve_soft(&f, 1.0, &Vector3::z(), &opts()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn fft_path_matches_dense_path() {
        let mut f = smooth_fields(6, 3.0, 0.8);
        for (i, v) in f.volume.iter_mut().enumerate() {
            *v = 0.01 * f.capacitance[i];
            let beta = Matrix3::new(-1.5, 0.2, 0.0, 0.1, -1.0, 0.3, 0.0, 0.0, -0.7);
            f.beta_volume[i] = beta * *v;
        }
        let nu = Vector3::new(1.0, 0.5, 0.2);
        for problem in [ContinuumProblem::Soft, ContinuumProblem::Hard] {
            let dense = solve_continuum(&f, problem, 2.0, &nu, &opts()).unwrap();
            let fft = solve_continuum(&f, problem, 2.0, &nu, &ContinuumOptions { dense_limit: 0, ..opts() }).unwrap();
            assert!(rel(&fft.u, &dense.u) < 1e-9);
            assert!(fft.report.relative_residual < 1e-8);
        }
    }

    #[test]
    fn single_cell_born_term() {
        let g = grid(5, 5.0);
        let k = 1.2;
        let nu = Vector3::z();
        let center = 2 + 5 * (2 + 5 * 2);
        let x = Vector3::new(4.0, -3.0, 6.0);
        let mut prev = None;
        for c0 in [1e-2, 5e-3, 2.5e-3] {
            let mut f = DensityFields::zeros(g);
            f.capacitance[center] = c0;
            let s = solve_soft(&f, k, &nu, &opts()).unwrap();
            let u = evaluate_continuum(&s, &f, &[x]).unwrap()[0];
            let y0 = g.center(center);
            let born = plane_wave(k, &nu, &x) - helmholtz(k, (x - y0).norm()) * c0 * g.cell_volume() * plane_wave(k, &nu, &y0);
            let err = (u - born).norm();
            if let Some(p) = prev {
                let ratio: f64 = p / err;
                assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
            }
            prev = Some(err);
        }
    }

    #[test]
    fn born_error_is_quadratic_in_density() {
        let nu = Vector3::new(0.0, 0.6, 0.8);
        for problem in [ContinuumProblem::Soft, ContinuumProblem::Impedance, ContinuumProblem::Hard] {
            let mut errs = Vec::new();
            for scale in [1.0, 0.5, 0.25] {
                let mut f = smooth_fields(6, 3.0, 0.4).scaled(scale);
                f.impedance = f.capacitance.clone();
                for i in 0..f.grid.len() {
                    f.set_volume_beta(i, 0.3 * f.capacitance[i], Matrix3::identity() * -1.5);
                }
                let s = solve_continuum(&f, problem, 1.5, &nu, &opts()).unwrap();
                let b = born_continuum(&f, problem, 1.5, &nu).unwrap();
                errs.push(rel(&b.u, &s.u));
            }
            for w in errs.windows(2) {
                assert!((w[0] / w[1] - 4.0).abs() < 0.4, "{problem:?} {errs:?}");
            }
        }
    }

    #[test]
    fn hard_without_beta_reduces_to_soft() {
        let k = 1.7;
        let mut hard = smooth_fields(6, 3.0, 0.0);
        let mut soft = hard.clone();
        for (i, x) in hard.grid.centers().iter().enumerate() {
            let v = 0.2 * (-x.norm_squared()).exp();
            hard.volume[i] = v;
            soft.capacitance[i] = k * k * v;
        }
        let nu = Vector3::new(0.3, 0.0, 1.0);
        for dense_limit in [4096, 0] {
            let o = ContinuumOptions { dense_limit, ..opts() };
            let h = solve_hard(&hard, k, &nu, &o).unwrap();
            let s = solve_soft(&soft, k, &nu, &o).unwrap();
            assert!(rel(&h.u, &s.u) < 1e-8);
        }
    }

    #[test]
    fn hard_single_cell_matches_single_hard_body() {
        let k = 0.9;
        let g = grid(3, 3.0);
        let center = 13;
        let y0 = g.center(center);
        let beta = Matrix3::new(-1.2, 0.1, 0.0, 0.1, -0.8, 0.2, 0.0, 0.2, -1.5);
        let vol = 1e-4;
        let mut f = DensityFields::zeros(g);
        f.set_volume_beta(center, vol / g.cell_volume(), beta);
        let nu = Vector3::new(0.0, 0.0, 1.0);
        let born = born_continuum(&f, ContinuumProblem::Hard, k, &nu).unwrap();
        let x = Vector3::new(5.0, 3.0, -4.0);
        let cont = evaluate_continuum(&born, &f, &[x]).unwrap()[0];
        let mut t = BodyTemplate::sphere(0.01);
        t.volume = vol;
        t.beta = beta;
        let phys = Physics::new(BoundaryKind::Neumann, k, nu).unwrap();
        let e = ParticleEnsemble::new(vec![t.at(y0)], phys, g.region).unwrap();
        let disc = solve_neumann(&e, &DiscreteOptions::default()).unwrap().evaluate(&[x])[0];
        let u0 = plane_wave(k, &nu, &x);
        let (sc, sd) = (cont - u0, disc - u0);
        // the grid Born field keeps the self-cell correction of order k²V r²
        assert!((sc - sd).norm() < 1e-3 * sd.norm(), "{sc} {sd}");
    }

    #[test]
    fn isotropic_beta_sign_flips_asymmetry() {
        let k = 1.0;
        let g = grid(3, 3.0);
        let nu = Vector3::z();
        let mut amps = Vec::new();
        for b in [0.5, -0.5] {
            let mut f = DensityFields::zeros(g);
            f.set_volume_beta(13, 1e-3, Matrix3::identity() * b);
            let s = born_continuum(&f, ContinuumProblem::Hard, k, &nu).unwrap();
            let r = 50.0;
            let pts = [nu * r, -nu * r];
            let v = evaluate_continuum(&s, &f, &pts).unwrap();
            let fwd = (v[0] - plane_wave(k, &nu, &pts[0])).norm();
            let bwd = (v[1] - plane_wave(k, &nu, &pts[1])).norm();
            amps.push(fwd / bwd);
        }
        assert!((amps[0] - 3.0).abs() < 1e-2 && (amps[1] - 1.0 / 3.0).abs() < 1e-2, "{amps:?}");
    }

    #[test]
    fn impedance_limit_matches_soft() {
        let mut t = BodyTemplate::sphere(0.02);
        t.h = 1e12;
        let region = Region::centered_cube(3.0).unwrap();
        let phys = Physics::new(BoundaryKind::Impedance, 1.0, Vector3::z()).unwrap();
        let e = sample_ensemble(region, 200, 0.2, &t, phys, 2).unwrap();
        let f = bin_densities(&e, [6, 6, 6]).unwrap();
        let a = solve_impedance_continuum(&f, 1.0, &Vector3::z(), &opts()).unwrap();
        let b = solve_soft(&f, 1.0, &Vector3::z(), &opts()).unwrap();
        assert!(rel(&a.u, &b.u) < 1e-6);
    }

    #[test]
    fn schrodinger_residual_of_plane_wave() {
        let k = 1.0;
        let mut prev = None;
        for n in [10, 20] {
            let f = DensityFields::zeros(grid(n, 3.0));
            let s = solve_soft(&f, k, &Vector3::new(1.0, 1.0, 0.0), &opts()).unwrap();
            let r = schrodinger_residual(&s, &f).unwrap();
            let kh = k * f.grid.spacing()[0];
            assert!(kh <= 0.3 + 1e-12);
            assert!(r < 1e-2);
            if let Some(p) = prev {
                let ratio: f64 = p / r;
                assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
            }
            prev = Some(r);
        }
        let coarse = DensityFields::zeros(grid(4, 1.0));
        let s = solve_soft(&coarse, k, &Vector3::z(), &opts()).unwrap();
        assert!(schrodinger_residual(&s, &coarse).is_err());
    }
}
