//! Continuum EM equation `U_e = U_0 + ∫ g S(y, n) U_e dy` on a grid.

use nalgebra::Vector3;
use std::f64::consts::PI;

use super::discrete::EMFieldSolution;
use super::smatrix::EmIncident;
use crate::acoustic::ContinuumOptions;
use crate::ensemble::DensityFields;
use crate::error::{Error, Result};
use crate::green::{helmholtz_em, CMat3, CVec3, C64};
use crate::grid::Grid;
use crate::linalg::SolveReport;
use crate::volume::{Term, VolumeSystem};

/// Gridded `α(y)V(y)` and `β̃(y)V(y)` densities.
#[derive(Debug, Clone)]
pub struct EmDensity {
    pub grid: Grid,
    pub alpha_volume: Vec<CMat3>,
    pub beta_tilde_volume: Vec<CMat3>,
}

impl EmDensity {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            alpha_volume: vec![CMat3::zeros(); grid.len()],
            beta_tilde_volume: vec![CMat3::zeros(); grid.len()],
        }
    }

    pub fn from_fields(fields: &DensityFields) -> Self {
        Self {
            grid: fields.grid,
            alpha_volume: fields.alpha_volume.iter().map(|m| m.map(C64::from)).collect(),
            beta_tilde_volume: fields.beta_tilde_volume.iter().map(|m| m.map(C64::from)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let f = C64::from(factor);
        Self {
            grid: self.grid,
            alpha_volume: self.alpha_volume.iter().map(|m| m * f).collect(),
            beta_tilde_volume: self.beta_tilde_volume.iter().map(|m| m * f).collect(),
        }
    }

    /// Merges 2×2×2 blocks of cells, conserving the integrated densities.
    pub fn coarsened(&self) -> Result<Self> {
        let dims = self.grid.dims;
        if dims.iter().any(|d| d % 2 != 0) {
            return Err(Error::invalid(format!("coarsening needs even dimensions, got {dims:?}")));
        }
        let grid = Grid::new(self.grid.region, dims.map(|d| d / 2))?;
        let mut out = Self::zeros(grid);
        for idx in 0..self.grid.len() {
            let [i, j, k] = self.grid.unravel(idx);
            let c = grid.index(i / 2, j / 2, k / 2);
            out.alpha_volume[c] += self.alpha_volume[idx] / C64::from(8.0);
            out.beta_tilde_volume[c] += self.beta_tilde_volume[idx] / C64::from(8.0);
        }
        Ok(out)
    }

    fn is_empty_cell(&self, i: usize) -> bool {
        self.alpha_volume[i].iter().chain(self.beta_tilde_volume[i].iter()).all(|v| *v == C64::new(0.0, 0.0))
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Component index of `g n_i n_j`.
fn nn(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    4 + match (a, b) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

fn system(density: &EmDensity, incident: &EmIncident) -> VolumeSystem {
    let k = incident.wavenumber;
    let consts = incident.constants;
    let dv = density.grid.cell_volume();
    let c = C64::from(k * k / (4.0 * PI));
    let mut terms = Vec::new();
    let mut push = |out: usize, src: usize, comp: usize, coef: C64| {
        if coef != C64::new(0.0, 0.0) {
            terms.push(Term { out, src, comp, coef });
        }
    };
    // sources 0..3: αV E, 3..6: β̃V H
    for i in 0..3 {
        push(i, i, 0, c);
        push(3 + i, 3 + i, 0, c * consts.mu0);
        for j in 0..3 {
            push(i, j, nn(i, j), -c);
            push(3 + i, 3 + j, nn(i, j), -c * consts.mu0);
            for l in 0..3 {
                let e = levi_civita(i, j, l);
                push(i, 3 + l, 1 + j, -c * consts.magnetic_coupling() * e);
                push(3 + i, l, 1 + j, c * consts.admittance() * e);
            }
        }
    }
    let local = (0..density.grid.len())
        .map(|idx| {
            if density.is_empty_cell(idx) {
                return None;
            }
            let mut l = vec![C64::new(0.0, 0.0); 36];
            for p in 0..3 {
                for q in 0..3 {
                    l[p * 6 + q] = density.alpha_volume[idx][(p, q)] * dv;
                    l[(3 + p) * 6 + 3 + q] = density.beta_tilde_volume[idx][(p, q)] * dv;
                }
            }
            Some(l)
        })
        .collect();
    VolumeSystem {
        grid: density.grid,
        block: 6,
        sources: 6,
        components: 10,
        kernel: Box::new(move |d, out| {
            let r = d.norm();
            let g = helmholtz_em(k, r);
            let n = d / r;
            out[0] = g;
            for i in 0..3 {
                out[1 + i] = g * n[i];
                for j in i..3 {
                    out[nn(i, j)] = g * n[i] * n[j];
                }
            }
        }),
        self_values: vec![C64::new(0.0, 0.0); 10],
        terms,
        local,
    }
}

fn incident_vector(grid: &Grid, incident: &EmIncident) -> Vec<C64> {
    grid.centers()
        .iter()
        .flat_map(|x| {
            let (e, h) = incident.fields(x);
            [e[0], e[1], e[2], h[0], h[1], h[2]]
        })
        .collect()
}

fn notes() -> Vec<String> {
    vec![
        "kernel e^{ikr}/r without the 1/(4 pi) factor of the acoustic kernel".into(),
        "self-cell coupling set to zero".into(),
    ]
}

/// Nyström solve with six unknowns per node.
pub fn solve_em_continuum(density: &EmDensity, incident: &EmIncident, opts: &ContinuumOptions) -> Result<EMFieldSolution> {
    let sys = system(density, incident);
    let rhs = incident_vector(&density.grid, incident);
    let (x, report) = sys.solve(&rhs, opts.dense_limit, &opts.gmres)?;
    Ok(EMFieldSolution::from_grid(density.grid.centers(), *incident, &x, report, notes()))
}

/// First Neumann-series term `U_0 + K L U_0`.
pub fn born_em_continuum(density: &EmDensity, incident: &EmIncident) -> Result<EMFieldSolution> {
    let sys = system(density, incident);
    let rhs = incident_vector(&density.grid, incident);
    let x: Vec<C64> = rhs.iter().zip(sys.scatter(&rhs)).map(|(a, b)| a + b).collect();
    Ok(EMFieldSolution::from_grid(density.grid.centers(), *incident, &x, SolveReport::trivial(), notes()))
}

/// Total `(E, H)` at arbitrary points from a grid solution.
pub fn evaluate_em_continuum(
    solution: &EMFieldSolution,
    density: &EmDensity,
    points: &[Vector3<f64>],
) -> Result<Vec<(CVec3, CVec3)>> {
    if solution.len() != density.grid.len() {
        return Err(Error::invalid("solution and density grids differ"));
    }
    let sys = system(density, &solution.incident);
    let s = sys.scatter_at(&solution.packed(), points);
    Ok(points
        .iter()
        .zip(s.chunks(6))
        .map(|(p, v)| {
            let (e0, h0) = solution.incident.fields(p);
            (e0 + CVec3::new(v[0], v[1], v[2]), h0 + CVec3::new(v[3], v[4], v[5]))
        })
        .collect())
}

/// Relative change of the nodal solution when the grid is coarsened by two,
/// the coarse field being evaluated at the fine nodes.
pub fn em_refinement_sensitivity(density: &EmDensity, incident: &EmIncident, opts: &ContinuumOptions) -> Result<f64> {
    let fine = solve_em_continuum(density, incident, opts)?;
    let coarse_density = density.coarsened()?;
    let coarse = solve_em_continuum(&coarse_density, incident, opts)?;
    let at_fine = evaluate_em_continuum(&coarse, &coarse_density, &fine.sites)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (e, h)) in at_fine.iter().enumerate() {
        let (e0, h0) = incident.fields(&fine.sites[i]);
        num += (e - fine.e[i]).norm_squared() + (h - fine.h[i]).norm_squared();
        den += (fine.e[i] - e0).norm_squared() + (fine.h[i] - h0).norm_squared();
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { 0.0 })
}
