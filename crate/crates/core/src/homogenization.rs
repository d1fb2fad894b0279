//! Discrete-versus-continuum comparison for soft bodies.
//!
//! Bodies are sampled with a density proportional to a target `C(y)` and all
//! carry the capacitance `∫C / J`, so their local sums approach `C(y) dy`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::acoustic::{evaluate_continuum, solve_dirichlet, solve_soft, ContinuumOptions, DiscreteOptions};
use crate::ensemble::{
    sample_ensemble_stratified, sample_ensemble_with_density, BodyTemplate, BoundaryKind, DensityFields, ParticleEnsemble, Physics,
};
use crate::error::{Error, Result};
use crate::green::C64;
use crate::grid::{Grid, Region};

/// Target capacitance density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityProfile {
    /// `a (1 − |y − c|²/R²)²` inside the ball of radius `R`.
    Bump {
        amplitude: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    /// `a` on the whole region.
    Uniform { amplitude: f64 },
}

impl DensityProfile {
    pub fn validate(&self, region: &Region) -> Result<()> {
        match *self {
            DensityProfile::Bump { amplitude, radius, center } => {
                if !(amplitude >= 0.0 && radius > 0.0) {
                    return Err(Error::invalid("bump density needs amplitude >= 0 and radius > 0"));
                }
                let c = Vector3::from(center);
                for a in 0..3 {
                    if c[a] - radius < region.min[a] || c[a] + radius > region.max[a] {
                        return Err(Error::invalid("bump density must lie inside the region"));
                    }
                }
            }
            DensityProfile::Uniform { amplitude } => {
                if !(amplitude >= 0.0) {
                    return Err(Error::invalid("uniform density needs amplitude >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Profile normalized to a maximum of 1.
    pub fn shape(&self, y: &Vector3<f64>) -> f64 {
        match *self {
            DensityProfile::Bump { radius, center, .. } => {
                let t = (y - Vector3::from(center)).norm_squared() / (radius * radius);
                if t < 1.0 {
                    (1.0 - t).powi(2)
                } else {
                    0.0
                }
            }
            DensityProfile::Uniform { .. } => 1.0,
        }
    }

    pub fn value(&self, y: &Vector3<f64>) -> f64 {
        let a = match *self {
            DensityProfile::Bump { amplitude, .. } | DensityProfile::Uniform { amplitude } => amplitude,
        };
        a * self.shape(y)
    }

    /// `∫_R C(y) dy`.
    pub fn integral(&self, region: &Region) -> f64 {
        match *self {
            DensityProfile::Bump { amplitude, radius, .. } => amplitude * 4.0 * PI * radius.powi(3) * 8.0 / 105.0,
            DensityProfile::Uniform { amplitude } => amplitude * region.volume(),
        }
    }

    /// Largest distance from the profile's support centre at which `C` is nonzero.
    pub fn support_radius(&self) -> Option<(Vector3<f64>, f64)> {
        match *self {
            DensityProfile::Bump { radius, center, .. } => Some((Vector3::from(center), radius)),
            DensityProfile::Uniform { .. } => None,
        }
    }

    pub fn fields(&self, grid: Grid) -> DensityFields {
        DensityFields::from_capacitance_fn(grid, |y| self.value(y))
    }
}

/// One comparison run.
#[derive(Debug, Clone)]
pub struct CompareSpec {
    pub region: Region,
    pub profile: DensityProfile,
    pub count: usize,
    pub realizations: usize,
    pub seed: u64,
    pub min_separation: f64,
    /// Stratified sampling cells; `None` for plain dart throwing.
    pub strata: Option<[usize; 3]>,
    pub grid: [usize; 3],
    pub wavenumber: f64,
    pub direction: Vector3<f64>,
    pub probes: Vec<Vector3<f64>>,
    pub discrete: DiscreteOptions,
    pub continuum: ContinuumOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub count: usize,
    pub realizations: usize,
    pub seeds: Vec<u64>,
    pub body_capacitance: f64,
    pub probes: usize,
    /// `‖ū_discrete − u_continuum‖ / ‖u_continuum‖` over the probes.
    pub relative_l2: f64,
    /// Same distance divided by `‖u_continuum − u_0‖`.
    pub relative_l2_scattered: f64,
    pub max_discrete_residual: f64,
    pub continuum_residual: f64,
    pub averaged: Vec<C64>,
    pub continuum: Vec<C64>,
}

/// Soft-body template with capacitance `c`; other properties are unused.
pub fn point_template(capacitance: f64) -> BodyTemplate {
    BodyTemplate {
        capacitance,
        volume: 0.0,
        area: 0.0,
        radius: capacitance / (4.0 * PI),
        beta: Matrix3::zeros(),
        h: 0.0,
        alpha: None,
        beta_tilde: None,
    }
}

/// Seeds of the realizations of a run with base seed `seed`.
pub fn realization_seeds(seed: u64, realizations: usize) -> Vec<u64> {
    (0..realizations as u64).map(|r| seed.wrapping_mul(100).wrapping_add(r)).collect()
}

/// The sampled ensembles of a comparison run.
pub fn sample_realizations(spec: &CompareSpec) -> Result<Vec<ParticleEnsemble>> {
    spec.profile.validate(&spec.region)?;
    if spec.count == 0 {
        return Err(Error::invalid("comparison needs at least one body"));
    }
    let template = point_template(spec.profile.integral(&spec.region) / spec.count as f64);
    let physics = Physics::new(BoundaryKind::Dirichlet, spec.wavenumber, spec.direction)?;
    let shape = |y: &Vector3<f64>| spec.profile.shape(y);
    realization_seeds(spec.seed, spec.realizations)
        .into_iter()
        .map(|s| match spec.strata {
            Some(strata) => {
                sample_ensemble_stratified(spec.region, spec.count, spec.min_separation, &template, physics, s, strata, shape)
            }
            None => sample_ensemble_with_density(spec.region, spec.count, spec.min_separation, &template, physics, s, shape),
        })
        .collect()
}

/// Continuum soft solution evaluated at the probes, with its solver residual.
pub fn continuum_at_probes(spec: &CompareSpec) -> Result<(Vec<C64>, f64)> {
    let fields = spec.profile.fields(Grid::new(spec.region, spec.grid)?);
    let sol = solve_soft(&fields, spec.wavenumber, &spec.direction, &spec.continuum)?;
    Ok((evaluate_continuum(&sol, &fields, &spec.probes)?, sol.report.relative_residual))
}

/// Seed-averaged discrete field against the continuum solution at the probes.
pub fn compare_discrete_continuum(spec: &CompareSpec) -> Result<CompareReport> {
    if spec.realizations == 0 || spec.probes.is_empty() {
        return Err(Error::invalid("comparison needs realizations and probe points"));
    }
    let (continuum, continuum_residual) = continuum_at_probes(spec)?;
    compare_against(spec, &continuum, continuum_residual)
}

/// As [`compare_discrete_continuum`] with a precomputed continuum field.
pub fn compare_against(spec: &CompareSpec, continuum: &[C64], continuum_residual: f64) -> Result<CompareReport> {
    if continuum.len() != spec.probes.len() {
        return Err(Error::invalid("continuum values do not match the probes"));
    }
    let ensembles = sample_realizations(spec)?;
    let mut averaged = vec![C64::new(0.0, 0.0); spec.probes.len()];
    let mut max_res: f64 = 0.0;
    let w = 1.0 / spec.realizations as f64;
    for e in &ensembles {
        let s = solve_dirichlet(e, &spec.discrete)?;
        max_res = max_res.max(s.report.relative_residual);
        for (a, v) in averaged.iter_mut().zip(s.evaluate(&spec.probes)) {
            *a += v * w;
        }
    }
    let nu = spec.direction.normalize();
    let dist: f64 = averaged.iter().zip(continuum).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let norm: f64 = continuum.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let scattered: f64 = continuum
        .iter()
        .zip(&spec.probes)
        .map(|(v, p)| (v - crate::green::plane_wave(spec.wavenumber, &nu, p)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(CompareReport {
        count: spec.count,
        realizations: spec.realizations,
        seeds: realization_seeds(spec.seed, spec.realizations),
        body_capacitance: ensembles[0].bodies.first().map(|b| b.capacitance).unwrap_or(0.0),
        probes: spec.probes.len(),
        relative_l2: dist / norm,
        relative_l2_scattered: if scattered > 0.0 { dist / scattered } else { f64::INFINITY },
        max_discrete_residual: max_res,
        continuum_residual,
        averaged,
        continuum: continuum.to_vec(),
    })
}

/// Cell centres of a `dims` lattice over the region lying farther than
/// `min_radius` from `center`.
pub fn probe_lattice(region: &Region, dims: [usize; 3], center: &Vector3<f64>, min_radius: f64) -> Result<Vec<Vector3<f64>>> {
    Ok(Grid::new(*region, dims)?
        .centers()
        .into_iter()
        .filter(|p| (p - center).norm() > min_radius)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_integral_matches_quadrature() {
        let region = Region::centered_cube(4.0).unwrap();
        let p = DensityProfile::Bump { amplitude: 0.7, radius: 1.5, center: [0.2, 0.0, -0.1] };
        p.validate(&region).unwrap();
        let f = p.fields(Grid::new(region, [60; 3]).unwrap());
        let q = f.total(&f.capacitance);
        assert!((q / p.integral(&region) - 1.0).abs() < 1e-3, "{q}");
        let off = DensityProfile::Bump { amplitude: 0.7, radius: 1.5, center: [1.0, 0.0, 0.0] };
        assert!(off.validate(&region).is_err());
    }

    #[test]
    fn realizations_use_the_mean_capacitance() {
        let region = Region::centered_cube(4.0).unwrap();
        let profile = DensityProfile::Uniform { amplitude: 0.01 };
        let spec = CompareSpec {
            region,
            profile,
            count: 20,
            realizations: 2,
            seed: 3,
            min_separation: 0.1,
            strata: Some([2, 2, 2]),
            grid: [4; 3],
            wavenumber: 0.5,
            direction: Vector3::z(),
            probes: vec![Vector3::new(0.0, 0.0, 10.0)],
            discrete: DiscreteOptions::default(),
            continuum: ContinuumOptions::default(),
        };
        let e = sample_realizations(&spec).unwrap();
        assert_eq!(e.len(), 2);
        assert_ne!(e[0].positions(), e[1].positions());
        let total: f64 = e[0].bodies.iter().map(|b| b.capacitance).sum();
        assert!((total - profile.integral(&region)).abs() < 1e-12);
        let r = compare_discrete_continuum(&spec).unwrap();
        assert!(r.relative_l2 < 1e-3 && r.relative_l2_scattered.is_finite());
    }
}
