//! Self-consistent `(E, H)` at the sites of many small bodies.

use log::warn;
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use super::smatrix::{complexify, smatrix_unchecked, EmConstants, EmIncident};
use crate::ensemble::{check_regime, ParticleEnsemble, RegimeDiagnostics, RegimeMode, RegimeThresholds};
use crate::error::{Error, Result};
use crate::green::{helmholtz_em, plane_wave, CMat3, CVec3, C64};
use crate::linalg::{gmres, lu_solve, relative_residual, DenseMatrix, GmresOptions, LinearOperator, SolveReport};

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    /// Largest number of unknowns (6 per body) solved by dense LU.
    pub dense_limit: usize,
    pub gmres: GmresOptions,
    pub thresholds: RegimeThresholds,
    /// Solve even when the ensemble is outside the EM regime.
    pub allow_regime_violation: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            gmres: GmresOptions {
                tolerance: 1e-11,
                restart: 100,
                max_iterations: 2000,
            },
            thresholds: RegimeThresholds::default(),
            allow_regime_violation: false,
        }
    }
}

/// Per-body tensors `α` and `β̃`, complex to admit lossy bodies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmTensors {
    pub alpha: CMat3,
    pub beta_tilde: CMat3,
}

impl EmTensors {
    pub fn real(alpha: &Matrix3<f64>, beta_tilde: &Matrix3<f64>) -> Self {
        Self {
            alpha: alpha.map(C64::from),
            beta_tilde: beta_tilde.map(C64::from),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scatterer {
    position: Vector3<f64>,
    volume: f64,
    tensors: EmTensors,
}

/// Whether sites are bodies or grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmSiteKind {
    Bodies,
    GridNodes,
}

/// Self-consistent field `U_e = (E, H)` at bodies or grid nodes.
#[derive(Debug, Clone, Serialize)]
pub struct EMFieldSolution {
    pub sites_kind: EmSiteKind,
    pub sites: Vec<Vector3<f64>>,
    pub incident: EmIncident,
    pub e: Vec<CVec3>,
    pub h: Vec<CVec3>,
    pub report: SolveReport,
    pub regime: Option<RegimeDiagnostics>,
    pub notes: Vec<String>,
    #[serde(skip)]
    scatterers: Vec<Scatterer>,
}

/// Field of the moments induced by `(E, H)` on a body, radiated to offset `d`.
struct Radiator {
    k: f64,
    constants: EmConstants,
}

impl Radiator {
    /// `(a, b) = (k²V/4π) (α E, β̃ H)`.
    fn moments(&self, s: &Scatterer, e: &CVec3, h: &CVec3) -> (CVec3, CVec3) {
        let c = C64::from(self.k * self.k * s.volume / (4.0 * PI));
        (s.tensors.alpha * e * c, s.tensors.beta_tilde * h * c)
    }

    fn radiate(&self, d: &Vector3<f64>, a: &CVec3, b: &CVec3) -> (CVec3, CVec3) {
        let r = d.norm();
        let g = helmholtz_em(self.k, r);
        let n = complexify(&(d / r));
        let ea = a - n * n.dot(a);
        let eb = b - n * n.dot(b);
        let c = &self.constants;
        let e = (ea - n.cross(b) * C64::from(c.magnetic_coupling())) * g;
        let h = (n.cross(a) * C64::from(c.admittance()) + eb * C64::from(c.mu0)) * g;
        (e, h)
    }
}

struct EmFoldyLax<'a> {
    radiator: Radiator,
    scatterers: &'a [Scatterer],
}

impl EmFoldyLax<'_> {
    fn assemble(&self) -> DenseMatrix<C64> {
        let n = 6 * self.scatterers.len();
        let (k, c) = (self.radiator.k, self.radiator.constants);
        DenseMatrix::from_row_blocks(n, n, 6, |m, rows| {
            let sm = self.scatterers[m].position;
            for (j, sj) in self.scatterers.iter().enumerate() {
                if j == m {
                    continue;
                }
                let d = sm - sj.position;
                let r = d.norm();
                let g = helmholtz_em(k, r);
                let s = smatrix_unchecked(&sj.tensors.alpha, &sj.tensors.beta_tilde, sj.volume, &(d / r), k, &c);
                for row in 0..6 {
                    for col in 0..6 {
                        rows[row * n + 6 * j + col] = -g * s.matrix[(row, col)];
                    }
                }
            }
            for r in 0..6 {
                rows[r * n + 6 * m + r] = C64::new(1.0, 0.0);
            }
        })
    }
}

impl LinearOperator<C64> for EmFoldyLax<'_> {
    fn dim(&self) -> usize {
        6 * self.scatterers.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let moments: Vec<(CVec3, CVec3)> = self
            .scatterers
            .iter()
            .zip(x.chunks(6))
            .map(|(s, u)| {
                self.radiator
                    .moments(s, &CVec3::new(u[0], u[1], u[2]), &CVec3::new(u[3], u[4], u[5]))
            })
            .collect();
        y.par_chunks_mut(6).enumerate().for_each(|(m, ym)| {
            let sm = self.scatterers[m].position;
            let mut e = CVec3::zeros();
            let mut h = CVec3::zeros();
            for (j, (s, (a, b))) in self.scatterers.iter().zip(&moments).enumerate() {
                if j != m {
                    let (de, dh) = self.radiator.radiate(&(sm - s.position), a, b);
                    e += de;
                    h += dh;
                }
            }
            for i in 0..3 {
                ym[i] = x[6 * m + i] - e[i];
                ym[3 + i] = x[6 * m + 3 + i] - h[i];
            }
        });
    }
}

fn tensors_of(ensemble: &ParticleEnsemble) -> Result<Vec<EmTensors>> {
    ensemble
        .bodies
        .iter()
        .enumerate()
        .map(|(i, b)| match (b.alpha, b.beta_tilde) {
            (Some(a), Some(bt)) => Ok(EmTensors::real(&a, &bt)),
            _ => Err(Error::invalid(format!("body {i} lacks alpha or beta_tilde"))),
        })
        .collect()
}

fn em_regime(ensemble: &ParticleEnsemble, opts: &EmOptions) -> Result<Option<RegimeDiagnostics>> {
    if ensemble.is_empty() {
        return Ok(None);
    }
    let diag = check_regime(ensemble, RegimeMode::Em, &opts.thresholds)?;
    let violations = diag.violations();
    if !violations.is_empty() {
        if !opts.allow_regime_violation {
            return Err(Error::Regime(violations.join("; ")));
        }
        for v in &violations {
            warn!("EM regime: {v}");
        }
    }
    if ensemble.len() > 1 && !(diag.min_distance > 0.0) {
        return Err(Error::SingularSystem("two bodies share a position".into()));
    }
    Ok(Some(diag))
}

/// Solves `U_m = U_0(s_m) + Σ_{j≠m} g(s_m, s_j) S⁽ʲ⁾(n_mj) U_j` with the
/// tensors stored on the bodies.
pub fn solve_em_discrete(ensemble: &ParticleEnsemble, incident: &EmIncident, opts: &EmOptions) -> Result<EMFieldSolution> {
    let tensors = tensors_of(ensemble)?;
    solve_em_with_tensors(ensemble, &tensors, incident, opts)
}

/// As [`solve_em_discrete`] with explicit (possibly complex) per-body tensors.
pub fn solve_em_with_tensors(
    ensemble: &ParticleEnsemble,
    tensors: &[EmTensors],
    incident: &EmIncident,
    opts: &EmOptions,
) -> Result<EMFieldSolution> {
    if tensors.len() != ensemble.len() {
        return Err(Error::invalid(format!(
            "{} tensor pairs for {} bodies",
            tensors.len(),
            ensemble.len()
        )));
    }
    let regime = em_regime(ensemble, opts)?;
    let scatterers: Vec<Scatterer> = ensemble
        .bodies
        .iter()
        .zip(tensors)
        .map(|(b, t)| Scatterer {
            position: b.position,
            volume: b.volume,
            tensors: *t,
        })
        .collect();
    let mut rhs = Vec::with_capacity(6 * scatterers.len());
    for s in &scatterers {
        let (e, h) = incident.fields(&s.position);
        rhs.extend(e.iter().chain(h.iter()));
    }
    let sys = EmFoldyLax {
        radiator: Radiator {
            k: incident.wavenumber,
            constants: incident.constants,
        },
        scatterers: &scatterers,
    };
    let (x, report) = if rhs.is_empty() {
        (Vec::new(), SolveReport::trivial())
    } else if sys.dim() <= opts.dense_limit {
        let (x, report) = lu_solve(&sys.assemble(), &rhs)?;
        let res = relative_residual(&sys, &x, &rhs);
        (x, SolveReport { relative_residual: res, ..report })
    } else {
        gmres(&sys, &rhs, Some(&rhs), &opts.gmres)?
    };
    let (e, h) = x
        .chunks(6)
        .map(|u| (CVec3::new(u[0], u[1], u[2]), CVec3::new(u[3], u[4], u[5])))
        .unzip();
    Ok(EMFieldSolution {
        sites_kind: EmSiteKind::Bodies,
        sites: scatterers.iter().map(|s| s.position).collect(),
        incident: *incident,
        e,
        h,
        report,
        regime,
        notes: vec!["kernel e^{ikr}/r without the 1/(4 pi) factor of the acoustic kernel".into()],
        scatterers,
    })
}

impl EMFieldSolution {
    pub(crate) fn from_grid(
        sites: Vec<Vector3<f64>>,
        incident: EmIncident,
        x: &[C64],
        report: SolveReport,
        notes: Vec<String>,
    ) -> Self {
        let (e, h) = x
            .chunks(6)
            .map(|u| (CVec3::new(u[0], u[1], u[2]), CVec3::new(u[3], u[4], u[5])))
            .unzip();
        Self {
            sites_kind: EmSiteKind::GridNodes,
            sites,
            incident,
            e,
            h,
            report,
            regime: None,
            notes,
            scatterers: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub(crate) fn packed(&self) -> Vec<C64> {
        self.e.iter().zip(&self.h).flat_map(|(e, h)| e.iter().chain(h.iter()).copied().collect::<Vec<_>>()).collect()
    }

    fn require_bodies(&self) -> Result<()> {
        if self.sites_kind != EmSiteKind::Bodies {
            return Err(Error::invalid("grid solutions are evaluated with evaluate_em_continuum"));
        }
        Ok(())
    }

    /// Scattered pair of every body at `x`.
    fn scattered(&self, radiator: &Radiator, x: &Vector3<f64>) -> (CVec3, CVec3) {
        let mut e = CVec3::zeros();
        let mut h = CVec3::zeros();
        for (j, s) in self.scatterers.iter().enumerate() {
            let (a, b) = radiator.moments(s, &self.e[j], &self.h[j]);
            let (de, dh) = radiator.radiate(&(x - s.position), &a, &b);
            e += de;
            h += dh;
        }
        (e, h)
    }

    fn radiator(&self) -> Radiator {
        Radiator {
            k: self.incident.wavenumber,
            constants: self.incident.constants,
        }
    }

    /// Total `(E, H)` at points away from the bodies.
    pub fn evaluate(&self, points: &[Vector3<f64>]) -> Result<Vec<(CVec3, CVec3)>> {
        self.require_bodies()?;
        let radiator = self.radiator();
        Ok(points
            .par_iter()
            .map(|x| {
                let (e0, h0) = self.incident.fields(x);
                let (e, h) = self.scattered(&radiator, x);
                (e0 + e, h0 + h)
            })
            .collect())
    }

    /// Scattered pair only.
    pub fn evaluate_scattered(&self, points: &[Vector3<f64>]) -> Result<Vec<(CVec3, CVec3)>> {
        self.require_bodies()?;
        let radiator = self.radiator();
        Ok(points.par_iter().map(|x| self.scattered(&radiator, x)).collect())
    }

    /// `lim r e^{−ikr} (E_sc, H_sc)(r n̂)`.
    pub fn far_field(&self, directions: &[Vector3<f64>]) -> Result<Vec<(CVec3, CVec3)>> {
        self.require_bodies()?;
        let radiator = self.radiator();
        let k = self.incident.wavenumber;
        directions
            .iter()
            .map(|d| {
                super::smatrix::check_unit(d, "direction")?;
                let mut e = CVec3::zeros();
                let mut h = CVec3::zeros();
                for (j, s) in self.scatterers.iter().enumerate() {
                    let (a, b) = radiator.moments(s, &self.e[j], &self.h[j]);
                    let phase = plane_wave(k, &(-d), &s.position);
                    // radiate() at unit distance along d carries e^{ik}
                    let (de, dh) = radiator.radiate(d, &a, &b);
                    let scale = phase * (-C64::new(0.0, k)).exp();
                    e += de * scale;
                    h += dh * scale;
                }
                Ok((e, h))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{BodyTemplate, BoundaryKind, Physics};
    use crate::grid::Region;

    fn sphere_template(a: f64, gamma: f64) -> BodyTemplate {
        let alpha = 6.0 * gamma / (3.0 - gamma);
        let mut t = BodyTemplate::sphere(a);
        t.alpha = Some(Matrix3::identity() * alpha);
        t.beta_tilde = Some(t.beta);
        t
    }

    fn ensemble(k: f64, positions: &[Vector3<f64>], t: &BodyTemplate) -> ParticleEnsemble {
        let physics = Physics::new(BoundaryKind::Dirichlet, k, Vector3::z()).unwrap();
        let region = Region::centered_cube(400.0).unwrap();
        ParticleEnsemble::new(positions.iter().map(|p| t.at(*p)).collect(), physics, region).unwrap()
    }

    fn incident(k: f64) -> EmIncident {
        EmIncident::new(k, Vector3::z(), None, EmConstants::default()).unwrap()
    }

    #[test]
    fn empty_ensemble_returns_incident_pair() {
        let inc = incident(1.0);
        let s = solve_em_discrete(&ensemble(1.0, &[], &sphere_template(0.01, 0.5)), &inc, &EmOptions::default()).unwrap();
        assert!(s.is_empty());
        let x = Vector3::new(0.3, 1.0, -2.0);
        let (e, h) = s.evaluate(&[x]).unwrap()[0];
        let (e0, h0) = inc.fields(&x);
        assert_eq!((e, h), (e0, h0));
        assert!((h0 - CVec3::z().map(C64::from).cross(&e0)).norm() < 1e-15);
    }

    #[test]
    fn single_body_sees_the_incident_field() {
        let k = 0.8;
        let t = sphere_template(0.02, 0.4);
        let p = Vector3::new(0.5, -0.2, 0.7);
        let inc = incident(k);
        let s = solve_em_discrete(&ensemble(k, &[p], &t), &inc, &EmOptions::default()).unwrap();
        let (e0, h0) = inc.fields(&p);
        assert!((s.e[0] - e0).norm() < 1e-15 && (s.h[0] - h0).norm() < 1e-15);
        let x = Vector3::new(3.0, 4.0, 12.0);
        let d = x - p;
        let smat = super::super::build_smatrix(&t.alpha.unwrap(), &t.beta_tilde.unwrap(), t.volume, &d.normalize(), k, &EmConstants::default()).unwrap();
        let (se, sh) = smat.apply(&e0, &h0);
        let g = helmholtz_em(k, d.norm());
        let (ee, hh) = s.evaluate_scattered(&[x]).unwrap()[0];
        assert!((ee - se * g).norm() < 1e-15 * ee.norm().max(1e-300) + 1e-18);
        assert!((hh - sh * g).norm() < 1e-15 * hh.norm().max(1e-300) + 1e-18);
    }

    #[test]
    fn regime_violation_is_refused_unless_overridden() {
        let k = 1.0;
        let t = sphere_template(0.01, 0.5);
        let ens = ensemble(k, &[Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)], &t);
        assert!(matches!(solve_em_discrete(&ens, &incident(k), &EmOptions::default()), Err(Error::Regime(_))));
        let opts = EmOptions {
            allow_regime_violation: true,
            ..Default::default()
        };
        assert!(solve_em_discrete(&ens, &incident(k), &opts).is_ok());
    }

    #[test]
    fn missing_tensors_are_reported() {
        let ens = ensemble(1.0, &[Vector3::zeros()], &BodyTemplate::sphere(0.01));
        assert!(matches!(solve_em_discrete(&ens, &incident(1.0), &EmOptions::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn far_pair_matches_single_scattering() {
        let k = 0.5;
        let d = 100.0;
        let t = sphere_template(0.15, 0.5);
        let pos = [Vector3::zeros(), Vector3::new(d * 0.6, 0.0, d * 0.8)];
        let inc = incident(k);
        let s = solve_em_discrete(&ensemble(k, &pos, &t), &inc, &EmOptions::default()).unwrap();
        let c = EmConstants::default();
        let mut coupling: f64 = 0.0;
        let mut first = Vec::new();
        for m in 0..2 {
            let j = 1 - m;
            let diff = pos[m] - pos[j];
            let g = helmholtz_em(k, diff.norm());
            let smat = super::super::build_smatrix(&t.alpha.unwrap(), &t.beta_tilde.unwrap(), t.volume, &diff.normalize(), k, &c).unwrap();
            let op = smat.matrix * g;
            coupling = coupling.max(op.svd(false, false).singular_values.max());
            let (e0, h0) = inc.fields(&pos[m]);
            let (ej, hj) = inc.fields(&pos[j]);
            let (se, sh) = smat.apply(&ej, &hj);
            first.push((e0 + se * g, h0 + sh * g));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for m in 0..2 {
            num += (s.e[m] - first[m].0).norm_squared() + (s.h[m] - first[m].1).norm_squared();
            den += s.e[m].norm_squared() + s.h[m].norm_squared();
        }
        let rel = (num / den).sqrt();
        assert!(coupling > 0.0 && rel < 10.0 * coupling * coupling, "{rel} vs {coupling}");
        assert!(s.report.relative_residual < 1e-12);
    }

    #[test]
    fn gmres_matches_dense() {
        let k = 1.0;
        let t = sphere_template(0.05, 0.6);
        let pos: Vec<_> = (0..6).map(|i| Vector3::new(8.0 * i as f64, 3.0 * (i % 2) as f64, -7.0 * (i % 3) as f64)).collect();
        let ens = ensemble(k, &pos, &t);
        let inc = EmIncident::new(k, Vector3::new(1.0, 0.0, 1.0), None, EmConstants::new(1.5, 0.8).unwrap()).unwrap();
        let dense = solve_em_discrete(&ens, &inc, &EmOptions::default()).unwrap();
        let iter = solve_em_discrete(&ens, &inc, &EmOptions { dense_limit: 0, ..Default::default() }).unwrap();
        for m in 0..pos.len() {
            assert!((dense.e[m] - iter.e[m]).norm() < 1e-10 && (dense.h[m] - iter.h[m]).norm() < 1e-10);
        }
    }

    #[test]
    fn far_field_matches_distant_evaluation() {
        let k = 1.0;
        let t = sphere_template(0.05, 0.6);
        let pos = [Vector3::zeros(), Vector3::new(7.0, 0.0, 2.0)];
        let s = solve_em_discrete(&ensemble(k, &pos, &t), &incident(k), &EmOptions::default()).unwrap();
        let dir = Vector3::new(0.3, -0.4, 0.866).normalize();
        let r = 1e7;
        let (e, h) = s.evaluate_scattered(&[dir * r]).unwrap()[0];
        let phase = C64::new(0.0, k * r).exp() / r;
        let (fe, fh) = s.far_field(&[dir]).unwrap()[0];
        assert!((e - fe * phase).norm() < 1e-5 * fe.norm() / r);
        assert!((h - fh * phase).norm() < 1e-5 * fh.norm() / r);
        let n = complexify(&dir);
        assert!(n.dot(&fe).norm() < 1e-14 * fe.norm());
    }
}
