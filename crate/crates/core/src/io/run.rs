//! Scenario pipeline: mesh → polarizability → ensemble → solve → emit.

use nalgebra::Vector3;
use serde::Serialize;
use std::path::{Path, PathBuf};

use super::config::{BodySpec, Mode, Scenario, TableFormat};
use super::output::{fmt17, write_json};
use super::plot::{write_samples, FieldSamples, PlotSource};
use crate::acoustic::{
    schrodinger_residual, solve_continuum, solve_discrete, ContinuumOptions, ContinuumProblem, DiscreteOptions,
};
use crate::electrostatics::{
    alpha_from_b_complex, complex_contrast, lossy_permittivity, polarizability, ElectrostaticsOptions, PolarizabilityResult,
};
use crate::em::{
    beta_tilde_from_b, em_refinement_sensitivity, solve_em_continuum, solve_em_with_tensors, EmConstants, EmDensity, EmIncident,
    EmOptions, EmTensors,
};
use crate::ensemble::{
    bin_densities, sample_ensemble, sample_ensemble_stratified, sample_ensemble_with_density, BodyTemplate, BoundaryKind,
    ParticleEnsemble, Physics, RegimeDiagnostics,
};
use crate::error::{Error, Result};
use crate::geometry::{generate_cube, generate_ellipsoid, generate_sphere, load_mesh, SurfaceMesh};
use crate::green::{CMat3, C64};
use crate::grid::{Grid, Region};
use crate::homogenization::{compare_discrete_continuum, probe_lattice, CompareSpec};
use crate::serde_util::rows;

/// What a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Every declared output.
    All,
    /// Only the plot CSVs.
    PlotsOnly,
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Key–value table printed after a run, plus the files written.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub rows: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    fn push(&mut self, key: &str, value: impl ToString) {
        self.rows.push((key.to_string(), value.to_string()));
    }

    fn num(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:.6e}"));
    }

    fn regime(&mut self, d: &Option<RegimeDiagnostics>) {
        if let Some(d) = d {
            self.num("ka", d.ka);
            self.num("a/d", d.a_over_d);
            self.num("kd", d.kd);
            self.push("regime ok", d.all_ok());
            for v in d.violations() {
                self.push("regime warning", v);
            }
        }
    }

    pub fn table(&self) -> String {
        let w = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in &self.rows {
            s.push_str(&format!("{k:<w$}  {v}\n"));
        }
        for f in &self.files {
            s.push_str(&format!("{:<w$}  {}\n", "wrote", f.display()));
        }
        s
    }
}

/// Loads, overrides, validates and runs a scenario file.
pub fn run_scenario_file(path: &Path, overrides: &Overrides, stage: Stage) -> Result<RunSummary> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = overrides.seed {
        s.seed = seed;
    }
    if let Some(out) = &overrides.out {
        s.output.directory = out.clone();
    } else {
        s.output.directory = s.resolve(&s.output.directory);
    }
    s.validate()?;
    if stage == Stage::PlotsOnly && s.output.plots.is_empty() {
        return Err(Error::Config("output.plots: nothing to emit".into()));
    }
    run_scenario(&s, stage)
}

fn mesh_of(s: &Scenario, body: &BodySpec) -> Result<SurfaceMesh> {
    match body {
        BodySpec::Sphere { radius, refinement } => generate_sphere(*radius, *refinement),
        BodySpec::Ellipsoid { semiaxes, refinement } => generate_ellipsoid(*semiaxes, *refinement),
        BodySpec::Cube { edge, subdivisions } => generate_cube(*edge, *subdivisions),
        BodySpec::Mesh { path, scale } => load_mesh(s.resolve(path))?.scaled(*scale),
    }
}

struct Body {
    result: PolarizabilityResult,
    template: BodyTemplate,
    tensors: Option<EmTensors>,
}

fn body(s: &Scenario) -> Result<Option<Body>> {
    let Some(spec) = &s.body else { return Ok(None) };
    let mesh = mesh_of(s, spec)?;
    let mut opts = ElectrostaticsOptions::default();
    opts.operator.regular_rule = s.numerics.quadrature;
    opts.capacitance_operator.regular_rule = s.numerics.quadrature;
    let p = &s.physics;
    let order = s.numerics.series_order;
    let result = polarizability(&mesh, p.gamma, order, &opts)?;
    let mut template = BodyTemplate::from_polarizability(&result, p.h);
    let mut tensors = None;
    if matches!(s.mode, Mode::EmDiscrete | Mode::EmContinuum) {
        let bt = beta_tilde_from_b(&result.b, p.gamma_tilde, order)?;
        template.beta_tilde = Some(bt);
        let alpha: CMat3 = if p.conductivity > 0.0 {
            let eps = p.epsilon0 * (1.0 + p.gamma) / (1.0 - p.gamma);
            let eps_c = lossy_permittivity(eps, p.conductivity, p.omega.unwrap_or(1.0));
            alpha_from_b_complex(&result.b, complex_contrast(eps_c, p.epsilon0), order)?
        } else {
            result.alpha.map(C64::from)
        };
        tensors = Some(EmTensors {
            alpha,
            beta_tilde: bt.map(C64::from),
        });
    }
    Ok(Some(Body { result, template, tensors }))
}

fn physics(s: &Scenario) -> Result<Physics> {
    Physics::new(s.physics.boundary, s.physics.wavenumber, s.direction())
}

fn ensemble(s: &Scenario, region: Region, template: Option<&BodyTemplate>) -> Result<ParticleEnsemble> {
    let spec = s.ensemble.as_ref().ok_or_else(|| Error::Config("ensemble: required".into()))?;
    let phys = physics(s)?;
    if let Some(f) = &spec.file {
        return ParticleEnsemble::read_json(s.resolve(f), phys, region);
    }
    let template = template.ok_or_else(|| Error::Config("body: required to sample an ensemble".into()))?;
    match (&s.density, spec.strata) {
        (Some(d), Some(strata)) => {
            sample_ensemble_stratified(region, spec.count, spec.separation, template, phys, s.seed, strata, |y| d.shape(y))
        }
        (Some(d), None) => sample_ensemble_with_density(region, spec.count, spec.separation, template, phys, s.seed, |y| d.shape(y)),
        (None, _) => sample_ensemble(region, spec.count, spec.separation, template, phys, s.seed),
    }
}

fn probes(s: &Scenario, region: &Region) -> Result<Vec<Vector3<f64>>> {
    let mut out: Vec<Vector3<f64>> = s.output.probes.iter().map(|p| Vector3::from(*p)).collect();
    if let Some(l) = &s.output.probe_lattice {
        out.extend(probe_lattice(region, l.dims, &Vector3::from(l.center), l.min_radius)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct PolarizabilityOutput {
    capacitance: f64,
    volume: f64,
    area: f64,
    radius: f64,
    gamma: f64,
    order: usize,
    alpha: [[f64; 3]; 3],
    beta: [[f64; 3]; 3],
    b: Vec<[[f64; 3]; 3]>,
    convergence_ratio: Option<f64>,
    convergence_reliable: bool,
}

impl From<&PolarizabilityResult> for PolarizabilityOutput {
    fn from(p: &PolarizabilityResult) -> Self {
        Self {
            capacitance: p.capacitance,
            volume: p.volume,
            area: p.area,
            radius: p.radius,
            gamma: p.gamma,
            order: p.order,
            alpha: rows(&p.alpha),
            beta: rows(&p.beta),
            b: p.b.iter().map(rows).collect(),
            convergence_ratio: p.convergence_ratio,
            convergence_reliable: p.convergence_reliable,
        }
    }
}

#[derive(Serialize)]
struct ScalarProbe {
    point: [f64; 3],
    u: [f64; 2],
}

#[derive(Serialize)]
struct EmProbe {
    point: [f64; 3],
    e: [[f64; 2]; 3],
    h: [[f64; 2]; 3],
}

struct Writer<'a> {
    dir: &'a Path,
    stage: Stage,
    summary: RunSummary,
}

impl Writer<'_> {
    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.stage == Stage::All {
            let p = self.dir.join(name);
            write_json(&p, value)?;
            self.summary.files.push(p);
        }
        Ok(())
    }

    fn probes(&mut self, format: TableFormat, points: &[Vector3<f64>], samples: &FieldSamples) -> Result<()> {
        if self.stage != Stage::All || points.is_empty() {
            return Ok(());
        }
        let pair = |c: &C64| [c.re, c.im];
        match format {
            TableFormat::Csv => {
                let p = self.dir.join("probes.csv");
                write_samples(&p, points, samples)?;
                self.summary.files.push(p);
            }
            TableFormat::Json => match samples {
                FieldSamples::Scalar(u) => {
                    let rows: Vec<ScalarProbe> = points.iter().zip(u).map(|(p, v)| ScalarProbe { point: (*p).into(), u: pair(v) }).collect();
                    self.json("probes.json", &rows)?;
                }
                FieldSamples::Em(f) => {
                    let rows: Vec<EmProbe> = points
                        .iter()
                        .zip(f)
                        .map(|(p, (e, h))| EmProbe {
                            point: (*p).into(),
                            e: [pair(&e[0]), pair(&e[1]), pair(&e[2])],
                            h: [pair(&h[0]), pair(&h[1]), pair(&h[2])],
                        })
                        .collect();
                    self.json("probes.json", &rows)?;
                }
            },
        }
        Ok(())
    }

    fn plots(&mut self, s: &Scenario, region: &Region, source: &PlotSource<'_>) -> Result<()> {
        for (i, spec) in s.output.plots.iter().enumerate() {
            let p = self.dir.join(format!("plot_{i}_{}.csv", spec.kind()));
            let n = super::plot::emit_plot_data(source, spec, region, &p)?;
            self.summary.push(&format!("plot {i} rows"), n);
            self.summary.files.push(p);
        }
        Ok(())
    }
}

fn continuum_options(s: &Scenario) -> ContinuumOptions {
    let mut o = ContinuumOptions::default();
    o.gmres.tolerance = s.numerics.tolerance;
    if let Some(d) = s.numerics.dense_limit {
        o.dense_limit = d;
    }
    o
}

fn discrete_options(s: &Scenario) -> DiscreteOptions {
    let mut o = DiscreteOptions::default();
    o.gmres.tolerance = s.numerics.tolerance.min(o.gmres.tolerance);
    o.point_safety = s.numerics.point_safety;
    if let Some(d) = s.numerics.dense_limit {
        o.dense_limit = d;
    }
    o
}

fn em_options(s: &Scenario) -> EmOptions {
    let mut o = EmOptions::default();
    o.gmres.tolerance = s.numerics.tolerance.min(o.gmres.tolerance);
    o.allow_regime_violation = s.numerics.allow_regime_violation;
    if let Some(d) = s.numerics.dense_limit {
        o.dense_limit = d;
    }
    o
}

fn em_incident(s: &Scenario) -> Result<EmIncident> {
    let p = &s.physics;
    EmIncident::new(
        p.wavenumber,
        s.direction(),
        p.polarization.map(Vector3::from),
        EmConstants::new(p.epsilon0, p.mu0)?,
    )
}

/// Runs a validated scenario.
pub fn run_scenario(s: &Scenario, stage: Stage) -> Result<RunSummary> {
    let dir = s.output.directory.clone();
    std::fs::create_dir_all(&dir)?;
    let mut w = Writer {
        dir: &dir,
        stage,
        summary: RunSummary::default(),
    };
    w.summary.push("mode", s.mode.name());
    w.summary.push("seed", s.seed);
    let body = body(s)?;
    if let Some(b) = &body {
        w.summary.num("capacitance", b.result.capacitance);
        w.summary.num("volume", b.result.volume);
        if let Some(r) = b.result.convergence_ratio {
            w.summary.num("series ratio", r);
        }
    }
    let template = body.as_ref().map(|b| &b.template);
    match s.mode {
        Mode::Polarizability => {
            let b = body.as_ref().expect("validated");
            w.json("polarizability.json", &PolarizabilityOutput::from(&b.result))?;
            let a = &b.result.alpha;
            w.summary.push(
                "alpha diagonal",
                format!("{} {} {}", fmt17(a[(0, 0)]), fmt17(a[(1, 1)]), fmt17(a[(2, 2)])),
            );
        }
        Mode::AcousticDiscrete => {
            let region = s.region()?;
            let ens = ensemble(s, region, template)?;
            w.summary.push("bodies", ens.len());
            w.json("ensemble.json", &ens.bodies)?;
            let sol = solve_discrete(&ens, &discrete_options(s))?;
            w.summary.regime(&sol.regime);
            report(&mut w.summary, &sol.report);
            w.json("solution.json", &sol)?;
            let source = PlotSource::Discrete(&sol);
            let pts = probes(s, &region)?;
            w.probes(s.output.format, &pts, &source.sample(&pts)?)?;
            w.plots(s, &region, &source)?;
        }
        Mode::AcousticContinuum => {
            let region = s.region()?;
            let grid = Grid::new(region, s.numerics.grid)?;
            let fields = match &s.density {
                Some(d) => d.fields(grid),
                None => {
                    let ens = ensemble(s, region, template)?;
                    w.summary.push("bodies", ens.len());
                    bin_densities(&ens, s.numerics.grid)?
                }
            };
            let problem = match s.physics.boundary {
                BoundaryKind::Dirichlet => ContinuumProblem::Soft,
                BoundaryKind::Impedance => ContinuumProblem::Impedance,
                BoundaryKind::Neumann => ContinuumProblem::Hard,
            };
            let sol = solve_continuum(&fields, problem, s.physics.wavenumber, &s.direction(), &continuum_options(s))?;
            report(&mut w.summary, &sol.report);
            if problem == ContinuumProblem::Soft && grid.dims.iter().all(|&d| d >= 5) {
                w.summary.num("schrodinger residual", schrodinger_residual(&sol, &fields)?);
            }
            w.json("solution.json", &sol)?;
            let source = PlotSource::Continuum(&sol, &fields);
            let pts = probes(s, &region)?;
            w.probes(s.output.format, &pts, &source.sample(&pts)?)?;
            w.plots(s, &region, &source)?;
        }
        Mode::EmDiscrete => {
            let region = s.region()?;
            let ens = ensemble(s, region, template)?;
            w.summary.push("bodies", ens.len());
            w.json("ensemble.json", &ens.bodies)?;
            let tensors = em_tensors(&ens, body.as_ref().and_then(|b| b.tensors))?;
            let sol = solve_em_with_tensors(&ens, &tensors, &em_incident(s)?, &em_options(s))?;
            w.summary.regime(&sol.regime);
            report(&mut w.summary, &sol.report);
            w.json("solution.json", &sol)?;
            let source = PlotSource::EmDiscrete(&sol);
            let pts = probes(s, &region)?;
            w.probes(s.output.format, &pts, &source.sample(&pts)?)?;
            w.plots(s, &region, &source)?;
        }
        Mode::EmContinuum => {
            let region = s.region()?;
            let ens = ensemble(s, region, template)?;
            w.summary.push("bodies", ens.len());
            let fields = bin_densities(&ens, s.numerics.grid)?;
            let density = match body.as_ref().and_then(|b| b.tensors) {
                Some(t) => EmDensity {
                    grid: fields.grid,
                    alpha_volume: fields.volume.iter().map(|v| t.alpha * C64::from(*v)).collect(),
                    beta_tilde_volume: fields.volume.iter().map(|v| t.beta_tilde * C64::from(*v)).collect(),
                },
                None => EmDensity::from_fields(&fields),
            };
            let inc = em_incident(s)?;
            let opts = continuum_options(s);
            let sol = solve_em_continuum(&density, &inc, &opts)?;
            report(&mut w.summary, &sol.report);
            if s.numerics.refinement_diagnostic {
                w.summary.num("refinement sensitivity", em_refinement_sensitivity(&density, &inc, &opts)?);
            }
            w.json("solution.json", &sol)?;
            let source = PlotSource::EmContinuum(&sol, &density);
            let pts = probes(s, &region)?;
            w.probes(s.output.format, &pts, &source.sample(&pts)?)?;
            w.plots(s, &region, &source)?;
        }
        Mode::Compare => {
            let region = s.region()?;
            let e = s.ensemble.as_ref().expect("validated");
            let spec = CompareSpec {
                region,
                profile: s.density.expect("validated"),
                count: e.count,
                realizations: e.realizations,
                seed: s.seed,
                min_separation: e.separation,
                strata: e.strata,
                grid: s.numerics.grid,
                wavenumber: s.physics.wavenumber,
                direction: s.direction(),
                probes: probes(s, &region)?,
                discrete: discrete_options(s),
                continuum: continuum_options(s),
            };
            let r = compare_discrete_continuum(&spec)?;
            w.summary.push("bodies", r.count);
            w.summary.push("realizations", r.realizations);
            w.summary.push("probes", r.probes);
            w.summary.num("body capacitance", r.body_capacitance);
            w.summary.num("relative L2", r.relative_l2);
            w.summary.num("relative L2 / scattered", r.relative_l2_scattered);
            w.summary.num("max discrete residual", r.max_discrete_residual);
            w.summary.num("continuum residual", r.continuum_residual);
            w.json("compare.json", &r)?;
        }
    }
    if stage == Stage::All {
        let p = dir.join("summary.json");
        let rows: Vec<_> = w.summary.rows.iter().map(|(k, v)| [k.as_str(), v.as_str()]).collect();
        write_json(&p, &rows)?;
        w.summary.files.push(p);
    }
    Ok(w.summary)
}

fn report(summary: &mut RunSummary, r: &crate::linalg::SolveReport) {
    summary.push("solver", format!("{:?}", r.method));
    summary.push("iterations", r.iterations);
    summary.num("relative residual", r.relative_residual);
}

fn em_tensors(ens: &ParticleEnsemble, from_body: Option<EmTensors>) -> Result<Vec<EmTensors>> {
    ens.bodies
        .iter()
        .enumerate()
        .map(|(i, b)| match (b.alpha, b.beta_tilde, from_body) {
            (Some(a), Some(bt), None) => Ok(EmTensors::real(&a, &bt)),
            (_, _, Some(t)) => Ok(t),
            _ => Err(Error::invalid(format!("body {i} lacks alpha or beta_tilde"))),
        })
        .collect()
}
