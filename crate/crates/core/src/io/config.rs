//! Scenario files (TOML). Unknown keys are rejected.

use nalgebra::Vector3;
use serde::Deserialize;
use std::path::{Path, PathBuf};

use super::plot::PlotSpec;
use crate::ensemble::BoundaryKind;
use crate::error::{Error, Result};
use crate::geometry::TriangleRule;
use crate::grid::Region;
use crate::homogenization::DensityProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Polarizability,
    AcousticDiscrete,
    AcousticContinuum,
    EmDiscrete,
    EmContinuum,
    Compare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Polarizability => "polarizability",
            Mode::AcousticDiscrete => "acoustic-discrete",
            Mode::AcousticContinuum => "acoustic-continuum",
            Mode::EmDiscrete => "em-discrete",
            Mode::EmContinuum => "em-continuum",
            Mode::Compare => "compare",
        }
    }

    pub fn is_solve(self) -> bool {
        matches!(self, Mode::AcousticDiscrete | Mode::AcousticContinuum | Mode::EmDiscrete | Mode::EmContinuum)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BodySpec {
    Sphere {
        radius: f64,
        #[serde(default = "default_refinement")]
        refinement: u32,
    },
    Ellipsoid {
        semiaxes: [f64; 3],
        #[serde(default = "default_refinement")]
        refinement: u32,
    },
    Cube {
        edge: f64,
        #[serde(default = "default_subdivisions")]
        subdivisions: usize,
    },
    Mesh {
        path: PathBuf,
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub separation: f64,
    /// Read bodies from this file instead of sampling.
    pub file: Option<PathBuf>,
    /// Stratified sampling cells (used with a density profile).
    pub strata: Option<[usize; 3]>,
    /// Independent samples averaged in compare mode.
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    #[serde(default = "one")]
    pub wavenumber: f64,
    #[serde(default = "z_axis")]
    pub direction: [f64; 3],
    pub polarization: Option<[f64; 3]>,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub h: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub gamma_tilde: f64,
    #[serde(default = "one")]
    pub epsilon0: f64,
    #[serde(default = "one")]
    pub mu0: f64,
    /// Body conductivity; nonzero values make the permittivity complex.
    #[serde(default)]
    pub conductivity: f64,
    /// Angular frequency for the conductivity term.
    pub omega: Option<f64>,
}

impl Default for PhysicsSpec {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    #[serde(default = "default_order")]
    pub series_order: usize,
    #[serde(default = "default_grid")]
    pub grid: [usize; 3],
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub dense_limit: Option<usize>,
    #[serde(default = "default_safety")]
    pub point_safety: f64,
    #[serde(default)]
    pub allow_regime_violation: bool,
    #[serde(default)]
    pub refinement_diagnostic: bool,
    #[serde(default)]
    pub quadrature: TriangleRule,
}

impl Default for NumericsSpec {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeLattice {
    pub dims: [usize; 3],
    #[serde(default)]
    pub center: [f64; 3],
    #[serde(default)]
    pub min_radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_format")]
    pub format: TableFormat,
    #[serde(default)]
    pub probes: Vec<[f64; 3]>,
    pub probe_lattice: Option<ProbeLattice>,
    #[serde(default)]
    pub plots: Vec<PlotSpec>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

/// A complete scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    pub region: Option<RegionSpec>,
    pub body: Option<BodySpec>,
    pub ensemble: Option<EnsembleSpec>,
    pub density: Option<DensityProfile>,
    #[serde(default)]
    pub physics: PhysicsSpec,
    #[serde(default)]
    pub numerics: NumericsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory of the scenario file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn default_refinement() -> u32 {
    2
}
fn default_subdivisions() -> usize {
    4
}
fn default_realizations() -> usize {
    1
}
fn default_boundary() -> BoundaryKind {
    BoundaryKind::Dirichlet
}
fn default_gamma() -> f64 {
    0.5
}
fn default_order() -> usize {
    4
}
fn default_grid() -> [usize; 3] {
    [16; 3]
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_safety() -> f64 {
    10.0
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_format() -> TableFormat {
    TableFormat::Json
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {msg}"))
}

fn finite3(name: &str, v: &[f64; 3]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(field(name, "must be finite"));
    }
    Ok(())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut s = Self::parse(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn region(&self) -> Result<Region> {
        let r = self.region.ok_or_else(|| field("region", "required for this mode"))?;
        finite3("region.min", &r.min)?;
        finite3("region.max", &r.max)?;
        Region::new(r.min, r.max).map_err(|e| field("region", e))
    }

    pub fn direction(&self) -> Vector3<f64> {
        Vector3::from(self.physics.direction)
    }

    /// Checks every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        let n = &self.numerics;
        if !(p.wavenumber > 0.0 && p.wavenumber.is_finite()) {
            return Err(field("physics.wavenumber", "must be positive"));
        }
        finite3("physics.direction", &p.direction)?;
        if Vector3::from(p.direction).norm() == 0.0 {
            return Err(field("physics.direction", "must be nonzero"));
        }
        if !(p.h >= 0.0) {
            return Err(field("physics.h", "must be non-negative"));
        }
        if !(-1.0..1.0).contains(&p.gamma) {
            return Err(field("physics.gamma", "must lie in [-1, 1)"));
        }
        if !(-1.0..1.0).contains(&p.gamma_tilde) {
            return Err(field("physics.gamma_tilde", "must lie in [-1, 1)"));
        }
        if !(p.epsilon0 > 0.0 && p.mu0 > 0.0) {
            return Err(field("physics.epsilon0/mu0", "must be positive"));
        }
        if !(p.conductivity >= 0.0) {
            return Err(field("physics.conductivity", "must be non-negative"));
        }
        if p.conductivity > 0.0 {
            if !matches!(p.omega, Some(w) if w > 0.0) {
                return Err(field("physics.omega", "a positive omega is required when conductivity > 0"));
            }
            if !matches!(self.mode, Mode::EmDiscrete | Mode::EmContinuum) {
                return Err(field("physics.conductivity", "only used by the EM modes"));
            }
        }
        if let Some(pol) = p.polarization {
            finite3("physics.polarization", &pol)?;
            if !matches!(self.mode, Mode::EmDiscrete | Mode::EmContinuum) {
                return Err(field("physics.polarization", "only used by the EM modes"));
            }
        }
        if n.series_order < 1 || n.series_order > 20 {
            return Err(field("numerics.series_order", "must be in 1..=20"));
        }
        if n.grid.iter().any(|&d| d == 0 || d > 512) {
            return Err(field("numerics.grid", "every dimension must be in 1..=512"));
        }
        if !(n.tolerance > 0.0 && n.tolerance < 1.0) {
            return Err(field("numerics.tolerance", "must be in (0, 1)"));
        }
        if !(n.point_safety >= 0.0) {
            return Err(field("numerics.point_safety", "must be non-negative"));
        }
        if n.refinement_diagnostic && self.mode != Mode::EmContinuum {
            return Err(field("numerics.refinement_diagnostic", "only available in em-continuum mode"));
        }
        if n.refinement_diagnostic && n.grid.iter().any(|d| d % 2 != 0) {
            return Err(field("numerics.refinement_diagnostic", "needs even grid dimensions"));
        }
        for (i, pr) in self.output.probes.iter().enumerate() {
            finite3(&format!("output.probes[{i}]"), pr)?;
        }
        if let Some(l) = &self.output.probe_lattice {
            if l.dims.iter().any(|&d| d == 0) {
                return Err(field("output.probe_lattice.dims", "must be positive"));
            }
            finite3("output.probe_lattice.center", &l.center)?;
        }
        self.validate_body()?;
        if self.mode != Mode::Polarizability {
            let region = self.region()?;
            if let Some(d) = &self.density {
                d.validate(&region).map_err(|e| field("density", e))?;
            }
            for (i, plot) in self.output.plots.iter().enumerate() {
                plot.points(&region).map_err(|e| field(&format!("output.plots[{i}]"), e))?;
            }
        } else if !self.output.plots.is_empty() {
            return Err(field("output.plots", "not available in polarizability mode"));
        }
        self.validate_mode()
    }

    fn validate_body(&self) -> Result<()> {
        let Some(b) = &self.body else { return Ok(()) };
        match b {
            BodySpec::Sphere { radius, refinement } => {
                if !(*radius > 0.0) {
                    return Err(field("body.radius", "must be positive"));
                }
                if *refinement > 5 {
                    return Err(field("body.refinement", "must be at most 5"));
                }
            }
            BodySpec::Ellipsoid { semiaxes, refinement } => {
                if semiaxes.iter().any(|a| !(*a > 0.0)) {
                    return Err(field("body.semiaxes", "must be positive"));
                }
                if *refinement > 5 {
                    return Err(field("body.refinement", "must be at most 5"));
                }
            }
            BodySpec::Cube { edge, subdivisions } => {
                if !(*edge > 0.0) {
                    return Err(field("body.edge", "must be positive"));
                }
                if *subdivisions == 0 || *subdivisions > 24 {
                    return Err(field("body.subdivisions", "must be in 1..=24"));
                }
            }
            BodySpec::Mesh { path, scale } => {
                if !(*scale > 0.0) {
                    return Err(field("body.scale", "must be positive"));
                }
                if !self.resolve(path).exists() {
                    return Err(field("body.path", format!("{} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    fn validate_mode(&self) -> Result<()> {
        let needs_body = || self.body.as_ref().map(|_| ()).ok_or_else(|| field("body", "required for this mode"));
        let ens = self.ensemble.as_ref();
        let check_ensemble = |e: &EnsembleSpec| -> Result<()> {
            if let Some(f) = &e.file {
                if !self.resolve(f).exists() {
                    return Err(field("ensemble.file", format!("{} does not exist", f.display())));
                }
            } else if !(e.separation >= 0.0) {
                return Err(field("ensemble.separation", "must be non-negative"));
            }
            if let Some(s) = e.strata {
                if s.iter().any(|&d| d == 0) {
                    return Err(field("ensemble.strata", "must be positive"));
                }
            }
            Ok(())
        };
        match self.mode {
            Mode::Polarizability => needs_body(),
            Mode::AcousticDiscrete | Mode::EmDiscrete => {
                let e = ens.ok_or_else(|| field("ensemble", "required for this mode"))?;
                check_ensemble(e)?;
                if e.file.is_none() {
                    needs_body()?;
                }
                Ok(())
            }
            Mode::AcousticContinuum => {
                if self.density.is_some() {
                    if self.physics.boundary != BoundaryKind::Dirichlet {
                        return Err(field("density", "an analytic density defines C(y) for dirichlet bodies only"));
                    }
                    return Ok(());
                }
                let e = ens.ok_or_else(|| field("ensemble", "either [density] or [ensemble] is required"))?;
                check_ensemble(e)?;
                if e.file.is_none() {
                    needs_body()?;
                }
                Ok(())
            }
            Mode::EmContinuum => {
                let e = ens.ok_or_else(|| field("ensemble", "required for this mode"))?;
                check_ensemble(e)?;
                if e.file.is_none() {
                    needs_body()?;
                } else if self.physics.conductivity > 0.0 {
                    return Err(field("physics.conductivity", "needs a [body] spec, not an ensemble file"));
                }
                Ok(())
            }
            Mode::Compare => {
                if self.density.is_none() {
                    return Err(field("density", "required for compare mode"));
                }
                if self.physics.boundary != BoundaryKind::Dirichlet {
                    return Err(field("physics.boundary", "compare mode uses dirichlet bodies"));
                }
                if self.body.is_some() {
                    return Err(field("body", "compare mode derives the bodies from [density]"));
                }
                let e = ens.ok_or_else(|| field("ensemble", "required for compare mode"))?;
                if e.file.is_some() {
                    return Err(field("ensemble.file", "compare mode samples its own ensembles"));
                }
                check_ensemble(e)?;
                if e.count == 0 || e.realizations == 0 {
                    return Err(field("ensemble", "count and realizations must be positive"));
                }
                if self.output.probes.is_empty() && self.output.probe_lattice.is_none() {
                    return Err(field("output", "compare mode needs probes or a probe_lattice"));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "acoustic-discrete"
region = { min = [0, 0, 0], max = [1, 1, 1] }
[body]
shape = "sphere"
radius = 0.01
[ensemble]
count = 3
separation = 0.1
"#;

    #[test]
    fn minimal_scenario_validates() {
        let s = Scenario::parse(MINIMAL).unwrap();
        s.validate().unwrap();
        assert_eq!(s.physics.wavenumber, 1.0);
        assert_eq!(s.numerics.grid, [16; 3]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("count = 3", "count = 3\ncolour = 1");
        assert!(matches!(Scenario::parse(&bad), Err(Error::Config(_))));
        let bad = MINIMAL.replace("radius = 0.01", "radius = 0.01\nsides = 4");
        assert!(Scenario::parse(&bad).is_err());
        assert!(Scenario::parse(&format!("{MINIMAL}\n[physics]\nk = 1.0\n")).is_err());
    }

    #[test]
    fn field_level_messages() {
        let s = Scenario::parse(&format!("{MINIMAL}\n[physics]\nwavenumber = -1.0\n")).unwrap();
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("physics.wavenumber"), "{msg}");
        let s = Scenario::parse(&MINIMAL.replace("radius = 0.01", "radius = 0.0")).unwrap();
        assert!(s.validate().unwrap_err().to_string().contains("body.radius"));
        let s = Scenario::parse(&MINIMAL.replace("max = [1, 1, 1]", "max = [1, 0, 1]")).unwrap();
        assert!(s.validate().unwrap_err().to_string().contains("region"));
    }

    #[test]
    fn mode_requirements() {
        let s = Scenario::parse("mode = \"polarizability\"").unwrap();
        assert!(s.validate().unwrap_err().to_string().contains("body"));
        let s = Scenario::parse(
            "mode = \"compare\"\nregion = { min = [-5,-5,-5], max = [5,5,5] }\n[density]\nkind = \"bump\"\namplitude = 0.3\nradius = 3.5\n[ensemble]\ncount = 10\nseparation = 0.05\n",
        )
        .unwrap();
        assert!(s.validate().unwrap_err().to_string().contains("probe"));
    }
}
