//! Random configurations of small bodies, regime diagnostics and binning of
//! per-body quantities into continuum densities.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::electrostatics::PolarizabilityResult;
use crate::error::{Error, Result};
use crate::grid::{Grid, Region};
use crate::serde_util::{mat3, opt_mat3, vec3};

/// Boundary condition on every body surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Acoustically soft, `u = 0`.
    Dirichlet,
    /// Acoustically hard, `∂u/∂N = 0`.
    Neumann,
    /// `∂u/∂N + h u = 0`.
    Impedance,
}

/// One small body: location plus the scalar and tensor data the solvers use.
///
/// Serialized as one entry of the ensemble file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    #[serde(with = "vec3")]
    pub position: Vector3<f64>,
    #[serde(rename = "C")]
    pub capacitance: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    pub area: f64,
    #[serde(with = "mat3")]
    pub beta: Matrix3<f64>,
    pub h: f64,
    /// Body radius `a_j`; derived from `V` or `C` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Electric polarizability at the body's contrast (EM only).
    #[serde(default, with = "opt_mat3", skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Matrix3<f64>>,
    /// `α(γ̃) + β` (EM only).
    #[serde(default, with = "opt_mat3", skip_serializing_if = "Option::is_none")]
    pub beta_tilde: Option<Matrix3<f64>>,
}

impl Body {
    pub fn effective_radius(&self) -> f64 {
        if let Some(r) = self.radius {
            return r;
        }
        if self.volume > 0.0 {
            (3.0 * self.volume / (4.0 * std::f64::consts::PI)).cbrt()
        } else {
            self.capacitance / (4.0 * std::f64::consts::PI)
        }
    }

    /// Impedance scattering weight `h|S| / (1 + h|S|/C)`.
    pub fn impedance_weight(&self) -> f64 {
        impedance_weight(self.h, self.area, self.capacitance)
    }
}

pub fn impedance_weight(h: f64, area: f64, capacitance: f64) -> f64 {
    if h.is_infinite() {
        return capacitance;
    }
    let ha = h * area;
    ha / (1.0 + ha / capacitance)
}

/// Per-body properties shared by all bodies of a sampled ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyTemplate {
    pub capacitance: f64,
    pub volume: f64,
    pub area: f64,
    pub radius: f64,
    pub beta: Matrix3<f64>,
    pub h: f64,
    pub alpha: Option<Matrix3<f64>>,
    pub beta_tilde: Option<Matrix3<f64>>,
}

impl BodyTemplate {
    pub fn from_polarizability(p: &PolarizabilityResult, h: f64) -> Self {
        Self {
            capacitance: p.capacitance,
            volume: p.volume,
            area: p.area,
            radius: p.radius,
            beta: p.beta,
            h,
            alpha: Some(p.alpha),
            beta_tilde: None,
        }
    }

    /// Analytic sphere of radius `a`: `C = 4πa`, `β = −3/2 I`.
    pub fn sphere(radius: f64) -> Self {
        let pi = std::f64::consts::PI;
        Self {
            capacitance: 4.0 * pi * radius,
            volume: 4.0 / 3.0 * pi * radius.powi(3),
            area: 4.0 * pi * radius * radius,
            radius,
            beta: Matrix3::identity() * -1.5,
            h: 0.0,
            alpha: None,
            beta_tilde: None,
        }
    }

    pub fn at(&self, position: Vector3<f64>) -> Body {
        Body {
            position,
            capacitance: self.capacitance,
            volume: self.volume,
            area: self.area,
            beta: self.beta,
            h: self.h,
            radius: Some(self.radius),
            alpha: self.alpha,
            beta_tilde: self.beta_tilde,
        }
    }
}

/// Incident-wave and boundary settings shared by every body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub boundary: BoundaryKind,
    pub wavenumber: f64,
    #[serde(with = "vec3")]
    pub direction: Vector3<f64>,
}

impl Physics {
    pub fn new(boundary: BoundaryKind, wavenumber: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(wavenumber > 0.0) {
            return Err(Error::invalid("wavenumber must be positive"));
        }
        let n = direction.norm();
        if !(n > 0.0) {
            return Err(Error::invalid("incident direction must be nonzero"));
        }
        Ok(Self {
            boundary,
            wavenumber,
            direction: direction / n,
        })
    }
}

/// A configuration of small bodies in a box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub bodies: Vec<Body>,
    pub physics: Physics,
    pub region: Region,
}

impl ParticleEnsemble {
    pub fn new(bodies: Vec<Body>, physics: Physics, region: Region) -> Result<Self> {
        for (index, b) in bodies.iter().enumerate() {
            if !region.contains(&b.position) {
                return Err(Error::OutsideRegion {
                    index,
                    position: [b.position.x, b.position.y, b.position.z],
                });
            }
        }
        Ok(Self {
            bodies,
            physics,
            region,
        })
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.bodies.iter().map(|b| b.position).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.bodies.iter().map(Body::effective_radius).fold(0.0, f64::max)
    }

    /// Smallest centre-to-centre distance (infinite for fewer than two bodies).
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.bodies.iter().enumerate() {
            for b in &self.bodies[i + 1..] {
                best = best.min((a.position - b.position).norm_squared());
            }
        }
        best.sqrt()
    }

    /// Same bodies with a different boundary condition.
    pub fn with_boundary(&self, boundary: BoundaryKind) -> Self {
        let mut out = self.clone();
        out.physics.boundary = boundary;
        out
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.bodies)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>, physics: Physics, region: Region) -> Result<Self> {
        let bodies: Vec<Body> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::new(bodies, physics, region)
    }
}

/// Places `count` bodies uniformly in `region` with pairwise distance at
/// least `min_separation`.
pub fn sample_ensemble(
    region: Region,
    count: usize,
    min_separation: f64,
    template: &BodyTemplate,
    physics: Physics,
    seed: u64,
) -> Result<ParticleEnsemble> {
    sample_ensemble_with_density(region, count, min_separation, template, physics, seed, |_| 1.0)
}

/// Dart throwing with positions drawn from a density proportional to
/// `density(y)`, which must be bounded by 1 on the region.
pub fn sample_ensemble_with_density(
    region: Region,
    count: usize,
    min_separation: f64,
    template: &BodyTemplate,
    physics: Physics,
    seed: u64,
    density: impl Fn(&Vector3<f64>) -> f64,
) -> Result<ParticleEnsemble> {
    check_feasible(&region, count, min_separation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut board = DartBoard::new(region, min_separation, count);
    let budget = 10_000 + 2_000 * count;
    let mut attempts = 0;
    while board.len() < count {
        if attempts >= budget {
            return Err(Error::Placement {
                placed: board.len(),
                requested: count,
            });
        }
        attempts += 1;
        board.throw(&mut rng, &region, &density);
    }
    let bodies = board.positions.into_iter().map(|p| template.at(p)).collect();
    ParticleEnsemble::new(bodies, physics, region)
}

/// Density-weighted dart throwing with prescribed counts per stratum.
///
/// The region is split into `strata` cells; each cell receives a number of
/// bodies proportional to the integral of `density` over it, rounded by
/// systematic sampling with one random offset, so every cell's expected count
/// is exact and the total is `count`. Positions inside a cell are then drawn
/// by dart throwing as in [`sample_ensemble_with_density`].
#[allow(clippy::too_many_arguments)]
pub fn sample_ensemble_stratified(
    region: Region,
    count: usize,
    min_separation: f64,
    template: &BodyTemplate,
    physics: Physics,
    seed: u64,
    strata: [usize; 3],
    density: impl Fn(&Vector3<f64>) -> f64,
) -> Result<ParticleEnsemble> {
    check_feasible(&region, count, min_separation)?;
    let grid = Grid::new(region, strata)?;
    let h = grid.spacing();
    const SUB: usize = 8;
    let weights: Vec<f64> = (0..grid.len())
        .map(|c| {
            let lo = grid.center(c) - Vector3::new(h[0], h[1], h[2]) * 0.5;
            let mut w = 0.0;
            for i in 0..SUB * SUB * SUB {
                let f = |n: usize| (n as f64 + 0.5) / SUB as f64;
                let p = lo + Vector3::new(f(i % SUB) * h[0], f((i / SUB) % SUB) * h[1], f(i / (SUB * SUB)) * h[2]);
                w += density(&p).max(0.0);
            }
            w
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if count > 0 && !(total > 0.0) {
        return Err(Error::invalid("density vanishes on the whole region"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.gen();
    let mut cum = 0.0;
    let mut counts = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for w in &weights {
        cum += count as f64 * w / total;
        let upto = ((cum + offset).floor() as usize).min(count);
        counts.push(upto - assigned);
        assigned = upto;
    }
    if assigned < count {
        // floating-point shortfall of the cumulative sum
        let heaviest = (0..weights.len()).max_by(|&a, &b| weights[a].total_cmp(&weights[b])).unwrap_or(0);
        counts[heaviest] += count - assigned;
    }
    let mut board = DartBoard::new(region, min_separation, count);
    let budget = 10_000 + 2_000 * count;
    let mut attempts = 0;
    for (c, &n) in counts.iter().enumerate() {
        let lo = grid.center(c) - Vector3::new(h[0], h[1], h[2]) * 0.5;
        let cell = Region::new([lo.x, lo.y, lo.z], [lo.x + h[0], lo.y + h[1], lo.z + h[2]])?;
        let target = board.len() + n;
        while board.len() < target {
            if attempts >= budget {
                return Err(Error::Placement {
                    placed: board.len(),
                    requested: count,
                });
            }
            attempts += 1;
            board.throw(&mut rng, &cell, &density);
        }
    }
    let bodies = board.positions.into_iter().map(|p| template.at(p)).collect();
    ParticleEnsemble::new(bodies, physics, region)
}

fn check_feasible(region: &Region, count: usize, min_separation: f64) -> Result<()> {
    if !(min_separation > 0.0) {
        return Err(Error::invalid("min_separation must be positive"));
    }
    if count as f64 * min_separation.powi(3) >= 0.3 * region.volume() {
        return Err(Error::invalid(format!(
            "{count} bodies at separation {min_separation} cannot fit in a region of volume {}",
            region.volume()
        )));
    }
    Ok(())
}

/// Accepted positions with a spatial hash for the separation test.
struct DartBoard {
    origin: [f64; 3],
    cell: f64,
    min_separation: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
    positions: Vec<Vector3<f64>>,
}

impl DartBoard {
    fn new(region: Region, min_separation: f64, capacity: usize) -> Self {
        Self {
            origin: region.min,
            cell: min_separation,
            min_separation,
            buckets: HashMap::new(),
            positions: Vec::with_capacity(capacity),
        }
    }

    fn len(&self) -> usize {
        self.positions.len()
    }

    fn key(&self, p: &Vector3<f64>) -> [i64; 3] {
        [0, 1, 2].map(|a| ((p[a] - self.origin[a]) / self.cell).floor() as i64)
    }

    /// One candidate drawn uniformly in `within`, accepted with probability
    /// `density(p)` and only if it keeps the separation.
    fn throw(&mut self, rng: &mut ChaCha8Rng, within: &Region, density: &impl Fn(&Vector3<f64>) -> f64) -> bool {
        let p = Vector3::new(
            rng.gen_range(within.min[0]..=within.max[0]),
            rng.gen_range(within.min[1]..=within.max[1]),
            rng.gen_range(within.min[2]..=within.max[2]),
        );
        let accept: f64 = rng.gen();
        if accept >= density(&p) {
            return false;
        }
        let k = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if list.iter().any(|&i| (self.positions[i] - p).norm() < self.min_separation) {
                            return false;
                        }
                    }
                }
            }
        }
        self.buckets.entry(k).or_default().push(self.positions.len());
        self.positions.push(p);
        true
    }
}

/// Which asymptotic regime is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeMode {
    Acoustic,
    Em,
}

/// Numeric stand-ins for the asymptotic conditions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Bound on `ka` and `a/d`.
    pub small_ratio: f64,
    /// Lower bound on `kd` in the EM regime.
    pub far_zone: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            small_ratio: 0.1,
            far_zone: 2.0 * std::f64::consts::PI,
        }
    }
}

/// Regime ratios and pass/fail flags.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeDiagnostics {
    pub mode: RegimeMode,
    pub max_radius: f64,
    pub min_distance: f64,
    pub ka: f64,
    pub a_over_d: f64,
    pub kd: f64,
    /// `N a³` with `N` the number density.
    pub number_density_a3: f64,
    /// `a / d³`, which stays O(1) in the soft-body continuum limit.
    pub a_over_d3: f64,
    pub small_body_ok: bool,
    pub separation_ok: bool,
    /// Always true in acoustic mode.
    pub far_zone_ok: bool,
    /// False when `N a³` is not small, i.e. the bodies fill a finite volume fraction.
    pub dilute_ok: bool,
}

impl RegimeDiagnostics {
    pub fn all_ok(&self) -> bool {
        self.small_body_ok && self.separation_ok && self.far_zone_ok && self.dilute_ok
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.small_body_ok {
            out.push(format!("ka = {:.3e} is not small", self.ka));
        }
        if !self.separation_ok {
            out.push(format!("a/d = {:.3e} is not small", self.a_over_d));
        }
        if !self.far_zone_ok {
            out.push(format!("kd = {:.3e} is not in the far zone", self.kd));
        }
        if !self.dilute_ok {
            out.push(format!(
                "N a^3 = {:.3e}: finite volume fraction, d >> a would be violated",
                self.number_density_a3
            ));
        }
        out
    }
}

pub fn check_regime(
    ensemble: &ParticleEnsemble,
    mode: RegimeMode,
    thresholds: &RegimeThresholds,
) -> Result<RegimeDiagnostics> {
    if ensemble.is_empty() {
        return Err(Error::invalid("regime check needs at least one body"));
    }
    let a = ensemble.max_radius();
    let d = ensemble.min_distance();
    let k = ensemble.physics.wavenumber;
    let number_density = ensemble.len() as f64 / ensemble.region.volume();
    Ok(regime_from_ratios(mode, thresholds, a, d, k, number_density))
}

pub(crate) fn regime_from_ratios(
    mode: RegimeMode,
    thresholds: &RegimeThresholds,
    a: f64,
    d: f64,
    k: f64,
    number_density: f64,
) -> RegimeDiagnostics {
    let ka = k * a;
    let a_over_d = a / d;
    let kd = k * d;
    let na3 = number_density * a.powi(3);
    RegimeDiagnostics {
        mode,
        max_radius: a,
        min_distance: d,
        ka,
        a_over_d,
        kd,
        number_density_a3: na3,
        a_over_d3: a / d.powi(3),
        small_body_ok: ka < thresholds.small_ratio,
        separation_ok: a_over_d < thresholds.small_ratio,
        far_zone_ok: match mode {
            RegimeMode::Acoustic => true,
            RegimeMode::Em => kd > thresholds.far_zone,
        },
        dilute_ok: na3 < thresholds.small_ratio.powi(3),
    }
}

/// Continuum densities on a grid: per-cell sums divided by the cell volume.
#[derive(Debug, Clone)]
pub struct DensityFields {
    pub grid: Grid,
    /// `C(y)`
    pub capacitance: Vec<f64>,
    /// `V(y)`
    pub volume: Vec<f64>,
    /// `β(y)`, zero where `V(y) = 0`.
    pub beta: Vec<Matrix3<f64>>,
    /// `β(y) V(y)`
    pub beta_volume: Vec<Matrix3<f64>>,
    /// `b(y)`, impedance weights.
    pub impedance: Vec<f64>,
    /// `α(y) V(y)` (EM).
    pub alpha_volume: Vec<Matrix3<f64>>,
    /// `β̃(y) V(y)` (EM).
    pub beta_tilde_volume: Vec<Matrix3<f64>>,
}

impl DensityFields {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            capacitance: vec![0.0; n],
            volume: vec![0.0; n],
            beta: vec![Matrix3::zeros(); n],
            beta_volume: vec![Matrix3::zeros(); n],
            impedance: vec![0.0; n],
            alpha_volume: vec![Matrix3::zeros(); n],
            beta_tilde_volume: vec![Matrix3::zeros(); n],
        }
    }

    /// Samples `C(y)` from a function at cell centres; other fields stay zero.
    pub fn from_capacitance_fn(grid: Grid, c: impl Fn(&Vector3<f64>) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for (idx, v) in out.capacitance.iter_mut().enumerate() {
            *v = c(&grid.center(idx));
        }
        out
    }

    /// Sets `V(y)` and `β(y)`, keeping `β V` consistent.
    pub fn set_volume_beta(&mut self, idx: usize, volume: f64, beta: Matrix3<f64>) {
        self.volume[idx] = volume;
        self.beta[idx] = if volume != 0.0 { beta } else { Matrix3::zeros() };
        self.beta_volume[idx] = self.beta[idx] * volume;
    }

    /// Multiplies every density by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.capacitance.iter_mut().chain(&mut out.volume).chain(&mut out.impedance) {
            *v *= factor;
        }
        for m in out
            .beta_volume
            .iter_mut()
            .chain(&mut out.alpha_volume)
            .chain(&mut out.beta_tilde_volume)
        {
            *m *= factor;
        }
        out
    }

    /// Cell-volume-weighted total of a scalar field.
    pub fn total(&self, field: &[f64]) -> f64 {
        crate::geometry::pairwise_sum(field) * self.grid.cell_volume()
    }
}

/// Bins the ensemble's bodies into grid cells by centre membership.
pub fn bin_densities(ensemble: &ParticleEnsemble, dims: [usize; 3]) -> Result<DensityFields> {
    let grid = Grid::new(ensemble.region, dims)?;
    let mut out = DensityFields::zeros(grid);
    let inv = 1.0 / grid.cell_volume();
    for (index, b) in ensemble.bodies.iter().enumerate() {
        let cell = grid.locate(&b.position).ok_or(Error::OutsideRegion {
            index,
            position: [b.position.x, b.position.y, b.position.z],
        })?;
        out.capacitance[cell] += b.capacitance * inv;
        out.volume[cell] += b.volume * inv;
        out.beta_volume[cell] += b.beta * (b.volume * inv);
        out.impedance[cell] += b.impedance_weight() * inv;
        if let Some(alpha) = b.alpha {
            out.alpha_volume[cell] += alpha * (b.volume * inv);
        }
        if let Some(bt) = b.beta_tilde {
            out.beta_tilde_volume[cell] += bt * (b.volume * inv);
        }
    }
    for idx in 0..grid.len() {
        out.beta[idx] = if out.volume[idx] > 0.0 {
            out.beta_volume[idx] / out.volume[idx]
        } else {
            Matrix3::zeros()
        };
    }
    Ok(out)
}
