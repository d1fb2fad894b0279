//! Field samples along lines and planes, written as CSV.

use nalgebra::Vector3;
use serde::Deserialize;
use std::path::Path;

use super::output::write_csv;
use crate::acoustic::{evaluate_continuum, DiscreteFieldSolution, GridFieldSolution};
use crate::em::{evaluate_em_continuum, EMFieldSolution, EmDensity};
use crate::ensemble::DensityFields;
use crate::error::{Error, Result};
use crate::green::{CVec3, C64};
use crate::grid::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Where to sample.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlotSpec {
    /// `samples` equispaced points from `start` to `end` inclusive.
    Line { start: [f64; 3], end: [f64; 3], samples: usize },
    /// Cell-centred `samples[0] × samples[1]` lattice on the plane `axis = value`,
    /// spanning the region; the first in-plane axis varies fastest.
    Plane { axis: Axis, value: f64, samples: [usize; 2] },
}

impl PlotSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            PlotSpec::Line { .. } => "line",
            PlotSpec::Plane { .. } => "plane",
        }
    }

    /// Sample points; errors when the spec leaves `region`.
    pub fn points(&self, region: &Region) -> Result<Vec<Vector3<f64>>> {
        match *self {
            PlotSpec::Line { start, end, samples } => {
                if samples < 2 {
                    return Err(Error::invalid("a line needs at least 2 samples"));
                }
                let (a, b) = (Vector3::from(start), Vector3::from(end));
                if !region.contains(&a) || !region.contains(&b) {
                    return Err(Error::invalid("line endpoints must lie inside the region"));
                }
                Ok((0..samples).map(|i| a + (b - a) * (i as f64 / (samples - 1) as f64)).collect())
            }
            PlotSpec::Plane { axis, value, samples } => {
                let ax = axis.index();
                if !(value >= region.min[ax] && value <= region.max[ax]) {
                    return Err(Error::invalid(format!("plane {axis:?} = {value} lies outside the region")));
                }
                if samples.iter().any(|&s| s == 0) {
                    return Err(Error::invalid("plane samples must be positive"));
                }
                let (u, v) = ((ax + 1) % 3, (ax + 2) % 3);
                let (u, v) = (u.min(v), u.max(v));
                let at = |axis: usize, i: usize, n: usize| region.min[axis] + (i as f64 + 0.5) / n as f64 * (region.max[axis] - region.min[axis]);
                let mut out = Vec::with_capacity(samples[0] * samples[1]);
                for j in 0..samples[1] {
                    for i in 0..samples[0] {
                        let mut p = Vector3::zeros();
                        p[ax] = value;
                        p[u] = at(u, i, samples[0]);
                        p[v] = at(v, j, samples[1]);
                        out.push(p);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// A solved field that can be sampled anywhere.
pub enum PlotSource<'a> {
    Discrete(&'a DiscreteFieldSolution),
    Continuum(&'a GridFieldSolution, &'a DensityFields),
    EmDiscrete(&'a EMFieldSolution),
    EmContinuum(&'a EMFieldSolution, &'a EmDensity),
}

/// Sampled values: scalar acoustic field or EM pairs.
pub enum FieldSamples {
    Scalar(Vec<C64>),
    Em(Vec<(CVec3, CVec3)>),
}

impl PlotSource<'_> {
    pub fn sample(&self, points: &[Vector3<f64>]) -> Result<FieldSamples> {
        Ok(match self {
            PlotSource::Discrete(s) => FieldSamples::Scalar(s.evaluate(points)),
            PlotSource::Continuum(s, f) => FieldSamples::Scalar(evaluate_continuum(s, f, points)?),
            PlotSource::EmDiscrete(s) => FieldSamples::Em(s.evaluate(points)?),
            PlotSource::EmContinuum(s, d) => FieldSamples::Em(evaluate_em_continuum(s, d, points)?),
        })
    }
}

const SCALAR_HEADER: [&str; 6] = ["x", "y", "z", "abs_u", "re_u", "im_u"];
const EM_HEADER: [&str; 17] = [
    "x", "y", "z", "abs_e", "abs_h", "re_ex", "im_ex", "re_ey", "im_ey", "re_ez", "im_ez", "re_hx", "im_hx", "re_hy", "im_hy", "re_hz",
    "im_hz",
];

/// Writes field values at `points` as CSV rows; returns the row count.
pub fn write_samples(path: &Path, points: &[Vector3<f64>], samples: &FieldSamples) -> Result<usize> {
    match samples {
        FieldSamples::Scalar(u) => write_csv(
            path,
            &SCALAR_HEADER,
            points.iter().zip(u).map(|(p, v)| vec![p.x, p.y, p.z, v.norm(), v.re, v.im]),
        ),
        FieldSamples::Em(f) => write_csv(
            path,
            &EM_HEADER,
            points.iter().zip(f).map(|(p, (e, h))| {
                let mut row = vec![p.x, p.y, p.z, e.norm(), h.norm()];
                row.extend(e.iter().chain(h.iter()).flat_map(|c| [c.re, c.im]));
                row
            }),
        ),
    }
}

/// Samples `source` on `spec` and writes the CSV; returns the row count.
pub fn emit_plot_data(source: &PlotSource<'_>, spec: &PlotSpec, region: &Region, path: &Path) -> Result<usize> {
    let points = spec.points(region)?;
    let samples = source.sample(&points)?;
    write_samples(path, &points, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> Region {
        Region::centered_cube(2.0).unwrap()
    }

    #[test]
    fn plane_has_requested_shape() {
        let spec = PlotSpec::Plane { axis: Axis::Z, value: 0.3, samples: [50, 50] };
        let pts = spec.points(&region()).unwrap();
        assert_eq!(pts.len(), 2500);
        assert!(pts.iter().all(|p| p.z == 0.3 && region().contains(p)));
        assert!(pts[1].x > pts[0].x && pts[1].y == pts[0].y);
    }

    #[test]
    fn specs_outside_the_region_fail() {
        let r = region();
        assert!(PlotSpec::Plane { axis: Axis::X, value: 1.5, samples: [2, 2] }.points(&r).is_err());
        assert!(PlotSpec::Line { start: [0.0; 3], end: [0.0, 0.0, 3.0], samples: 5 }.points(&r).is_err());
        let line = PlotSpec::Line { start: [-1.0, 0.0, 0.0], end: [1.0, 0.0, 0.0], samples: 5 };
        let pts = line.points(&r).unwrap();
        assert_eq!(pts[4], Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn parses_from_toml() {
        #[derive(Deserialize)]
        struct W {
            plots: Vec<PlotSpec>,
        }
        let w: W = toml::from_str(
            "[[plots]]\nkind = \"plane\"\naxis = \"z\"\nvalue = 0.0\nsamples = [50, 50]\n[[plots]]\nkind = \"line\"\nstart = [0,0,0]\nend = [0,0,1]\nsamples = 3\n",
        )
        .unwrap();
        assert_eq!(w.plots.len(), 2);
        assert!(toml::from_str::<W>("[[plots]]\nkind = \"line\"\nstart = [0,0,0]\nend = [0,0,1]\nsamples = 3\nwidth = 2\n").is_err());
    }
}
