//! Triangle quadrature and closed-form potentials of flat triangles.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SurfaceMesh;

/// Symmetric quadrature rule on a single triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TriangleRule {
    /// One node at the centroid (degree 1).
    #[default]
    Centroid,
    /// Three interior nodes (degree 2).
    ThreePoint,
    /// Seven-node Dunavant rule (degree 5).
    SevenPoint,
}

const SEVEN_A1: f64 = 0.059_715_871_789_770;
const SEVEN_B1: f64 = 0.470_142_064_105_115;
const SEVEN_W1: f64 = 0.132_394_152_788_506;
const SEVEN_A2: f64 = 0.797_426_985_353_087;
const SEVEN_B2: f64 = 0.101_286_507_323_456;
const SEVEN_W2: f64 = 0.125_939_180_544_827;

impl TriangleRule {
    /// Barycentric coordinates and weights (weights sum to 1).
    pub fn barycentric(self) -> &'static [([f64; 3], f64)] {
        const THIRD: f64 = 1.0 / 3.0;
        match self {
            TriangleRule::Centroid => &[([THIRD, THIRD, THIRD], 1.0)],
            TriangleRule::ThreePoint => &[
                ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], THIRD),
                ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], THIRD),
                ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], THIRD),
            ],
            TriangleRule::SevenPoint => &[
                ([THIRD, THIRD, THIRD], 0.225),
                ([SEVEN_A1, SEVEN_B1, SEVEN_B1], SEVEN_W1),
                ([SEVEN_B1, SEVEN_A1, SEVEN_B1], SEVEN_W1),
                ([SEVEN_B1, SEVEN_B1, SEVEN_A1], SEVEN_W1),
                ([SEVEN_A2, SEVEN_B2, SEVEN_B2], SEVEN_W2),
                ([SEVEN_B2, SEVEN_A2, SEVEN_B2], SEVEN_W2),
                ([SEVEN_B2, SEVEN_B2, SEVEN_A2], SEVEN_W2),
            ],
        }
    }

    /// Physical nodes and weights on the triangle with the given corners and area.
    pub fn nodes(self, corners: &[Vector3<f64>; 3], area: f64) -> impl Iterator<Item = (Vector3<f64>, f64)> + '_ {
        self.barycentric().iter().map(move |(b, w)| {
            (
                corners[0] * b[0] + corners[1] * b[1] + corners[2] * b[2],
                w * area,
            )
        })
    }
}

/// How singular and near-singular triangle pairs are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SingularStrategy {
    /// Closed-form inner integral over the source triangle, quadrature over the target.
    #[default]
    SemiAnalytic,
}

/// Quadrature nodes for every triangle of a mesh.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    rule: TriangleRule,
    strategy: SingularStrategy,
    points: Vec<Vector3<f64>>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(mesh: &SurfaceMesh, rule: TriangleRule) -> Self {
        let per = rule.barycentric().len();
        let mut points = Vec::with_capacity(per * mesh.num_triangles());
        let mut weights = Vec::with_capacity(per * mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            let corners = mesh.corners(t);
            for (p, w) in rule.nodes(&corners, mesh.areas()[t]) {
                points.push(p);
                weights.push(w);
            }
        }
        Self {
            rule,
            strategy: SingularStrategy::SemiAnalytic,
            points,
            weights,
        }
    }

    pub fn rule(&self) -> TriangleRule {
        self.rule
    }

    pub fn strategy(&self) -> SingularStrategy {
        self.strategy
    }

    pub fn nodes_per_triangle(&self) -> usize {
        self.rule.barycentric().len()
    }

    /// Nodes and weights of triangle `t`.
    pub fn triangle(&self, t: usize) -> impl Iterator<Item = (&Vector3<f64>, f64)> {
        let per = self.nodes_per_triangle();
        self.points[t * per..(t + 1) * per]
            .iter()
            .zip(self.weights[t * per..(t + 1) * per].iter().copied())
    }

    /// Integrates `f(triangle, point)` over the whole mesh.
    pub fn integrate(&self, f: impl Fn(usize, &Vector3<f64>) -> f64) -> f64 {
        let per = self.nodes_per_triangle();
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(k, (p, w))| w * f(k / per, p))
            .collect();
        super::mesh::pairwise_sum(&terms)
    }
}

/// Edge data shared by the potential and its gradient.
struct EdgeTerms {
    outward: Vector3<f64>,
    t0: f64,
    r0_sq: f64,
    l_minus: f64,
    l_plus: f64,
    r_minus: f64,
    r_plus: f64,
}

impl EdgeTerms {
    /// `ln((R+ + l+)/(R- + l-))`, the integral of `1/R` along the edge.
    fn log_ratio(&self) -> f64 {
        let (lm, lp) = (self.l_minus, self.l_plus);
        if lm >= 0.0 {
            ((self.r_plus + lp) / (self.r_minus + lm)).ln()
        } else if lp <= 0.0 {
            ((self.r_minus - lm) / (self.r_plus - lp)).ln()
        } else {
            ((self.r_plus + lp) * (self.r_minus - lm) / self.r0_sq).ln()
        }
    }

    fn angle(&self, abs_h: f64) -> f64 {
        if self.t0 == 0.0 {
            return 0.0;
        }
        (self.t0 * self.l_plus).atan2(self.r0_sq + abs_h * self.r_plus)
            - (self.t0 * self.l_minus).atan2(self.r0_sq + abs_h * self.r_minus)
    }
}

fn edge_terms(x: &Vector3<f64>, corners: &[Vector3<f64>; 3]) -> (Vector3<f64>, f64, [EdgeTerms; 3]) {
    let normal = (corners[1] - corners[0])
        .cross(&(corners[2] - corners[0]))
        .normalize();
    let h = (x - corners[0]).dot(&normal);
    let rho = x - normal * h;
    let edge = |i: usize| {
        let a = corners[i];
        let b = corners[(i + 1) % 3];
        let s = (b - a).normalize();
        let outward = s.cross(&normal);
        let t0 = (a - rho).dot(&outward);
        EdgeTerms {
            outward,
            t0,
            r0_sq: t0 * t0 + h * h,
            l_minus: (a - rho).dot(&s),
            l_plus: (b - rho).dot(&s),
            r_minus: (a - x).norm(),
            r_plus: (b - x).norm(),
        }
    };
    (normal, h, [edge(0), edge(1), edge(2)])
}

/// Exact `∫_T dy / |x - y|` for a flat triangle `T`.
///
/// Finite everywhere, including for `x` on the triangle.
pub fn triangle_potential(x: &Vector3<f64>, corners: &[Vector3<f64>; 3]) -> f64 {
    let (_, h, edges) = edge_terms(x, corners);
    let abs_h = h.abs();
    edges
        .iter()
        .map(|e| {
            let log_term = if e.t0 == 0.0 { 0.0 } else { e.t0 * e.log_ratio() };
            log_term - abs_h * e.angle(abs_h)
        })
        .sum()
}

/// Exact `∇_x ∫_T dy / |x - y|` for a flat triangle `T`.
///
/// Singular only on the edges of `T`; in the interior of `T` the normal
/// component is taken as zero (the principal value).
pub fn triangle_potential_gradient(x: &Vector3<f64>, corners: &[Vector3<f64>; 3]) -> Vector3<f64> {
    let (normal, h, edges) = edge_terms(x, corners);
    let abs_h = h.abs();
    let mut grad = Vector3::zeros();
    let mut solid_angle = 0.0;
    for e in &edges {
        grad -= e.outward * e.log_ratio();
        solid_angle += e.angle(abs_h);
    }
    let sign = if h > 0.0 {
        1.0
    } else if h < 0.0 {
        -1.0
    } else {
        0.0
    };
    grad - normal * (sign * solid_angle)
}

/// Exact integral of `1/(4π|y|)` over a ball of radius `r`, about its centre.
pub fn ball_newton_integral(radius: f64) -> f64 {
    0.5 * radius * radius
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri() -> [Vector3<f64>; 3] {
        [
            Vector3::new(0.1, -0.2, 0.05),
            Vector3::new(1.0, 0.1, -0.1),
            Vector3::new(0.3, 0.9, 0.2),
        ]
    }

    #[test]
    fn rule_weights_sum_to_one() {
        for rule in [TriangleRule::Centroid, TriangleRule::ThreePoint, TriangleRule::SevenPoint] {
            let s: f64 = rule.barycentric().iter().map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-14);
            for (b, _) in rule.barycentric() {
                assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn seven_point_rule_is_degree_five() {
        // ∫ x^a y^b over the unit right triangle = a! b! / (a + b + 2)!
        let corners = [Vector3::zeros(), Vector3::x(), Vector3::y()];
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let q: f64 = TriangleRule::SevenPoint
                    .nodes(&corners, 0.5)
                    .map(|(p, w)| w * p.x.powi(a as i32) * p.y.powi(b as i32))
                    .sum();
                assert!((q - exact).abs() < 1e-13, "x^{a} y^{b}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn weights_sum_to_triangle_areas() {
        let mesh = crate::geometry::generate_ellipsoid([1.0, 0.7, 0.4], 2).unwrap();
        for rule in [TriangleRule::Centroid, TriangleRule::ThreePoint, TriangleRule::SevenPoint] {
            let q = QuadratureRule::new(&mesh, rule);
            for t in 0..mesh.num_triangles() {
                let s: f64 = q.triangle(t).map(|(_, w)| w).sum();
                assert!((s - mesh.areas()[t]).abs() < 1e-15);
            }
            assert!((q.integrate(|_, _| 1.0) - mesh.area()).abs() < 1e-13);
        }
    }

    #[test]
    fn potential_matches_subdivision_off_plane() {
        let c = tri();
        for x in [
            Vector3::new(0.4, 0.3, 0.5),
            Vector3::new(-0.5, 1.5, -0.3),
            Vector3::new(2.0, 2.0, 2.0),
        ] {
            let exact = triangle_potential(&x, &c);
            let brute = brute::integrate(&c, 6, |y| 1.0 / (x - y).norm());
            assert!((exact - brute).abs() < 1e-6 * brute.abs(), "{exact} vs {brute}");
        }
    }

    #[test]
    fn potential_at_in_plane_points() {
        let c = tri();
        // centroid of the triangle (singular point inside) and an in-plane exterior point
        let centroid = (c[0] + c[1] + c[2]) / 3.0;
        let exact = triangle_potential(&centroid, &c);
        // integrate in polar-friendly pieces: split at the centroid so the singularity sits at vertices
        let brute: f64 = [[c[0], c[1], centroid], [c[1], c[2], centroid], [c[2], c[0], centroid]]
            .iter()
            .map(|t| brute::integrate(t, 9, |y| 1.0 / (centroid - y).norm()))
            .sum();
        assert!((exact - brute).abs() < 2e-3 * brute, "{exact} vs {brute}");

        let outside = c[1] + (c[1] - c[0]) * 0.5;
        let exact = triangle_potential(&outside, &c);
        let brute = brute::integrate(&c, 6, |y| 1.0 / (outside - y).norm());
        assert!((exact - brute).abs() < 1e-5 * brute);
    }

    #[test]
    fn equilateral_centroid_value() {
        // for an equilateral triangle of side s the centroid potential is s·√3·ln(2+√3)
        let s = 1.3;
        let c = [
            Vector3::zeros(),
            Vector3::new(s, 0.0, 0.0),
            Vector3::new(0.5 * s, 0.5 * 3f64.sqrt() * s, 0.0),
        ];
        let x = (c[0] + c[1] + c[2]) / 3.0;
        let expected = s * 3f64.sqrt() * (2.0 + 3f64.sqrt()).ln();
        assert!((triangle_potential(&x, &c) - expected).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_subdivision() {
        let c = tri();
        for x in [
            Vector3::new(0.4, 0.3, 0.5),
            Vector3::new(0.4, 0.3, -0.2),
            Vector3::new(-0.5, 1.5, -0.3),
            Vector3::new(1.2, -0.4, 0.1),
        ] {
            let exact = triangle_potential_gradient(&x, &c);
            for axis in 0..3 {
                let brute = brute::integrate(&c, 6, |y| {
                    let d = x - y;
                    -d[axis] / d.norm().powi(3)
                });
                assert!(
                    (exact[axis] - brute).abs() < 1e-5 * (1.0 + brute.abs()),
                    "axis {axis}: {} vs {brute}",
                    exact[axis]
                );
            }
        }
    }

    #[test]
    fn ball_integral_value() {
        // ∫_0^R (1/(4πr)) 4πr² dr = R²/2
        assert_eq!(ball_newton_integral(2.0), 2.0);
    }

    proptest! {
        #[test]
        fn gradient_is_derivative_of_potential(
            px in -1.0f64..2.0, py in -1.0f64..2.0, pz in 0.3f64..1.0
        ) {
            let c = tri();
            let x = Vector3::new(px, py, pz);
            let g = triangle_potential_gradient(&x, &c);
            let eps = 1e-6;
            for axis in 0..3 {
                let mut xp = x; xp[axis] += eps;
                let mut xm = x; xm[axis] -= eps;
                let fd = (triangle_potential(&xp, &c) - triangle_potential(&xm, &c)) / (2.0 * eps);
                prop_assert!((fd - g[axis]).abs() < 1e-5 * (1.0 + g[axis].abs()));
            }
        }
    }
}
