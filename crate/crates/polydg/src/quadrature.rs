//! Quadrature exact to a requested polynomial degree on segments, the
//! reference triangle (collapsed Gauss product), and polygons via their
//! centroid-fan sub-tessellation.

use crate::geometry::Point;
use crate::mesh::{Face, PolytopicMesh, SubTessellation};
use crate::{Error, Result};

pub const MAX_SIMPLEX_DEGREE: usize = 20;

/// Points and weights in physical coordinates; weights carry the measure of
/// the integration region.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre nodes/weights on [-1, 1], exact to degree 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Rule on the reference triangle {x, y >= 0, x + y <= 1}, exact for all
/// bivariate polynomials of total degree <= `degree`.
///
/// Collapsed Gauss product through the Duffy map x = u(1-v), y = uv with
/// Jacobian u; all weights are positive.
pub fn simplex_rule(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_SIMPLEX_DEGREE {
        return Err(Error::Quadrature(format!(
            "simplex rule degree {degree} exceeds supported maximum {MAX_SIMPLEX_DEGREE}"
        )));
    }
    // integrand picks up one extra power of u from the Jacobian
    let nu = (degree + 2).div_ceil(2);
    let nv = (degree + 1).div_ceil(2).max(1);
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (ui, uwi) in xu.iter().zip(&wu) {
        let u = 0.5 * (ui + 1.0);
        let du = 0.5 * uwi;
        for (vi, vwi) in xv.iter().zip(&wv) {
            let v = 0.5 * (vi + 1.0);
            let dv = 0.5 * vwi;
            points.push([u * (1.0 - v), u * v]);
            weights.push(du * dv * u);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Composite rule over a polygonal cell: the reference-triangle rule mapped
/// affinely onto every triangle of the cell's centroid fan.
pub fn cell_rule(
    _mesh: &PolytopicMesh,
    subtess: &SubTessellation,
    cell: usize,
    degree: usize,
) -> Result<QuadratureRule> {
    let reference = simplex_rule(degree)?;
    Ok(triangles_rule(&subtess.triangles[cell], &reference))
}

/// Map a reference rule onto a list of physical triangles.
pub fn triangles_rule(triangles: &[[Point; 3]], reference: &QuadratureRule) -> QuadratureRule {
    let npts = reference.points.len() * triangles.len();
    let mut points = Vec::with_capacity(npts);
    let mut weights = Vec::with_capacity(npts);
    for tri in triangles {
        let [a, b, c] = *tri;
        let jac = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        for (p, w) in reference.points.iter().zip(&reference.weights) {
            points.push([
                a[0] + (b[0] - a[0]) * p[0] + (c[0] - a[0]) * p[1],
                a[1] + (b[1] - a[1]) * p[0] + (c[1] - a[1]) * p[1],
            ]);
            weights.push(w * jac.abs());
        }
    }
    QuadratureRule { points, weights }
}

/// Rule over an arbitrary star-shaped polygon via its own centroid fan.
pub fn polygon_rule(polygon: &[Point], degree: usize) -> Result<QuadratureRule> {
    let c = crate::geometry::polygon_centroid(polygon);
    let n = polygon.len();
    let tris: Vec<[Point; 3]> = (0..n)
        .map(|i| [c, polygon[i], polygon[(i + 1) % n]])
        .collect();
    let reference = simplex_rule(degree)?;
    Ok(triangles_rule(&tris, &reference))
}

/// Gauss–Legendre rule along a mesh face, exact to `degree` in the arclength
/// parameter.
pub fn face_rule(mesh: &PolytopicMesh, face: &Face, degree: usize) -> QuadratureRule {
    segment_rule(
        mesh.vertices[face.endpoints[0]],
        mesh.vertices[face.endpoints[1]],
        degree,
    )
}

pub fn segment_rule(a: Point, b: Point, degree: usize) -> QuadratureRule {
    let n = (degree + 1).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let half = [0.5 * (b[0] - a[0]), 0.5 * (b[1] - a[1])];
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let len = (half[0].hypot(half[1])) * 2.0;
    let points = x
        .iter()
        .map(|&t| [mid[0] + t * half[0], mid[1] + t * half[1]])
        .collect();
    let weights = w.iter().map(|&wi| 0.5 * len * wi).collect();
    QuadratureRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;
    use crate::mesh::{generate_voronoi, subtessellate, Domain};

    /// factorial as f64 (small arguments only)
    fn fact(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
    }

    /// Exact integral of x^a y^b over the reference triangle.
    fn tri_monomial(a: usize, b: usize) -> f64 {
        fact(a) * fact(b) / fact(a + b + 2)
    }

    /// Green's theorem oracle: integral of x^a y^b over a polygon reduced to
    /// exact 1D edge integrals of x^{a+1} y^b / (a+1) against n_x.
    fn greens_monomial(poly: &[geometry::Point], a: usize, b: usize) -> f64 {
        let n = poly.len();
        let mut total = 0.0;
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let rule = segment_rule(p, q, a + b + 2);
            let e = geometry::sub(q, p);
            let len = geometry::norm(e);
            let nx = e[1] / len;
            total += rule.integrate(|pt| pt[0].powi(a as i32 + 1) * pt[1].powi(b as i32) * nx);
        }
        total / (a as f64 + 1.0)
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for d in 0..=(2 * n - 1) {
                let integral: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(d as i32)).sum();
                let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                assert!(
                    (integral - exact).abs() < 1e-13,
                    "n={n} d={d}: {integral} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn simplex_constant_and_linear() {
        let r0 = simplex_rule(0).unwrap();
        assert!((r0.total_weight() - 0.5).abs() < 1e-15);
        let r1 = simplex_rule(1).unwrap();
        assert!((r1.integrate(|p| p[0]) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn simplex_monomial_exactness_up_to_20() {
        for d in 0..=MAX_SIMPLEX_DEGREE {
            let rule = simplex_rule(d).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=d {
                for b in 0..=(d - a) {
                    let num = rule.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    let exact = tri_monomial(a, b);
                    assert!(
                        (num - exact).abs() < 1e-12 * exact.abs().max(1.0),
                        "d={d} a={a} b={b}: {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn simplex_degree_cap() {
        assert!(simplex_rule(21).is_err());
    }

    #[test]
    fn cell_rule_measures_and_first_moment() {
        let seeds = [[0.25, 0.25], [0.75, 0.3], [0.4, 0.8]];
        let mesh = generate_voronoi(&seeds, &Domain::unit_square(), 0).unwrap();
        let sub = subtessellate(&mesh).unwrap();
        for k in 0..mesh.n_cells() {
            let rule = cell_rule(&mesh, &sub, k, 0).unwrap();
            assert!((rule.total_weight() - mesh.cell_area[k]).abs() < 1e-13);
        }
        // unit square: integral of x is 1/2
        let sq = crate::mesh::generate_structured(crate::mesh::StructuredKind::Quad, 1).unwrap();
        let sub = subtessellate(&sq).unwrap();
        let rule = cell_rule(&sq, &sub, 0, 1).unwrap();
        assert!((rule.integrate(|p| p[0]) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cell_rule_matches_greens_oracle_on_random_polygons() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20 {
            let seeds: Vec<geometry::Point> = (0..6)
                .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
                .collect();
            let mesh = match generate_voronoi(&seeds, &Domain::unit_square(), 1) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let sub = subtessellate(&mesh).unwrap();
            for k in 0..mesh.n_cells() {
                let poly = mesh.cell_polygon(k);
                for (a, b) in [(0, 0), (1, 0), (2, 1), (3, 3), (0, 4)] {
                    let rule = cell_rule(&mesh, &sub, k, a + b).unwrap();
                    let num = rule.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    let exact = greens_monomial(&poly, a, b);
                    assert!(
                        (num - exact).abs() < 1e-12 * exact.abs().max(1.0),
                        "trial {trial} cell {k} x^{a} y^{b}: {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn segment_rule_cases() {
        let r = segment_rule([0.0, 0.0], [1.0, 0.0], 1);
        assert!((r.total_weight() - 1.0).abs() < 1e-15);
        assert!((r.integrate(|p| p[0]) - 0.5).abs() < 1e-15);
        // degree 2k+1 exactness on a slanted segment
        let a = [0.2, -0.3];
        let b = [1.1, 0.8];
        let len = geometry::dist(a, b);
        for deg in 0..=9 {
            let r = segment_rule(a, b, deg);
            // arclength-parameter monomial s^deg over [0, L]
            let num = r.integrate(|p| {
                let s = geometry::dist(p, a);
                s.powi(deg as i32)
            });
            let exact = len.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((num - exact).abs() < 1e-12 * exact.max(1.0));
        }
    }
}
