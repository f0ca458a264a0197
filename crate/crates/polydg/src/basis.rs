//! Per-cell polynomial bases of total degree p in the physical frame,
//! L²-orthonormalized over each cell.
//!
//! The spanning set on each cell is the tensor Legendre family scaled to the
//! cell's bounding box, truncated to total degree p (it spans exactly P_p).
//! Orthonormalization is a two-pass Cholesky of the quadrature Gram matrix;
//! the second pass removes the first-order roundoff so the Gram of the final
//! basis is the identity to ~1e-13 even at p = 9 on skewed cells.

use crate::mesh::{PolytopicMesh, SubTessellation};
use crate::quadrature::{self, QuadratureRule};
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Coefficients of a function in a [`DGSpace`], one entry per global dof.
pub type CoefficientVector = Vec<f64>;

/// Where cell integrals for a space come from: a cell's own centroid-fan
/// sub-tessellation, or (for agglomerated coarse cells that may not be
/// star-shaped) the sub-tessellations of its fine children.
#[derive(Clone)]
pub enum CellQuadSource {
    Own(Arc<SubTessellation>),
    Children {
        fine_mesh: Arc<PolytopicMesh>,
        fine_sub: Arc<SubTessellation>,
        children: Vec<Vec<usize>>,
    },
}

impl CellQuadSource {
    pub fn rule(&self, mesh: &PolytopicMesh, cell: usize, degree: usize) -> Result<QuadratureRule> {
        match self {
            CellQuadSource::Own(sub) => quadrature::cell_rule(mesh, sub, cell, degree),
            CellQuadSource::Children {
                fine_mesh,
                fine_sub,
                children,
            } => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for &child in &children[cell] {
                    let r = quadrature::cell_rule(fine_mesh, fine_sub, child, degree)?;
                    points.extend(r.points);
                    weights.extend(r.weights);
                }
                if points.is_empty() {
                    return Err(Error::Basis(format!("coarse cell {cell} has no children")));
                }
                Ok(QuadratureRule { points, weights })
            }
        }
    }
}

/// Discontinuous space of uniform total degree `p` with an orthonormal basis
/// per cell; owns the dof numbering (cell-major blocks).
pub struct DGSpace {
    pub mesh: Arc<PolytopicMesh>,
    pub degree: usize,
    pub n_local: usize,
    /// Exponent pairs (a, b) of the spanning Legendre products, a + b <= p.
    pub exponents: Vec<(usize, usize)>,
    /// Per-cell orthonormalization matrix: phi_i = sum_j coeffs[(i,j)] L_j.
    pub coeffs: Vec<DMatrix<f64>>,
    pub quad: CellQuadSource,
}

pub fn dim_poly(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

fn exponent_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_poly(p));
    for d in 0..=p {
        for a in (0..=d).rev() {
            out.push((a, d - a));
        }
    }
    out
}

impl DGSpace {
    /// Build the space over a mesh using each cell's own sub-tessellation.
    pub fn build(mesh: Arc<PolytopicMesh>, p: usize, sub: Arc<SubTessellation>) -> Result<Self> {
        Self::build_with_source(mesh, p, CellQuadSource::Own(sub))
    }

    /// Build a coarse space over an agglomerated mesh, integrating over the
    /// fine children of every coarse cell.
    pub fn build_agglomerated(
        coarse: Arc<PolytopicMesh>,
        q: usize,
        fine_mesh: Arc<PolytopicMesh>,
        fine_sub: Arc<SubTessellation>,
        parent: &[usize],
    ) -> Result<Self> {
        let mut children = vec![Vec::new(); coarse.n_cells()];
        for (k, &j) in parent.iter().enumerate() {
            children[j].push(k);
        }
        Self::build_with_source(
            coarse,
            q,
            CellQuadSource::Children {
                fine_mesh,
                fine_sub,
                children,
            },
        )
    }

    pub fn build_with_source(
        mesh: Arc<PolytopicMesh>,
        p: usize,
        quad: CellQuadSource,
    ) -> Result<Self> {
        let n_local = dim_poly(p);
        let exponents = exponent_pairs(p);
        let mut coeffs = Vec::with_capacity(mesh.n_cells());
        for cell in 0..mesh.n_cells() {
            let rule = quad.rule(&mesh, cell, 2 * p)?;
            let raw = raw_values(&mesh, &exponents, cell, &rule.points);
            let c1 = orthonormalize(&raw, &rule.weights, cell)?;
            // second pass on the transformed basis
            let v1 = &c1 * &raw;
            let c2 = orthonormalize(&v1, &rule.weights, cell)?;
            coeffs.push(&c2 * &c1);
        }
        Ok(Self {
            mesh,
            degree: p,
            n_local,
            exponents,
            coeffs,
            quad,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_local * self.mesh.n_cells()
    }

    pub fn dof_offset(&self, cell: usize) -> usize {
        cell * self.n_local
    }

    /// Values of all local basis functions at the given points
    /// (`n_local` x `n_points`).
    pub fn eval_basis(&self, cell: usize, points: &[[f64; 2]]) -> DMatrix<f64> {
        let raw = raw_values(&self.mesh, &self.exponents, cell, points);
        &self.coeffs[cell] * raw
    }

    /// Gradients of all local basis functions: (d/dx, d/dy) matrices.
    pub fn eval_grad(&self, cell: usize, points: &[[f64; 2]]) -> (DMatrix<f64>, DMatrix<f64>) {
        let (gx, gy) = raw_gradients(&self.mesh, &self.exponents, cell, points);
        (&self.coeffs[cell] * gx, &self.coeffs[cell] * gy)
    }

    /// Evaluate a coefficient vector at points inside one cell.
    pub fn eval_function(&self, coeff: &[f64], cell: usize, points: &[[f64; 2]]) -> Vec<f64> {
        let vals = self.eval_basis(cell, points);
        let off = self.dof_offset(cell);
        (0..points.len())
            .map(|q| {
                (0..self.n_local)
                    .map(|i| coeff[off + i] * vals[(i, q)])
                    .sum()
            })
            .collect()
    }

    /// L² projection of a scalar field onto the space.
    pub fn project(&self, f: impl Fn([f64; 2]) -> f64) -> Result<CoefficientVector> {
        let mut out = vec![0.0; self.n_dofs()];
        for cell in 0..self.n_cells() {
            let rule = self.quad.rule(&self.mesh, cell, 2 * self.degree + 2)?;
            let vals = self.eval_basis(cell, &rule.points);
            let off = self.dof_offset(cell);
            for (q, (&pt, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let fv = f(pt);
                for i in 0..self.n_local {
                    out[off + i] += w * fv * vals[(i, q)];
                }
            }
        }
        Ok(out)
    }

    /// L² norm of (u_h - exact) over the mesh.
    pub fn l2_error(
        &self,
        coeff: &[f64],
        exact: impl Fn([f64; 2]) -> f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        for cell in 0..self.n_cells() {
            let rule = self.quad.rule(&self.mesh, cell, 2 * self.degree + 4)?;
            let vals = self.eval_function(coeff, cell, &rule.points);
            for ((&pt, &w), uh) in rule.points.iter().zip(&rule.weights).zip(vals) {
                let d = uh - exact(pt);
                total += w * d * d;
            }
        }
        Ok(total.sqrt())
    }

    /// Coefficients of the global constant 1.
    pub fn constant_one(&self) -> CoefficientVector {
        let mut out = vec![0.0; self.n_dofs()];
        for cell in 0..self.n_cells() {
            // the first basis function is the normalized constant 1/sqrt(|k|)
            out[self.dof_offset(cell)] = self.mesh.cell_area[cell].sqrt();
        }
        out
    }
}

fn orthonormalize(
    vals: &DMatrix<f64>,
    weights: &[f64],
    cell: usize,
) -> Result<DMatrix<f64>> {
    let n = vals.nrows();
    let mut gram = DMatrix::zeros(n, n);
    for q in 0..weights.len() {
        let w = weights[q];
        for i in 0..n {
            let vi = vals[(i, q)] * w;
            for j in i..n {
                gram[(i, j)] += vi * vals[(j, q)];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| {
        Error::Basis(format!(
            "Gram factorization failed on cell {cell} (degenerate cell or insufficient quadrature)"
        ))
    })?;
    // C = L^{-1} so that C G C^T = I
    let mut c = DMatrix::identity(n, n);
    chol.l().solve_lower_triangular_mut(&mut c);
    Ok(c)
}

/// Bounding-box map of a cell: center and half-widths.
fn bbox_frame(mesh: &PolytopicMesh, cell: usize) -> ([f64; 2], [f64; 2]) {
    let (lo, hi) = mesh.cell_bbox[cell];
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let half = [
        (0.5 * (hi[0] - lo[0])).max(1e-300),
        (0.5 * (hi[1] - lo[1])).max(1e-300),
    ];
    (center, half)
}

/// Legendre values P_0..P_n and derivatives at t.
fn legendre_all(n: usize, t: f64, vals: &mut [f64], ders: &mut [f64]) {
    vals[0] = 1.0;
    ders[0] = 0.0;
    if n == 0 {
        return;
    }
    vals[1] = t;
    ders[1] = 1.0;
    for k in 2..=n {
        let kf = k as f64;
        vals[k] = ((2.0 * kf - 1.0) * t * vals[k - 1] - (kf - 1.0) * vals[k - 2]) / kf;
        ders[k] = ders[k - 2] + (2.0 * kf - 1.0) * vals[k - 1];
    }
}

fn raw_values(
    mesh: &PolytopicMesh,
    exponents: &[(usize, usize)],
    cell: usize,
    points: &[[f64; 2]],
) -> DMatrix<f64> {
    let p = exponents.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
    let (center, half) = bbox_frame(mesh, cell);
    let mut out = DMatrix::zeros(exponents.len(), points.len());
    let mut px = vec![0.0; p + 1];
    let mut py = vec![0.0; p + 1];
    let mut scratch = vec![0.0; p + 1];
    for (q, pt) in points.iter().enumerate() {
        let xi = (pt[0] - center[0]) / half[0];
        let eta = (pt[1] - center[1]) / half[1];
        legendre_all(p, xi, &mut px, &mut scratch);
        legendre_all(p, eta, &mut py, &mut scratch);
        for (i, &(a, b)) in exponents.iter().enumerate() {
            out[(i, q)] = px[a] * py[b];
        }
    }
    out
}

fn raw_gradients(
    mesh: &PolytopicMesh,
    exponents: &[(usize, usize)],
    cell: usize,
    points: &[[f64; 2]],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = exponents.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
    let (center, half) = bbox_frame(mesh, cell);
    let mut gx = DMatrix::zeros(exponents.len(), points.len());
    let mut gy = DMatrix::zeros(exponents.len(), points.len());
    let mut px = vec![0.0; p + 1];
    let mut py = vec![0.0; p + 1];
    let mut dx = vec![0.0; p + 1];
    let mut dy = vec![0.0; p + 1];
    for (q, pt) in points.iter().enumerate() {
        let xi = (pt[0] - center[0]) / half[0];
        let eta = (pt[1] - center[1]) / half[1];
        legendre_all(p, xi, &mut px, &mut dx);
        legendre_all(p, eta, &mut py, &mut dy);
        for (i, &(a, b)) in exponents.iter().enumerate() {
            gx[(i, q)] = dx[a] * py[b] / half[0];
            gy[(i, q)] = px[a] * dy[b] / half[1];
        }
    }
    (gx, gy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_voronoi, subtessellate, Domain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn voronoi_space(n: usize, seed: u64, p: usize) -> DGSpace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let mesh = Arc::new(generate_voronoi(&seeds, &Domain::unit_square(), 2).unwrap());
        let sub = Arc::new(subtessellate(&mesh).unwrap());
        DGSpace::build(mesh, p, sub).unwrap()
    }

    #[test]
    fn p0_basis_is_normalized_constant() {
        let space = voronoi_space(5, 3, 0);
        for cell in 0..space.n_cells() {
            let vals = space.eval_basis(cell, &[space.mesh.cell_centroid(cell)]);
            let expected = 1.0 / space.mesh.cell_area[cell].sqrt();
            assert!((vals[(0, 0)] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn local_dimension_matches_total_degree_space() {
        assert_eq!(dim_poly(1), 3);
        assert_eq!(dim_poly(3), 10);
        let space = voronoi_space(4, 1, 3);
        assert_eq!(space.n_local, 10);
        assert_eq!(space.n_dofs(), 40);
    }

    #[test]
    fn gram_is_identity_after_orthonormalization() {
        for p in [1, 3, 5, 9] {
            let space = voronoi_space(6, 17, p);
            for cell in 0..space.n_cells() {
                let rule = space.quad.rule(&space.mesh, cell, 2 * p).unwrap();
                let vals = space.eval_basis(cell, &rule.points);
                for i in 0..space.n_local {
                    for j in 0..space.n_local {
                        let g: f64 = (0..rule.points.len())
                            .map(|q| rule.weights[q] * vals[(i, q)] * vals[(j, q)])
                            .sum();
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (g - expected).abs() < 1e-10,
                            "p={p} cell={cell} G[{i},{j}] = {g}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn p0_gradient_vanishes() {
        let space = voronoi_space(4, 5, 0);
        let (gx, gy) = space.eval_grad(0, &[space.mesh.cell_centroid(0)]);
        assert_eq!(gx[(0, 0)], 0.0);
        assert_eq!(gy[(0, 0)], 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let space = voronoi_space(5, 11, 3);
        let h = 1e-6;
        for cell in 0..space.n_cells() {
            let c = space.mesh.cell_centroid(cell);
            let (gx, gy) = space.eval_grad(cell, &[c]);
            let vxp = space.eval_basis(cell, &[[c[0] + h, c[1]]]);
            let vxm = space.eval_basis(cell, &[[c[0] - h, c[1]]]);
            let vyp = space.eval_basis(cell, &[[c[0], c[1] + h]]);
            let vym = space.eval_basis(cell, &[[c[0], c[1] - h]]);
            for i in 0..space.n_local {
                let fdx = (vxp[(i, 0)] - vxm[(i, 0)]) / (2.0 * h);
                let fdy = (vyp[(i, 0)] - vym[(i, 0)]) / (2.0 * h);
                let scale = gx[(i, 0)].abs().max(gy[(i, 0)].abs()).max(1.0);
                assert!((gx[(i, 0)] - fdx).abs() < 1e-6 * scale);
                assert!((gy[(i, 0)] - fdy).abs() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn constant_one_evaluates_to_one() {
        let space = voronoi_space(7, 23, 2);
        let one = space.constant_one();
        for cell in 0..space.n_cells() {
            let vals = space.eval_function(&one, cell, &[space.mesh.cell_centroid(cell)]);
            assert!((vals[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let space = voronoi_space(6, 29, 3);
        // total degree 3 polynomial
        let f = |p: [f64; 2]| 1.0 - 2.0 * p[0] + 0.7 * p[1] * p[1] + 0.3 * p[0] * p[0] * p[1];
        let coeff = space.project(f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for cell in 0..space.n_cells() {
            let c = space.mesh.cell_centroid(cell);
            let jitter: Vec<[f64; 2]> = (0..5)
                .map(|_| {
                    [
                        c[0] + rng.random_range(-0.01..0.01),
                        c[1] + rng.random_range(-0.01..0.01),
                    ]
                })
                .collect();
            let vals = space.eval_function(&coeff, cell, &jitter);
            for (pt, uh) in jitter.iter().zip(vals) {
                assert!((uh - f(*pt)).abs() < 1e-10, "cell {cell}");
            }
        }
    }
}
