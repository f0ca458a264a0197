//! Assembly of the interior penalty DG operator in its face form, together
//! with mass matrices, the fine/coarse mixed mass matrix, the lifting
//! operator (kept as a verification path), and the DG energy norm.
//!
//! The face form of the bilinear form,
//!   A(u,v) = Σ_κ ∫ ρ ∇u·∇v − Σ_F ∫ ({ρ∇u}_ω·[v] + {ρ∇v}_ω·[u]) + Σ_F ∫ σ [u]·[v],
//! coincides with the lifting form for piecewise-constant ρ because ρ∇V_h is
//! contained in [V_h]² componentwise; the lifting route is assembled only in
//! tests/oracles.

use crate::basis::{CoefficientVector, DGSpace};
use crate::mesh::{extract_topology, Face, FaceSet, NestingMap, PolytopicMesh};
use crate::quadrature::{face_rule, polygon_rule};
use crate::sparse::{RectSparse, SparseSymMatrix};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Piecewise-constant diffusion coefficient, one value per fine cell,
/// normalized so that min ρ = ρ₀ = 1.
#[derive(Debug, Clone)]
pub struct DiffusionField {
    pub values: Vec<f64>,
}

impl DiffusionField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&r| r < 1.0 - 1e-12) {
            return Err(Error::Assembly(
                "diffusion values must satisfy rho >= 1 (scale the problem)".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn uniform(n_cells: usize) -> Self {
        Self {
            values: vec![1.0; n_cells],
        }
    }
}

/// Interior penalty data per face.
#[derive(Debug, Clone)]
pub struct PenaltyData {
    pub sigma: Vec<f64>,
    pub omega: Vec<f64>,
    pub avg_rho: Vec<f64>,
    pub avg_h: Vec<f64>,
}

/// Harmonic average across a face: 2ab/(a+b) inside, one-sided on the boundary.
pub fn harmonic_avg(a: f64, b: Option<f64>) -> Result<f64> {
    if a <= 0.0 || b.map_or(false, |b| b <= 0.0) {
        return Err(Error::Assembly("harmonic average needs positive inputs".into()));
    }
    Ok(match b {
        Some(b) => 2.0 * a * b / (a + b),
        None => a,
    })
}

/// σ|_F = C_σ ⟨ρ⟩ p² / ⟨h⟩ and ω|_F = ρ⁻/(ρ⁺+ρ⁻) (ω = 1 on the boundary).
pub fn penalty_values(
    mesh: &PolytopicMesh,
    faces: &FaceSet,
    rho: &DiffusionField,
    p: usize,
    c_sigma: f64,
) -> Result<PenaltyData> {
    if c_sigma <= 0.0 {
        return Err(Error::Assembly("penalty constant must be positive".into()));
    }
    let nf = faces.faces.len();
    let mut sigma = Vec::with_capacity(nf);
    let mut omega = Vec::with_capacity(nf);
    let mut avg_rho = Vec::with_capacity(nf);
    let mut avg_h = Vec::with_capacity(nf);
    for f in &faces.faces {
        let rp = rho.values[f.side_plus];
        let hp = mesh.cell_diameter[f.side_plus];
        let (r, h, w) = match f.side_minus {
            Some(m) => {
                let rm = rho.values[m];
                let hm = mesh.cell_diameter[m];
                (
                    harmonic_avg(rp, Some(rm))?,
                    harmonic_avg(hp, Some(hm))?,
                    rm / (rp + rm),
                )
            }
            None => (rp, hp, 1.0),
        };
        sigma.push(c_sigma * r * (p as f64) * (p as f64) / h);
        omega.push(w);
        avg_rho.push(r);
        avg_h.push(h);
    }
    Ok(PenaltyData {
        sigma,
        omega,
        avg_rho,
        avg_h,
    })
}

fn normal_grad(gx: &DMatrix<f64>, gy: &DMatrix<f64>, n: [f64; 2], i: usize, q: usize) -> f64 {
    gx[(i, q)] * n[0] + gy[(i, q)] * n[1]
}

/// Assemble the SIPDG operator with weakly imposed homogeneous Dirichlet data.
pub fn assemble_sipdg(
    space: &DGSpace,
    rho: &DiffusionField,
    c_sigma: f64,
) -> Result<SparseSymMatrix> {
    let mesh = &space.mesh;
    let p = space.degree;
    if p < 1 {
        return Err(Error::Assembly("SIPDG assembly needs degree p >= 1".into()));
    }
    let faces = extract_topology(mesh)?;
    let pen = penalty_values(mesh, &faces, rho, p, c_sigma)?;
    let nl = space.n_local;
    let mut triplets: Vec<(usize, usize, f64)> =
        Vec::with_capacity(mesh.n_cells() * nl * nl + faces.faces.len() * 4 * nl * nl);

    // volume: rho grad u . grad v
    for cell in 0..mesh.n_cells() {
        let rule = space.quad.rule(mesh, cell, 2 * p)?;
        let (gx, gy) = space.eval_grad(cell, &rule.points);
        let off = space.dof_offset(cell);
        let rc = rho.values[cell];
        let mut block = DMatrix::zeros(nl, nl);
        for (q, &w) in rule.weights.iter().enumerate() {
            for i in 0..nl {
                let gxi = gx[(i, q)];
                let gyi = gy[(i, q)];
                for j in i..nl {
                    block[(i, j)] += w * rc * (gxi * gx[(j, q)] + gyi * gy[(j, q)]);
                }
            }
        }
        for i in 0..nl {
            for j in i..nl {
                let v = block[(i, j)];
                triplets.push((off + i, off + j, v));
                if j != i {
                    triplets.push((off + j, off + i, v));
                }
            }
        }
    }

    // faces: penalty + symmetric consistency terms
    for (fid, face) in faces.faces.iter().enumerate() {
        let rule = face_rule(mesh, face, 2 * p + 1);
        let n = face.normal;
        let sigma = pen.sigma[fid];
        let omega = pen.omega[fid];
        let a = face.side_plus;
        let off_a = space.dof_offset(a);
        let va = space.eval_basis(a, &rule.points);
        let (gax, gay) = space.eval_grad(a, &rule.points);
        match face.side_minus {
            None => {
                let ra = rho.values[a];
                let mut block = DMatrix::zeros(nl, nl);
                for (q, &w) in rule.weights.iter().enumerate() {
                    for i in 0..nl {
                        let vi = va[(i, q)];
                        let di = ra * normal_grad(&gax, &gay, n, i, q);
                        for j in 0..nl {
                            let vj = va[(j, q)];
                            let dj = ra * normal_grad(&gax, &gay, n, j, q);
                            block[(i, j)] += w * (sigma * vi * vj - di * vj - dj * vi);
                        }
                    }
                }
                for i in 0..nl {
                    for j in 0..nl {
                        triplets.push((off_a + i, off_a + j, block[(i, j)]));
                    }
                }
            }
            Some(b) => {
                let off_b = space.dof_offset(b);
                let vb = space.eval_basis(b, &rule.points);
                let (gbx, gby) = space.eval_grad(b, &rule.points);
                let ra = rho.values[a];
                let rb = rho.values[b];
                // jump sign and omega-weighted flux per side
                let offs = [off_a, off_b];
                let signs = [1.0, -1.0];
                let wts = [omega * ra, (1.0 - omega) * rb];
                let vals = [&va, &vb];
                let gxs = [&gax, &gbx];
                let gys = [&gay, &gby];
                for x in 0..2 {
                    for y in 0..2 {
                        let mut block = DMatrix::zeros(nl, nl);
                        for (q, &w) in rule.weights.iter().enumerate() {
                            for i in 0..nl {
                                let vi = vals[x][(i, q)];
                                let fx = wts[x] * normal_grad(gxs[x], gys[x], n, i, q);
                                for j in 0..nl {
                                    let vj = vals[y][(j, q)];
                                    let fy = wts[y] * normal_grad(gxs[y], gys[y], n, j, q);
                                    block[(i, j)] += w
                                        * (sigma * signs[x] * vi * signs[y] * vj
                                            - fy * signs[x] * vi
                                            - fx * signs[y] * vj);
                                }
                            }
                        }
                        for i in 0..nl {
                            for j in 0..nl {
                                triplets.push((offs[x] + i, offs[y] + j, block[(i, j)]));
                            }
                        }
                    }
                }
            }
        }
    }

    let block_offsets: Vec<usize> = (0..=mesh.n_cells()).map(|k| k * nl).collect();
    Ok(SparseSymMatrix::from_triplets(
        space.n_dofs(),
        triplets,
        block_offsets,
    ))
}

/// Load vector ∫ f v for all basis functions (cell rule of degree 2p+2).
pub fn assemble_rhs(space: &DGSpace, f: impl Fn([f64; 2]) -> f64) -> Result<CoefficientVector> {
    let mut out = vec![0.0; space.n_dofs()];
    for cell in 0..space.n_cells() {
        let rule = space.quad.rule(&space.mesh, cell, 2 * space.degree + 2)?;
        let vals = space.eval_basis(cell, &rule.points);
        let off = space.dof_offset(cell);
        for (q, (&pt, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fv = f(pt);
            for i in 0..space.n_local {
                out[off + i] += w * fv * vals[(i, q)];
            }
        }
    }
    Ok(out)
}

/// Block-diagonal mass matrix; the identity under the orthonormal basis.
pub fn assemble_mass(space: &DGSpace) -> Result<SparseSymMatrix> {
    let nl = space.n_local;
    let mut triplets = Vec::with_capacity(space.n_cells() * nl * nl);
    for cell in 0..space.n_cells() {
        let rule = space.quad.rule(&space.mesh, cell, 2 * space.degree)?;
        let vals = space.eval_basis(cell, &rule.points);
        let off = space.dof_offset(cell);
        for i in 0..nl {
            for j in 0..nl {
                let m: f64 = (0..rule.points.len())
                    .map(|q| rule.weights[q] * vals[(i, q)] * vals[(j, q)])
                    .sum();
                triplets.push((off + i, off + j, m));
            }
        }
    }
    let block_offsets: Vec<usize> = (0..=space.n_cells()).map(|k| k * nl).collect();
    Ok(SparseSymMatrix::from_triplets(
        space.n_dofs(),
        triplets,
        block_offsets,
    ))
}

/// Mixed mass matrix G[i, J] = ∫ φ_i ψ_J coupling a fine and a coarse space.
///
/// Nested pairs integrate coarse polynomials over fine cells; non-nested pairs
/// integrate over the overlap polygons (centroid-fan sub-tessellated).
pub fn assemble_mixed_mass(
    fine: &DGSpace,
    coarse: &DGSpace,
    nesting: &NestingMap,
) -> Result<RectSparse> {
    let degree = fine.degree + coarse.degree;
    let mut g = RectSparse::zeros(fine.n_dofs(), coarse.n_dofs());
    let mut add_block = |g: &mut RectSparse,
                         fine_cell: usize,
                         coarse_cell: usize,
                         rule: &crate::quadrature::QuadratureRule| {
        let vf = fine.eval_basis(fine_cell, &rule.points);
        let vc = coarse.eval_basis(coarse_cell, &rule.points);
        let off_f = fine.dof_offset(fine_cell);
        let off_c = coarse.dof_offset(coarse_cell);
        for jj in 0..coarse.n_local {
            let col = &mut g.cols[off_c + jj];
            for ii in 0..fine.n_local {
                let v: f64 = (0..rule.points.len())
                    .map(|q| rule.weights[q] * vf[(ii, q)] * vc[(jj, q)])
                    .sum();
                col.push((off_f + ii, v));
            }
        }
    };
    match nesting {
        NestingMap::Nested { parent } => {
            for k in 0..fine.n_cells() {
                let rule = fine.quad.rule(&fine.mesh, k, degree)?;
                add_block(&mut g, k, parent[k], &rule);
            }
        }
        NestingMap::NonNested { overlaps } => {
            for (k, list) in overlaps.iter().enumerate() {
                if list.is_empty() {
                    return Err(Error::Assembly(format!(
                        "fine cell {k} has no overlap data"
                    )));
                }
                for (j, poly) in list {
                    let rule = polygon_rule(poly, degree)?;
                    add_block(&mut g, k, *j, &rule);
                }
            }
        }
    }
    for col in &mut g.cols {
        col.sort_by_key(|&(i, _)| i);
        // merge duplicate rows (a coarse cell can meet a fine cell in several polygons)
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for &(i, v) in col.iter() {
            if let Some(last) = merged.last_mut() {
                if last.0 == i {
                    last.1 += v;
                    continue;
                }
            }
            merged.push((i, v));
        }
        *col = merged;
    }
    Ok(g)
}

/// The discrete lifting of the jump of `v`: a vector field in [V_h]² given by
/// coefficient vectors for each component.
#[derive(Debug, Clone)]
pub struct LiftedJump {
    pub x: CoefficientVector,
    pub y: CoefficientVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LiftingWeight {
    /// ω = 1/2 on interior faces.
    Unit,
    /// ω = ρ⁻/(ρ⁺+ρ⁻).
    Weighted,
}

/// Solve ∫ R(⟦v⟧)·η = −∫_F ⟦v⟧·{η}_ω for all η ∈ [V_h]²; block-diagonal and
/// explicit under the orthonormal basis.
pub fn assemble_lifting(
    space: &DGSpace,
    weight: LiftingWeight,
    rho: &DiffusionField,
    v: &[f64],
) -> Result<LiftedJump> {
    let mesh = &space.mesh;
    let faces = extract_topology(mesh)?;
    let nl = space.n_local;
    let mut rx = vec![0.0; space.n_dofs()];
    let mut ry = vec![0.0; space.n_dofs()];
    let mut accumulate = |side: usize,
                          wt: f64,
                          vals: &DMatrix<f64>,
                          jumps: &[f64],
                          rule: &crate::quadrature::QuadratureRule,
                          n: [f64; 2],
                          rx: &mut [f64],
                          ry: &mut [f64]| {
        let off = space.dof_offset(side);
        for (q, &w) in rule.weights.iter().enumerate() {
            let jx = jumps[q] * n[0];
            let jy = jumps[q] * n[1];
            for i in 0..nl {
                let c = -w * wt * vals[(i, q)];
                rx[off + i] += c * jx;
                ry[off + i] += c * jy;
            }
        }
    };
    for face in &faces.faces {
        let rule = face_rule(mesh, face, 2 * space.degree + 1);
        let n = face.normal;
        let a = face.side_plus;
        let va = space.eval_basis(a, &rule.points);
        let ua = space.eval_function(v, a, &rule.points);
        match face.side_minus {
            None => {
                // one-sided average: {η}_ω = η_κ on the boundary
                accumulate(a, 1.0, &va, &ua, &rule, n, &mut rx, &mut ry);
            }
            Some(b) => {
                let vb = space.eval_basis(b, &rule.points);
                let ub = space.eval_function(v, b, &rule.points);
                let jumps: Vec<f64> = ua.iter().zip(&ub).map(|(p, m)| p - m).collect();
                let omega = match weight {
                    LiftingWeight::Unit => 0.5,
                    LiftingWeight::Weighted => rho.values[b] / (rho.values[a] + rho.values[b]),
                };
                accumulate(a, omega, &va, &jumps, &rule, n, &mut rx, &mut ry);
                accumulate(b, 1.0 - omega, &vb, &jumps, &rule, n, &mut rx, &mut ry);
            }
        }
    }
    Ok(LiftedJump { x: rx, y: ry })
}

/// DG energy norm ( Σ_κ ∫ ρ|∇v|² + Σ_F ∫ σ|⟦v⟧|² )^{1/2}.
pub fn energy_norm(
    space: &DGSpace,
    rho: &DiffusionField,
    c_sigma: f64,
    v: &[f64],
) -> Result<f64> {
    let mesh = &space.mesh;
    let p = space.degree.max(1);
    let faces = extract_topology(mesh)?;
    let pen = penalty_values(mesh, &faces, rho, p, c_sigma)?;
    let mut total = 0.0;
    for cell in 0..space.n_cells() {
        let rule = space.quad.rule(mesh, cell, 2 * space.degree)?;
        let (gx, gy) = space.eval_grad(cell, &rule.points);
        let off = space.dof_offset(cell);
        for (q, &w) in rule.weights.iter().enumerate() {
            let mut dx = 0.0;
            let mut dy = 0.0;
            for i in 0..space.n_local {
                dx += v[off + i] * gx[(i, q)];
                dy += v[off + i] * gy[(i, q)];
            }
            total += w * rho.values[cell] * (dx * dx + dy * dy);
        }
    }
    for (fid, face) in faces.faces.iter().enumerate() {
        let rule = face_rule(mesh, face, 2 * space.degree + 1);
        let ua = space.eval_function(v, face.side_plus, &rule.points);
        let jump: Vec<f64> = match face.side_minus {
            None => ua,
            Some(b) => {
                let ub = space.eval_function(v, b, &rule.points);
                ua.iter().zip(&ub).map(|(p, m)| p - m).collect()
            }
        };
        for (q, &w) in rule.weights.iter().enumerate() {
            total += w * pen.sigma[fid] * jump[q] * jump[q];
        }
    }
    Ok(total.sqrt())
}

/// Bilinear form value assembled through the lifting operator (test oracle for
/// the face form): ∫ ρ(∇u·∇v + ∇u·R(⟦v⟧) + ∇v·R(⟦u⟧)) + ∫ σ⟦u⟧·⟦v⟧.
pub fn lifting_form_value(
    space: &DGSpace,
    rho: &DiffusionField,
    c_sigma: f64,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    let mesh = &space.mesh;
    let p = space.degree;
    let faces = extract_topology(mesh)?;
    let pen = penalty_values(mesh, &faces, rho, p, c_sigma)?;
    let ru = assemble_lifting(space, LiftingWeight::Weighted, rho, u)?;
    let rv = assemble_lifting(space, LiftingWeight::Weighted, rho, v)?;
    let mut total = 0.0;
    for cell in 0..space.n_cells() {
        let rule = space.quad.rule(mesh, cell, 2 * p)?;
        let (gx, gy) = space.eval_grad(cell, &rule.points);
        let vals = space.eval_basis(cell, &rule.points);
        let off = space.dof_offset(cell);
        let rc = rho.values[cell];
        for (q, &w) in rule.weights.iter().enumerate() {
            let mut gu = [0.0, 0.0];
            let mut gv = [0.0, 0.0];
            let mut rupt = [0.0, 0.0];
            let mut rvpt = [0.0, 0.0];
            for i in 0..space.n_local {
                let d = off + i;
                gu[0] += u[d] * gx[(i, q)];
                gu[1] += u[d] * gy[(i, q)];
                gv[0] += v[d] * gx[(i, q)];
                gv[1] += v[d] * gy[(i, q)];
                rupt[0] += ru.x[d] * vals[(i, q)];
                rupt[1] += ru.y[d] * vals[(i, q)];
                rvpt[0] += rv.x[d] * vals[(i, q)];
                rvpt[1] += rv.y[d] * vals[(i, q)];
            }
            total += w
                * rc
                * (gu[0] * gv[0]
                    + gu[1] * gv[1]
                    + gu[0] * rvpt[0]
                    + gu[1] * rvpt[1]
                    + gv[0] * rupt[0]
                    + gv[1] * rupt[1]);
        }
    }
    for (fid, face) in faces.faces.iter().enumerate() {
        let rule = face_rule(mesh, face, 2 * p + 1);
        let jump = |w: &[f64]| -> Vec<f64> {
            let wa = space.eval_function(w, face.side_plus, &rule.points);
            match face.side_minus {
                None => wa,
                Some(b) => {
                    let wb = space.eval_function(w, b, &rule.points);
                    wa.iter().zip(&wb).map(|(p, m)| p - m).collect()
                }
            }
        };
        let ju = jump(u);
        let jv = jump(v);
        for (q, &w) in rule.weights.iter().enumerate() {
            total += w * pen.sigma[fid] * ju[q] * jv[q];
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
