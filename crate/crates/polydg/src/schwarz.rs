//! Two-level non-overlapping additive Schwarz preconditioner: exact block
//! solvers on a subdomain partition of the fine mesh plus an exact coarse
//! solve transferred through the L² prolongation.

use crate::assembly::{assemble_mixed_mass, DiffusionField};
use crate::basis::DGSpace;
use crate::mesh::{coloring_bound, extract_topology, NestingMap, Partition};
use crate::sparse::{RectSparse, SparseSymMatrix};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Inputs of the condition number bound.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub p: usize,
    pub q: usize,
    /// Fine mesh size h.
    pub h: f64,
    /// Coarse mesh size H.
    pub coarse_h: f64,
    /// Subdomain partition size (equals h in the massively parallel case).
    pub subdomain_h: f64,
    pub n_s: usize,
    /// max_j (max rho / min rho) over the coarse cells.
    pub rho_ratio: f64,
    pub nested: bool,
}

/// Bracketed factor of the condition number bound (up to the hidden constant):
/// nested `ratio (p²H/(qh) + p²H²/(q²h𝕳)) (N_S+1)`, non-nested
/// `(p⁴H²/(q²h²)) (N_S+1)`.
pub fn theoretical_bound(inputs: &BoundInputs) -> f64 {
    let p = inputs.p as f64;
    let q = inputs.q as f64;
    let ns = (inputs.n_s + 1) as f64;
    if inputs.nested {
        inputs.rho_ratio
            * (p * p * inputs.coarse_h / (q * inputs.h)
                + p * p * inputs.coarse_h * inputs.coarse_h
                    / (q * q * inputs.h * inputs.subdomain_h))
            * ns
    } else {
        (p.powi(4) * inputs.coarse_h * inputs.coarse_h / (q * q * inputs.h * inputs.h)) * ns
    }
}

/// max over coarse cells of the ratio between the largest and smallest fine
/// diffusion value seen by that cell.
pub fn rho_ratio_per_coarse(
    rho: &DiffusionField,
    nesting: &NestingMap,
    n_coarse: usize,
) -> f64 {
    let children = nesting.children_of(n_coarse);
    let mut worst = 1.0f64;
    for list in &children {
        if list.is_empty() {
            continue;
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &k in list {
            lo = lo.min(rho.values[k]);
            hi = hi.max(rho.values[k]);
        }
        worst = worst.max(hi / lo);
    }
    worst
}

/// L²-prolongation matrix from the coarse to the fine space. With the
/// orthonormal fine basis the mass solve is trivial and Q equals the mixed
/// mass matrix.
pub fn build_prolongation(
    fine: &DGSpace,
    coarse: &DGSpace,
    nesting: &NestingMap,
) -> Result<RectSparse> {
    let q = assemble_mixed_mass(fine, coarse, nesting)?;
    q.check_no_empty_columns()?;
    Ok(q)
}

/// A₀ = QᵀAQ, Cholesky-factorized.
pub fn build_coarse_operator(
    a: &SparseSymMatrix,
    q: &RectSparse,
) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    let n0 = q.ncols;
    let mut a0 = DMatrix::zeros(n0, n0);
    let mut y = vec![0.0; q.nrows];
    for j in 0..n0 {
        for v in y.iter_mut() {
            *v = 0.0;
        }
        // y = A q_j using the rows of the symmetric A indexed by the column support
        for &(i, v) in &q.cols[j] {
            for idx in a.row_ptr[i]..a.row_ptr[i + 1] {
                y[a.col_idx[idx]] += v * a.vals[idx];
            }
        }
        for k in 0..n0 {
            let mut acc = 0.0;
            for &(i, v) in &q.cols[k] {
                acc += v * y[i];
            }
            a0[(k, j)] = acc;
        }
    }
    let asym = (0..n0)
        .flat_map(|i| (0..n0).map(move |j| (i, j)))
        .map(|(i, j)| (a0[(i, j)] - a0[(j, i)]).abs())
        .fold(0.0f64, f64::max);
    let scale = a0.amax();
    if asym > 1e-12 * scale.max(1e-300) {
        return Err(Error::Schwarz(format!(
            "coarse operator asymmetry {asym:.3e} exceeds tolerance"
        )));
    }
    let a0 = (&a0 + a0.transpose()) * 0.5;
    let chol = Cholesky::new(a0.clone())
        .ok_or_else(|| Error::Schwarz("coarse operator is indefinite".into()))?;
    Ok((a0, chol))
}

/// Exact solvers for the principal submatrices on the subdomain dof sets.
pub fn build_local_solvers(
    a: &SparseSymMatrix,
    partition: &Partition,
    fine: &DGSpace,
) -> Result<Vec<(Vec<usize>, Cholesky<f64, Dyn>)>> {
    let nl = fine.n_local;
    let mut out = Vec::with_capacity(partition.n_parts);
    for p in 0..partition.n_parts {
        let mut dofs = Vec::new();
        for cell in partition.cells_of_part(p) {
            let off = fine.dof_offset(cell);
            dofs.extend(off..off + nl);
        }
        let block = a.principal_submatrix(&dofs);
        let chol = Cholesky::new(block).ok_or_else(|| {
            Error::Schwarz(format!("local block {p} is not positive definite"))
        })?;
        out.push((dofs, chol));
    }
    Ok(out)
}

/// Built preconditioner: subdomain partition, factorized local blocks,
/// prolongation and factorized coarse operator.
pub struct SchwarzSetup {
    pub n: usize,
    pub partition: Partition,
    pub dof_sets: Vec<Vec<usize>>,
    local: Vec<Cholesky<f64, Dyn>>,
    pub prolongation: Option<RectSparse>,
    coarse: Option<Cholesky<f64, Dyn>>,
    pub use_coarse: bool,
    pub use_local: bool,
    pub n_s: usize,
}

impl SchwarzSetup {
    /// Build local solvers over `partition` and, when a coarse space is given,
    /// the coarse solve A₀ = QᵀAQ.
    pub fn build(
        a: &SparseSymMatrix,
        fine: &DGSpace,
        partition: Partition,
        coarse: Option<(&DGSpace, &NestingMap)>,
        use_local: bool,
        use_coarse: bool,
    ) -> Result<Self> {
        if use_coarse && coarse.is_none() {
            return Err(Error::Schwarz("coarse correction requested without a coarse space".into()));
        }
        let locals = build_local_solvers(a, &partition, fine)?;
        let (dof_sets, local): (Vec<_>, Vec<_>) = locals.into_iter().unzip();
        // dof sets must partition 1..n
        let mut seen = vec![false; a.n];
        for set in &dof_sets {
            for &d in set {
                if seen[d] {
                    return Err(Error::Schwarz(format!("dof {d} appears in two subdomains")));
                }
                seen[d] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Schwarz("subdomain dof sets do not cover all dofs".into()));
        }
        let (prolongation, coarse_chol) = match coarse {
            Some((coarse_space, nesting)) => {
                let q = build_prolongation(fine, coarse_space, nesting)?;
                let (_, chol) = build_coarse_operator(a, &q)?;
                (Some(q), Some(chol))
            }
            None => (None, None),
        };
        let faces = extract_topology(&fine.mesh)?;
        let n_s = coloring_bound(&partition, &faces);
        Ok(SchwarzSetup {
            n: a.n,
            partition,
            dof_sets,
            local,
            prolongation,
            coarse: coarse_chol,
            use_coarse,
            use_local,
            n_s,
        })
    }

    pub fn coarse_dim(&self) -> usize {
        self.prolongation.as_ref().map_or(0, |q| q.ncols)
    }

    /// z = [coarse] Q A₀⁻¹ Qᵀ r + [local] Σ_i scatter_i(A_i⁻¹ gather_i(r)).
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.n);
        let mut z = vec![0.0; self.n];
        if self.use_local {
            for (dofs, chol) in self.dof_sets.iter().zip(&self.local) {
                let rb = DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| r[d]));
                let xb = chol.solve(&rb);
                for (a, &d) in dofs.iter().enumerate() {
                    z[d] += xb[a];
                }
            }
        }
        if self.use_coarse {
            let q = self.prolongation.as_ref().unwrap();
            let rc = q.apply_transpose(r);
            let xc = self
                .coarse
                .as_ref()
                .unwrap()
                .solve(&DVector::from_vec(rc));
            let zc = q.apply(xc.as_slice());
            for i in 0..self.n {
                z[i] += zc[i];
            }
        }
        z
    }

    /// Setup statistics as JSON.
    pub fn stats_json(&self) -> String {
        let block_sizes: Vec<usize> = self.dof_sets.iter().map(|s| s.len()).collect();
        serde_json::json!({
            "n_dofs": self.n,
            "n_subdomains": self.dof_sets.len(),
            "coloring_ns": self.n_s,
            "coarse_dim": self.coarse_dim(),
            "use_local": self.use_local,
            "use_coarse": self.use_coarse,
            "min_block": block_sizes.iter().min(),
            "max_block": block_sizes.iter().max(),
        })
        .to_string()
    }
}
