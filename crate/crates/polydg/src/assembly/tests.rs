use super::*;
use crate::mesh::{generate_structured, generate_voronoi, subtessellate, Domain, StructuredKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn quad_space(n: u64, p: usize) -> DGSpace {
    let mesh = Arc::new(generate_structured(StructuredKind::Quad, n).unwrap());
    let sub = Arc::new(subtessellate(&mesh).unwrap());
    DGSpace::build(mesh, p, sub).unwrap()
}

fn voronoi_space(n: usize, seed: u64, p: usize) -> DGSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let mesh = Arc::new(generate_voronoi(&seeds, &Domain::unit_square(), 2).unwrap());
    let sub = Arc::new(subtessellate(&mesh).unwrap());
    DGSpace::build(mesh, p, sub).unwrap()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn harmonic_average_cases() {
    assert!((harmonic_avg(1.0, Some(1.0)).unwrap() - 1.0).abs() < 1e-15);
    assert!((harmonic_avg(1.0, Some(3.0)).unwrap() - 1.5).abs() < 1e-15);
    assert!((harmonic_avg(2.5, None).unwrap() - 2.5).abs() < 1e-15);
    assert!(harmonic_avg(-1.0, Some(1.0)).is_err());
    assert!(harmonic_avg(1.0, Some(0.0)).is_err());
}

#[test]
fn penalty_formula_cases() {
    // two unit-ish cells with equal diameters 0.1 via a fabricated mesh is
    // awkward; check the formula through a two-cell strip scaled to h = 0.1.
    let vertices = vec![
        [0.0, 0.0],
        [0.06, 0.0],
        [0.12, 0.0],
        [0.0, 0.08],
        [0.06, 0.08],
        [0.12, 0.08],
    ];
    let cells = vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]];
    let mesh = crate::mesh::PolytopicMesh::from_cells(vertices, cells).unwrap();
    // both diameters are 0.1 (3-4-5 scaled)
    assert!((mesh.cell_diameter[0] - 0.1).abs() < 1e-15);
    let faces = extract_topology(&mesh).unwrap();
    let rho = DiffusionField::uniform(2);
    let pen = penalty_values(&mesh, &faces, &rho, 1, 10.0).unwrap();
    for (fid, f) in faces.faces.iter().enumerate() {
        if !f.is_boundary() {
            assert!((pen.sigma[fid] - 100.0).abs() < 1e-10);
            assert!((pen.omega[fid] - 0.5).abs() < 1e-15);
        }
    }
    // boundary face with rho = 2, p = 2
    let rho2 = DiffusionField::new(vec![2.0, 2.0]).unwrap();
    let pen2 = penalty_values(&mesh, &faces, &rho2, 2, 10.0).unwrap();
    let bid = faces.faces.iter().position(|f| f.is_boundary()).unwrap();
    assert!((pen2.sigma[bid] - 800.0).abs() < 1e-9);
    assert!((pen2.omega[bid] - 1.0).abs() < 1e-15);
}

#[test]
fn penalty_strong_jump_limit() {
    let vertices = vec![
        [0.0, 0.0],
        [1.0, 0.0],
        [2.0, 0.0],
        [0.0, 1.0],
        [1.0, 1.0],
        [2.0, 1.0],
    ];
    let cells = vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]];
    let mesh = crate::mesh::PolytopicMesh::from_cells(vertices, cells).unwrap();
    let faces = extract_topology(&mesh).unwrap();
    let rho = DiffusionField::new(vec![1.0, 1e6]).unwrap();
    let pen = penalty_values(&mesh, &faces, &rho, 1, 10.0).unwrap();
    let fid = faces.faces.iter().position(|f| !f.is_boundary()).unwrap();
    let expect = 2.0 * 1e6 / (1.0 + 1e6);
    assert!((pen.avg_rho[fid] - expect).abs() < 1e-9);
    assert!((pen.omega[fid] - 1e6 / (1.0 + 1e6)).abs() < 1e-12);
}

#[test]
fn sipdg_is_symmetric() {
    let space = voronoi_space(24, 3, 2);
    let rho = DiffusionField::uniform(space.n_cells());
    let a = assemble_sipdg(&space, &rho, 10.0).unwrap();
    assert!(a.max_asymmetry() <= 1e-12 * a.max_abs());
}

#[test]
fn sipdg_2x2_p1_is_positive_definite() {
    let space = quad_space(2, 1);
    let rho = DiffusionField::uniform(4);
    let a = assemble_sipdg(&space, &rho, 10.0).unwrap();
    assert_eq!(a.n, 12);
    let dense = a.to_dense();
    let eig = nalgebra::SymmetricEigen::new(dense);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "smallest eigenvalue {min}");
}

#[test]
fn sipdg_rejects_p0() {
    let space = quad_space(2, 0);
    let rho = DiffusionField::uniform(4);
    assert!(assemble_sipdg(&space, &rho, 10.0).is_err());
}

#[test]
fn penalty_doubling_increases_jump_energy() {
    let space = voronoi_space(10, 7, 1);
    let rho = DiffusionField::uniform(space.n_cells());
    let a1 = assemble_sipdg(&space, &rho, 10.0).unwrap();
    let a2 = assemble_sipdg(&space, &rho, 20.0).unwrap();
    assert!(a2.max_asymmetry() <= 1e-12 * a2.max_abs());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let v = random_vec(space.n_dofs(), &mut rng);
        // discontinuous random vectors always carry jumps
        assert!(a2.quadratic_form(&v) > a1.quadratic_form(&v));
    }
}

#[test]
fn rhs_cases() {
    let space = quad_space(2, 1);
    let zero = assemble_rhs(&space, |_| 0.0).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));

    let space0 = quad_space(2, 0);
    let one = assemble_rhs(&space0, |_| 1.0).unwrap();
    for cell in 0..4 {
        let expected = space0.mesh.cell_area[cell].sqrt();
        assert!((one[space0.dof_offset(cell)] - expected).abs() < 1e-13);
    }
}

#[test]
fn mass_matrix_is_identity() {
    let space = voronoi_space(12, 5, 3);
    let m = assemble_mass(&space).unwrap();
    let mut worst = 0.0f64;
    for i in 0..m.n {
        for j in 0..m.n {
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m.get(i, j) - expected).abs());
        }
    }
    assert!(worst < 1e-10, "max |M - I| = {worst}");

    // v = 1: v^T M v = |Omega|
    let one = space.constant_one();
    let q = m.quadratic_form(&one);
    assert!((q - 1.0).abs() < 1e-10);

    // random v: v^T M v = ∫ v² by direct quadrature
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v = random_vec(space.n_dofs(), &mut rng);
    let qf = m.quadratic_form(&v);
    let mut direct = 0.0;
    for cell in 0..space.n_cells() {
        let rule = space.quad.rule(&space.mesh, cell, 2 * space.degree).unwrap();
        let vals = space.eval_function(&v, cell, &rule.points);
        for (w, val) in rule.weights.iter().zip(vals) {
            direct += w * val * val;
        }
    }
    assert!((qf - direct).abs() < 1e-10 * direct.abs().max(1.0));
}

#[test]
fn mixed_mass_identity_pair() {
    let space = quad_space(2, 2);
    let nesting = crate::mesh::NestingMap::Nested {
        parent: (0..4).collect(),
    };
    let g = assemble_mixed_mass(&space, &space, &nesting).unwrap();
    let dense = g.to_dense();
    for i in 0..space.n_dofs() {
        for j in 0..space.n_dofs() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dense[(i, j)] - expected).abs() < 1e-10);
        }
    }
}

#[test]
fn mixed_mass_q0_nested_columns() {
    use crate::mesh::{agglomerate, coarsen, AgglomerationMethod, NestingMap};
    let fine_mesh = Arc::new(generate_structured(StructuredKind::Quad, 4).unwrap());
    let fine_sub = Arc::new(subtessellate(&fine_mesh).unwrap());
    let fine = DGSpace::build(fine_mesh.clone(), 2, fine_sub.clone()).unwrap();
    let part = agglomerate(&fine_mesh, 4, &AgglomerationMethod::CoordinateBisection).unwrap();
    let (coarse_mesh, parent) = coarsen(&fine_mesh, &part).unwrap();
    let coarse_mesh = Arc::new(coarse_mesh);
    let coarse = DGSpace::build_agglomerated(
        coarse_mesh.clone(),
        0,
        fine_mesh.clone(),
        fine_sub,
        &parent,
    )
    .unwrap();
    let g = assemble_mixed_mass(&fine, &coarse, &NestingMap::Nested { parent: parent.clone() })
        .unwrap();
    for (jcell, col) in g.cols.iter().enumerate() {
        let dj = coarse_mesh.cell_area[jcell];
        for &(row, v) in col {
            let fine_cell = row / fine.n_local;
            let local = row % fine.n_local;
            let expected = if local == 0 {
                fine_mesh.cell_area[fine_cell].sqrt() / dj.sqrt()
            } else {
                0.0
            };
            assert!(
                (v - expected).abs() < 1e-11,
                "col {jcell} row {row}: {v} vs {expected}"
            );
            assert_eq!(parent[fine_cell], jcell);
        }
    }
}

#[test]
fn mixed_mass_non_nested_reproduces_constants() {
    use crate::mesh::nesting_map;
    let fine = quad_space(4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let seeds: Vec<[f64; 2]> = (0..3)
        .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let coarse_mesh = Arc::new(generate_voronoi(&seeds, &Domain::unit_square(), 1).unwrap());
    let coarse_sub = Arc::new(subtessellate(&coarse_mesh).unwrap());
    let coarse = DGSpace::build(coarse_mesh.clone(), 1, coarse_sub).unwrap();
    let nesting = nesting_map(&fine.mesh, &coarse_mesh).unwrap();
    assert!(!nesting.is_nested());
    let g = assemble_mixed_mass(&fine, &coarse, &nesting).unwrap();
    // G maps the coarse representation of 1 to the fine representation of 1
    // (G = Q for the orthonormal fine basis)
    let qc = g.apply(&coarse.constant_one());
    let fine_one = fine.constant_one();
    for (a, b) in qc.iter().zip(&fine_one) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn lifting_of_continuous_function_vanishes() {
    let space = voronoi_space(9, 13, 2);
    let rho = DiffusionField::uniform(space.n_cells());
    // globally smooth polynomial of degree <= p projects to a continuous u_h
    // with zero interior jumps, but nonzero boundary trace; pick one vanishing
    // on the whole boundary is impossible for p=2 on the square, so test
    // interior-only by a mesh-wide linear function minus its boundary effect:
    // instead check R = 0 for the zero vector and for a continuous function on
    // a single-cell mesh with zero trace.
    let zero = vec![0.0; space.n_dofs()];
    let r = assemble_lifting(&space, LiftingWeight::Weighted, &rho, &zero).unwrap();
    assert!(r.x.iter().chain(&r.y).all(|&c| c == 0.0));

    // single cell: v with zero boundary trace -> R = 0 requires v = 0 on the
    // boundary; v = bubble-like (x(1-x)y(1-y)) needs p = 4
    let single = quad_space(1, 4);
    let rho1 = DiffusionField::uniform(1);
    let bubble = single
        .project(|p| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]))
        .unwrap();
    let r = assemble_lifting(&single, LiftingWeight::Weighted, &rho1, &bubble).unwrap();
    for c in r.x.iter().chain(&r.y) {
        assert!(c.abs() < 1e-12, "lifting coefficient {c}");
    }
}

#[test]
fn lifting_adjoint_identity() {
    // ∫ ρ∇u·R_ρ(⟦v⟧) = −∫_F {ρ∇u}_ω·⟦v⟧ for random u, v
    let space = voronoi_space(8, 17, 2);
    let nl = space.n_local;
    let mut rho_vals = vec![1.0; space.n_cells()];
    for (k, r) in rho_vals.iter_mut().enumerate() {
        if k % 2 == 0 {
            *r = 1e3;
        }
    }
    let rho = DiffusionField::new(rho_vals).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let u = random_vec(space.n_dofs(), &mut rng);
        let v = random_vec(space.n_dofs(), &mut rng);
        let rv = assemble_lifting(&space, LiftingWeight::Weighted, &rho, &v).unwrap();
        // left side: cell loop
        let mut lhs = 0.0;
        for cell in 0..space.n_cells() {
            let rule = space.quad.rule(&space.mesh, cell, 2 * space.degree).unwrap();
            let (gx, gy) = space.eval_grad(cell, &rule.points);
            let vals = space.eval_basis(cell, &rule.points);
            let off = space.dof_offset(cell);
            for (q, &w) in rule.weights.iter().enumerate() {
                let mut gu = [0.0, 0.0];
                let mut r = [0.0, 0.0];
                for i in 0..nl {
                    gu[0] += u[off + i] * gx[(i, q)];
                    gu[1] += u[off + i] * gy[(i, q)];
                    r[0] += rv.x[off + i] * vals[(i, q)];
                    r[1] += rv.y[off + i] * vals[(i, q)];
                }
                lhs += w * rho.values[cell] * (gu[0] * r[0] + gu[1] * r[1]);
            }
        }
        // right side: face loop with the omega-weighted average of rho grad u
        let faces = extract_topology(&space.mesh).unwrap();
        let mut rhs = 0.0;
        for face in &faces.faces {
            let rule = face_rule(&space.mesh, face, 2 * space.degree + 1);
            let n = face.normal;
            let a = face.side_plus;
            let (gax, gay) = space.eval_grad(a, &rule.points);
            let ua = space.eval_function(&v, a, &rule.points);
            let off_a = space.dof_offset(a);
            match face.side_minus {
                None => {
                    for (q, &w) in rule.weights.iter().enumerate() {
                        let mut flux = 0.0;
                        for i in 0..nl {
                            flux += u[off_a + i]
                                * rho.values[a]
                                * (gax[(i, q)] * n[0] + gay[(i, q)] * n[1]);
                        }
                        rhs -= w * flux * ua[q];
                    }
                }
                Some(b) => {
                    let (gbx, gby) = space.eval_grad(b, &rule.points);
                    let ub = space.eval_function(&v, b, &rule.points);
                    let off_b = space.dof_offset(b);
                    let omega = rho.values[b] / (rho.values[a] + rho.values[b]);
                    for (q, &w) in rule.weights.iter().enumerate() {
                        let mut fa = 0.0;
                        let mut fb = 0.0;
                        for i in 0..nl {
                            fa += u[off_a + i]
                                * rho.values[a]
                                * (gax[(i, q)] * n[0] + gay[(i, q)] * n[1]);
                            fb += u[off_b + i]
                                * rho.values[b]
                                * (gbx[(i, q)] * n[0] + gby[(i, q)] * n[1]);
                        }
                        let flux = omega * fa + (1.0 - omega) * fb;
                        rhs -= w * flux * (ua[q] - ub[q]);
                    }
                }
            }
        }
        let scale = lhs.abs().max(rhs.abs()).max(1e-12);
        assert!((lhs - rhs).abs() < 1e-10 * scale, "{lhs} vs {rhs}");
    }
}

#[test]
fn face_form_equals_lifting_form() {
    let space = voronoi_space(16, 19, 2);
    let mut rho_vals = vec![1.0; space.n_cells()];
    for (k, r) in rho_vals.iter_mut().enumerate() {
        if k % 2 == 1 {
            *r = 1e4;
        }
    }
    let rho = DiffusionField::new(rho_vals).unwrap();
    let a = assemble_sipdg(&space, &rho, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let u = random_vec(space.n_dofs(), &mut rng);
        let v = random_vec(space.n_dofs(), &mut rng);
        let face_val: f64 = a.apply(&v).iter().zip(&u).map(|(x, y)| x * y).sum();
        let lift_val = lifting_form_value(&space, &rho, 10.0, &u, &v).unwrap();
        let scale = face_val.abs().max(lift_val.abs()).max(1e-12);
        assert!(
            (face_val - lift_val).abs() < 1e-10 * scale,
            "{face_val} vs {lift_val}"
        );
    }
}

#[test]
fn energy_norm_cases() {
    let space = quad_space(1, 1);
    let rho = DiffusionField::uniform(1);
    let zero = vec![0.0; space.n_dofs()];
    assert_eq!(energy_norm(&space, &rho, 10.0, &zero).unwrap(), 0.0);

    // v = 1 on the single unit square: norm² = σ · perimeter, σ = 10/√2
    let one = space.constant_one();
    let norm = energy_norm(&space, &rho, 10.0, &one).unwrap();
    let expected = (10.0 / 2f64.sqrt() * 4.0).sqrt();
    assert!((norm - expected).abs() < 1e-10, "{norm} vs {expected}");
}

#[test]
fn coercivity_continuity_sandwich() {
    // c1 ||v||² <= v^T A v <= c2 ||v||² with measured c1 > 0
    let space = voronoi_space(8, 23, 2);
    let rho = DiffusionField::uniform(space.n_cells());
    let a = assemble_sipdg(&space, &rho, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for _ in 0..40 {
        let v = random_vec(space.n_dofs(), &mut rng);
        let av = a.quadratic_form(&v);
        let nv = energy_norm(&space, &rho, 10.0, &v).unwrap().powi(2);
        c1 = c1.min(av / nv);
        c2 = c2.max(av / nv);
    }
    assert!(c1 > 0.0, "coercivity constant {c1}");
    assert!(c2.is_finite());
}
