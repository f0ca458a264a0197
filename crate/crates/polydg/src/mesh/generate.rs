//! Mesh generation: clipped Voronoi diagrams with Lloyd relaxation, structured
//! quadrilateral grids, and Voronoi subdivision of an existing coarse mesh.
//!
//! Voronoi cells are built by half-plane clipping of the domain against seed
//! bisectors. Non-convex domains (the L-shape) are handled by clipping against
//! each convex piece and stitching the pieces along the shared interface.

use super::PolytopicMesh;
use crate::geometry::{self, Point};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Computational domain: a convex polygon or a union of convex pieces that
/// share interface edges (used for the L-shape).
#[derive(Debug, Clone)]
pub enum Domain {
    Convex(Vec<Point>),
    Union(Vec<Vec<Point>>),
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Convex(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    }

    /// Unit L-shape: (0,1)^2 minus the bottom-right quadrant, area 3/4.
    pub fn l_shape() -> Self {
        Domain::Union(vec![
            // left column [0, 1/2] x [0, 1]
            vec![[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0]],
            // top-right square [1/2, 1] x [1/2, 1]
            vec![[0.5, 0.5], [1.0, 0.5], [1.0, 1.0], [0.5, 1.0]],
        ])
    }

    pub fn pieces(&self) -> Vec<Vec<Point>> {
        match self {
            Domain::Convex(p) => vec![p.clone()],
            Domain::Union(ps) => ps.clone(),
        }
    }

    pub fn area(&self) -> f64 {
        self.pieces().iter().map(|p| geometry::polygon_area(p)).sum()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.pieces()
            .iter()
            .any(|piece| geometry::point_in_polygon(piece, p))
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY, f64::INFINITY];
        let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY];
        for piece in self.pieces() {
            let (l, h) = geometry::polygon_bbox(&piece);
            lo[0] = lo[0].min(l[0]);
            lo[1] = lo[1].min(l[1]);
            hi[0] = hi[0].max(h[0]);
            hi[1] = hi[1].max(h[1]);
        }
        (lo, hi)
    }

    /// Sample a point uniformly from the domain.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let (lo, hi) = self.bbox();
        loop {
            let p = [
                rng.random_range(lo[0]..hi[0]),
                rng.random_range(lo[1]..hi[1]),
            ];
            if self.contains(p) {
                return p;
            }
        }
    }
}

/// Clipped Voronoi cell of one seed: convex pieces (one per domain piece) and
/// the stitched outer boundary.
struct VoronoiCell {
    pieces: Vec<Vec<Point>>,
    merged: Vec<Point>,
}

/// Uniform bucket grid for neighbour queries among the seeds.
struct SeedGrid {
    cell: f64,
    origin: Point,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn new(seeds: &[Point], bbox: (Point, Point)) -> Self {
        let (lo, hi) = bbox;
        let ext = ((hi[0] - lo[0]).max(hi[1] - lo[1])).max(1e-12);
        let n = ((seeds.len() as f64).sqrt().ceil() as usize).max(1);
        let cell = ext / n as f64;
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize + 1).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let origin = lo;
        for (i, s) in seeds.iter().enumerate() {
            let (bx, by) = Self::bucket_of(origin, cell, nx, ny, *s);
            buckets[by * nx + bx].push(i);
        }
        SeedGrid {
            cell,
            origin,
            nx,
            ny,
            buckets,
        }
    }

    fn bucket_of(origin: Point, cell: f64, nx: usize, ny: usize, p: Point) -> (usize, usize) {
        let bx = (((p[0] - origin[0]) / cell).floor() as isize).clamp(0, nx as isize - 1);
        let by = (((p[1] - origin[1]) / cell).floor() as isize).clamp(0, ny as isize - 1);
        (bx as usize, by as usize)
    }

    /// Indices of seeds within radius `r` of `p`, sorted by distance.
    fn within(&self, seeds: &[Point], p: Point, r: f64) -> Vec<usize> {
        let (bx, by) = Self::bucket_of(self.origin, self.cell, self.nx, self.ny, p);
        let reach = (r / self.cell).ceil() as isize + 1;
        let mut out = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let x = bx as isize + dx;
                let y = by as isize + dy;
                if x < 0 || y < 0 || x >= self.nx as isize || y >= self.ny as isize {
                    continue;
                }
                for &i in &self.buckets[y as usize * self.nx + x as usize] {
                    if geometry::dist(seeds[i], p) <= r {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_by(|&a, &b| {
            geometry::dist(seeds[a], p)
                .partial_cmp(&geometry::dist(seeds[b], p))
                .unwrap()
                .then(a.cmp(&b))
        });
        out
    }
}

fn voronoi_cell(seeds: &[Point], grid: &SeedGrid, i: usize, domain: &Domain) -> Result<VoronoiCell> {
    let s = seeds[i];
    let (lo, hi) = domain.bbox();
    let domain_diam = geometry::dist(lo, hi);
    let mut radius = 4.0 * domain_diam / (seeds.len() as f64).sqrt();
    let pieces = loop {
        let mut cands = grid.within(seeds, s, radius);
        cands.retain(|&j| j != i);
        let all_in = cands.len() + 1 == seeds.len() || radius >= 2.0 * domain_diam;
        let mut pieces: Vec<Vec<Point>> = Vec::new();
        let mut max_v: f64 = 0.0;
        for piece in domain.pieces() {
            let mut poly = piece.clone();
            for &j in &cands {
                // keep the side of the bisector closer to seed i
                let d = geometry::sub(seeds[j], s);
                let m = [
                    0.5 * (s[0] + seeds[j][0]),
                    0.5 * (s[1] + seeds[j][1]),
                ];
                poly = geometry::clip_halfplane(&poly, d, geometry::dot(d, m));
                if poly.len() < 3 {
                    break;
                }
            }
            if poly.len() >= 3 {
                let poly = geometry::dedupe_ring(&poly, 1e-13 * domain_diam);
                if poly.len() >= 3 && geometry::polygon_area(&poly) > 1e-24 {
                    for v in &poly {
                        max_v = max_v.max(geometry::dist(*v, s));
                    }
                    pieces.push(poly);
                }
            }
        }
        if pieces.is_empty() {
            return Err(Error::Mesh(format!("seed {i} produced an empty Voronoi cell")));
        }
        // any seed farther than 2*max_v cannot cut the current cell
        if all_in || radius >= 2.0 * max_v {
            break pieces;
        }
        radius *= 2.0;
    };
    let merged = merge_pieces(&pieces, 1e-9)?;
    Ok(VoronoiCell { pieces, merged })
}

fn merge_pieces(pieces: &[Vec<Point>], tol: f64) -> Result<Vec<Point>> {
    let mut acc = pieces[0].clone();
    let mut rest: Vec<Vec<Point>> = pieces[1..].to_vec();
    while !rest.is_empty() {
        let mut merged_any = false;
        for idx in 0..rest.len() {
            if let Some(m) = geometry::merge_on_shared_edge(&acc, &rest[idx], tol) {
                acc = m;
                rest.remove(idx);
                merged_any = true;
                break;
            }
        }
        if !merged_any {
            return Err(Error::Mesh(
                "Voronoi cell pieces do not share an edge; cannot stitch".into(),
            ));
        }
    }
    Ok(acc)
}

/// Weld nearly coincident points into shared vertex indices.
struct VertexWelder {
    tol: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
    vertices: Vec<Point>,
}

impl VertexWelder {
    fn new(tol: f64) -> Self {
        VertexWelder {
            tol,
            map: HashMap::new(),
            vertices: Vec::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        (
            (p[0] / self.tol).round() as i64,
            (p[1] / self.tol).round() as i64,
        )
    }

    fn insert(&mut self, p: Point) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.map.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if geometry::dist(self.vertices[id], p) <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.map.entry((kx, ky)).or_default().push(id);
        id
    }
}

fn polygons_to_mesh(polys: &[Vec<Point>], weld_tol: f64) -> Result<PolytopicMesh> {
    let mut welder = VertexWelder::new(weld_tol);
    let mut cells = Vec::with_capacity(polys.len());
    for poly in polys {
        let mut loop_: Vec<usize> = poly.iter().map(|&p| welder.insert(p)).collect();
        loop_.dedup();
        while loop_.len() > 1 && loop_.first() == loop_.last() {
            loop_.pop();
        }
        if loop_.len() < 3 {
            return Err(Error::Mesh("cell degenerated after vertex welding".into()));
        }
        cells.push(loop_);
    }
    PolytopicMesh::from_cells(welder.vertices, cells)
}

/// Clipped Voronoi diagram of the given seeds, after `lloyd_iters` centroidal
/// relaxation sweeps.
pub fn generate_voronoi(
    seeds: &[Point],
    domain: &Domain,
    lloyd_iters: usize,
) -> Result<PolytopicMesh> {
    Ok(generate_voronoi_cells(seeds, domain, lloyd_iters)?.1)
}

/// As [`generate_voronoi`] but also returns the convex pieces of every cell
/// (needed to subdivide non-convex stitched cells later).
pub fn generate_voronoi_with_pieces(
    seeds: &[Point],
    domain: &Domain,
    lloyd_iters: usize,
) -> Result<(PolytopicMesh, Vec<Vec<Vec<Point>>>)> {
    let (cells, mesh) = generate_voronoi_cells(seeds, domain, lloyd_iters)?;
    Ok((mesh, cells.into_iter().map(|c| c.pieces).collect()))
}

fn generate_voronoi_cells(
    seeds: &[Point],
    domain: &Domain,
    lloyd_iters: usize,
) -> Result<(Vec<VoronoiCell>, PolytopicMesh)> {
    if seeds.is_empty() {
        return Err(Error::Mesh("no seeds given".into()));
    }
    let (lo, hi) = domain.bbox();
    let scale = geometry::dist(lo, hi);
    for (i, s) in seeds.iter().enumerate() {
        if !domain.contains(*s) && !domain
            .pieces()
            .iter()
            .any(|p| geometry::contains_with_slack(p, *s, 1e-12 * scale))
        {
            return Err(Error::Mesh(format!("seed {i} lies outside the domain")));
        }
    }
    let mut sorted: Vec<Point> = seeds.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in sorted.windows(2) {
        if geometry::dist(w[0], w[1]) < 1e-12 * scale {
            return Err(Error::Mesh("duplicate seeds".into()));
        }
    }

    let mut seeds = seeds.to_vec();
    for _ in 0..lloyd_iters {
        let grid = SeedGrid::new(&seeds, domain.bbox());
        let mut moved = Vec::with_capacity(seeds.len());
        for i in 0..seeds.len() {
            let cell = voronoi_cell(&seeds, &grid, i, domain)?;
            let mut area = 0.0;
            let mut cx = 0.0;
            let mut cy = 0.0;
            for piece in &cell.pieces {
                let a = geometry::polygon_area(piece);
                let c = geometry::polygon_centroid(piece);
                area += a;
                cx += a * c[0];
                cy += a * c[1];
            }
            let c = [cx / area, cy / area];
            moved.push(if domain.contains(c) { c } else { seeds[i] });
        }
        seeds = moved;
    }

    let grid = SeedGrid::new(&seeds, domain.bbox());
    let mut cells = Vec::with_capacity(seeds.len());
    for i in 0..seeds.len() {
        cells.push(voronoi_cell(&seeds, &grid, i, domain)?);
    }
    let polys: Vec<Vec<Point>> = cells.iter().map(|c| c.merged.clone()).collect();
    let mesh = polygons_to_mesh(&polys, 1e-9 * scale.max(1.0))?;
    let total = mesh.domain_area();
    let expected = domain.area();
    if (total - expected).abs() > 1e-10 * expected {
        return Err(Error::Mesh(format!(
            "Voronoi cells cover {total:.15} of domain area {expected:.15}"
        )));
    }
    Ok((cells, mesh))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuredKind {
    /// Uniform n x n quadrilateral grid on the unit square.
    Quad,
    /// 16-cell Voronoi coarse grid on the unit L-shape (seeded).
    LshapeVoronoi16,
}

/// Structured mesh families used by the experiments.
pub fn generate_structured(kind: StructuredKind, n_or_seed: u64) -> Result<PolytopicMesh> {
    match kind {
        StructuredKind::Quad => {
            let n = n_or_seed as usize;
            if n < 1 {
                return Err(Error::Mesh("quad grid needs n >= 1".into()));
            }
            let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
                }
            }
            let vid = |i: usize, j: usize| j * (n + 1) + i;
            let mut cells = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
                }
            }
            PolytopicMesh::from_cells(vertices, cells)
        }
        StructuredKind::LshapeVoronoi16 => {
            let (mesh, _) = lshape_voronoi16_with_pieces(n_or_seed)?;
            Ok(mesh)
        }
    }
}

/// The 16-cell L-shape Voronoi grid plus the convex pieces of every cell.
pub fn lshape_voronoi16_with_pieces(
    seed: u64,
) -> Result<(PolytopicMesh, Vec<Vec<Vec<Point>>>)> {
    use rand::SeedableRng;
    let domain = Domain::l_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<Point> = (0..16).map(|_| domain.sample(&mut rng)).collect();
    generate_voronoi_with_pieces(&seeds, &domain, 100)
}

/// Subdivide every cell of a coarse mesh into its own clipped Voronoi
/// tessellation, producing a fine mesh nested in the coarse one.
///
/// `coarse_pieces[j]` are the convex pieces of coarse cell `j` (a single piece
/// for convex cells). Returns the fine mesh and the fine-to-coarse parent map.
pub fn voronoi_subdivision(
    coarse: &PolytopicMesh,
    coarse_pieces: &[Vec<Vec<Point>>],
    seeds_per_cell: usize,
    lloyd_iters: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(PolytopicMesh, Vec<usize>)> {
    if seeds_per_cell == 0 {
        return Err(Error::Mesh("seeds_per_cell must be positive".into()));
    }
    let mut polys: Vec<Vec<Point>> = Vec::new();
    let mut parent = Vec::new();
    for j in 0..coarse.n_cells() {
        let sub = Domain::Union(coarse_pieces[j].clone());
        let merged = coarse.cell_polygon(j);
        let (lo, hi) = coarse.cell_bbox[j];
        let mut seeds = Vec::with_capacity(seeds_per_cell);
        let mut guard = 0;
        while seeds.len() < seeds_per_cell {
            let p = [
                rng.random_range(lo[0]..hi[0]),
                rng.random_range(lo[1]..hi[1]),
            ];
            if geometry::point_in_polygon(&merged, p) {
                seeds.push(p);
            }
            guard += 1;
            if guard > 100_000 * seeds_per_cell {
                return Err(Error::Mesh(format!(
                    "failed to sample seeds inside coarse cell {j}"
                )));
            }
        }
        let (cells, _) = generate_voronoi_cells(&seeds, &sub, lloyd_iters)?;
        for c in cells {
            polys.push(c.merged);
            parent.push(j);
        }
    }
    let scale = coarse.mesh_size.max(1.0);
    let fine = polygons_to_mesh(&polys, 1e-9 * scale)?;
    let total = fine.domain_area();
    let expected = coarse.domain_area();
    if (total - expected).abs() > 1e-10 * expected {
        return Err(Error::Mesh("subdivision does not conserve area".into()));
    }
    Ok((fine, parent))
}
