//! Polygonal meshes: cells are CCW vertex-index loops over a shared vertex set.
//!
//! Faces are raw polygon edges (no collinear merging). The face set, the
//! centroid-fan sub-tessellation, subdomain partitions, agglomerated coarse
//! meshes and fine/coarse nesting relations are all derived from the mesh.

mod generate;
mod io;
mod partition;

pub use generate::{
    generate_structured, generate_voronoi, voronoi_subdivision, Domain, StructuredKind,
};
pub use io::{read_mesh_json, read_partition_file, write_mesh_json, write_partition_file};
pub use partition::{agglomerate, partition_from_file, AgglomerationMethod};

use crate::geometry::{self, Point};
use crate::{Error, Result};
use std::collections::BTreeMap;

/// A 2D polytopic mesh with per-cell size metadata.
#[derive(Debug, Clone)]
pub struct PolytopicMesh {
    pub vertices: Vec<Point>,
    /// CCW vertex-index loops.
    pub cells: Vec<Vec<usize>>,
    /// Max pairwise vertex distance per cell (h_k).
    pub cell_diameter: Vec<f64>,
    pub cell_area: Vec<f64>,
    pub cell_bbox: Vec<(Point, Point)>,
    /// Max cell diameter.
    pub mesh_size: f64,
}

impl PolytopicMesh {
    /// Build from raw vertex/cell data; CW loops are reversed, degenerate
    /// cells are rejected.
    pub fn from_cells(vertices: Vec<Point>, mut cells: Vec<Vec<usize>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Mesh("mesh has no cells".into()));
        }
        for (k, cell) in cells.iter_mut().enumerate() {
            if cell.len() < 3 {
                return Err(Error::Mesh(format!("cell {k} has fewer than 3 vertices")));
            }
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("cell {k} references a missing vertex")));
            }
            let poly: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let signed = geometry::polygon_signed_area(&poly);
            if signed < 0.0 {
                cell.reverse();
            }
        }
        let mut cell_diameter = Vec::with_capacity(cells.len());
        let mut cell_area = Vec::with_capacity(cells.len());
        let mut cell_bbox = Vec::with_capacity(cells.len());
        for (k, cell) in cells.iter().enumerate() {
            let poly: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let area = geometry::polygon_signed_area(&poly);
            if area <= 0.0 {
                return Err(Error::Mesh(format!("cell {k} has nonpositive area")));
            }
            cell_area.push(area);
            cell_diameter.push(geometry::polygon_diameter(&poly));
            cell_bbox.push(geometry::polygon_bbox(&poly));
        }
        let mesh_size = cell_diameter.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            vertices,
            cells,
            cell_diameter,
            cell_area,
            cell_bbox,
            mesh_size,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_polygon(&self, k: usize) -> Vec<Point> {
        self.cells[k].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_centroid(&self, k: usize) -> Point {
        geometry::polygon_centroid(&self.cell_polygon(k))
    }

    pub fn domain_area(&self) -> f64 {
        self.cell_area.iter().sum()
    }
}

/// One mesh face (a polygon edge) with its side assignment.
///
/// `side_minus == None` marks a boundary face; the normal points from
/// `side_plus` into `side_minus` (outward on the boundary).
#[derive(Debug, Clone)]
pub struct Face {
    pub endpoints: [usize; 2],
    pub measure: f64,
    pub normal: Point,
    pub side_plus: usize,
    pub side_minus: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.side_minus.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct FaceSet {
    pub faces: Vec<Face>,
    /// Face indices incident to each cell (either side).
    pub cell_faces: Vec<Vec<usize>>,
}

impl FaceSet {
    pub fn boundary_measure(&self) -> f64 {
        self.faces
            .iter()
            .filter(|f| f.is_boundary())
            .map(|f| f.measure)
            .sum()
    }

    pub fn interior_measure(&self) -> f64 {
        self.faces
            .iter()
            .filter(|f| !f.is_boundary())
            .map(|f| f.measure)
            .sum()
    }
}

/// Classify every cell edge as interior (shared by exactly two cells) or
/// boundary. The lower cell index becomes `side_plus`; edges shared by more
/// than two cells are rejected.
pub fn extract_topology(mesh: &PolytopicMesh) -> Result<FaceSet> {
    // key: sorted endpoint pair -> (cell, a, b) records in deterministic order
    let mut edge_map: BTreeMap<(usize, usize), Vec<(usize, usize, usize)>> = BTreeMap::new();
    for (k, cell) in mesh.cells.iter().enumerate() {
        let n = cell.len();
        for i in 0..n {
            let a = cell[i];
            let b = cell[(i + 1) % n];
            if a == b {
                return Err(Error::Mesh(format!("cell {k} has a zero-length edge")));
            }
            let key = (a.min(b), a.max(b));
            edge_map.entry(key).or_default().push((k, a, b));
        }
    }
    let mut faces = Vec::with_capacity(edge_map.len());
    let mut cell_faces = vec![Vec::new(); mesh.n_cells()];
    for (key, incident) in edge_map {
        if incident.len() > 2 {
            return Err(Error::Mesh(format!(
                "non-manifold edge {:?} shared by {} cells",
                key,
                incident.len()
            )));
        }
        // side+ is the incident cell with the lower index
        let (plus, minus) = if incident.len() == 2 && incident[1].0 < incident[0].0 {
            (incident[1], Some(incident[0].0))
        } else {
            (incident[0], incident.get(1).map(|r| r.0))
        };
        let (cell_plus, a, b) = plus;
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let e = geometry::sub(pb, pa);
        let len = geometry::norm(e);
        if len <= 0.0 {
            return Err(Error::Mesh("degenerate face".into()));
        }
        // outward normal of the CCW side_plus cell for edge a->b
        let normal = [e[1] / len, -e[0] / len];
        let face_id = faces.len();
        faces.push(Face {
            endpoints: [a, b],
            measure: len,
            normal,
            side_plus: cell_plus,
            side_minus: minus,
        });
        cell_faces[cell_plus].push(face_id);
        if let Some(m) = minus {
            cell_faces[m].push(face_id);
        }
    }
    Ok(FaceSet { faces, cell_faces })
}

/// Centroid-fan triangulations per cell.
#[derive(Debug, Clone)]
pub struct SubTessellation {
    /// Per cell: triangles as vertex coordinate triples, CCW.
    pub triangles: Vec<Vec<[Point; 3]>>,
}

/// Fan every cell from its centroid; a k-gon yields k triangles. Cells must
/// be star-shaped with respect to their centroid.
pub fn subtessellate(mesh: &PolytopicMesh) -> Result<SubTessellation> {
    let mut triangles = Vec::with_capacity(mesh.n_cells());
    for k in 0..mesh.n_cells() {
        let poly = mesh.cell_polygon(k);
        let c = geometry::polygon_centroid(&poly);
        let n = poly.len();
        let mut tris = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let area = 0.5 * geometry::cross(geometry::sub(a, c), geometry::sub(b, c));
            if area <= 0.0 {
                return Err(Error::Mesh(format!(
                    "cell {k} is not star-shaped w.r.t. its centroid (degenerate fan triangle)"
                )));
            }
            total += area;
            tris.push([c, a, b]);
        }
        if (total - mesh.cell_area[k]).abs() > 1e-12 * mesh.cell_area[k] {
            return Err(Error::Mesh(format!(
                "sub-tessellation of cell {k} does not cover the cell"
            )));
        }
        triangles.push(tris);
    }
    Ok(SubTessellation { triangles })
}

/// Non-overlapping subdomain partition of a mesh.
#[derive(Debug, Clone)]
pub struct Partition {
    pub part_of: Vec<usize>,
    pub n_parts: usize,
    /// Parts sharing at least one edge with each part.
    pub part_adjacency: Vec<Vec<usize>>,
}

impl Partition {
    /// Validate that every part is nonempty and edge-connected.
    pub fn new(mesh: &PolytopicMesh, part_of: Vec<usize>, n_parts: usize) -> Result<Self> {
        if part_of.len() != mesh.n_cells() {
            return Err(Error::Mesh("partition length does not match cell count".into()));
        }
        if n_parts == 0 || part_of.iter().any(|&p| p >= n_parts) {
            return Err(Error::Mesh("partition references an out-of-range part".into()));
        }
        let adjacency = cell_adjacency(mesh)?;
        let mut seen_part = vec![false; n_parts];
        for &p in &part_of {
            seen_part[p] = true;
        }
        if !seen_part.iter().all(|&s| s) {
            return Err(Error::Mesh("partition has an empty part".into()));
        }
        // edge-connectivity per part
        let mut visited = vec![false; mesh.n_cells()];
        let mut first_of_part = vec![usize::MAX; n_parts];
        for (k, &p) in part_of.iter().enumerate() {
            if first_of_part[p] == usize::MAX {
                first_of_part[p] = k;
            }
        }
        for p in 0..n_parts {
            let mut stack = vec![first_of_part[p]];
            visited[first_of_part[p]] = true;
            while let Some(k) = stack.pop() {
                for &j in &adjacency[k] {
                    if part_of[j] == p && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if !visited.iter().all(|&v| v) {
            return Err(Error::Mesh("partition has a disconnected part".into()));
        }
        let mut adj: Vec<std::collections::BTreeSet<usize>> =
            vec![Default::default(); n_parts];
        for (k, neigh) in adjacency.iter().enumerate() {
            for &j in neigh {
                if part_of[k] != part_of[j] {
                    adj[part_of[k]].insert(part_of[j]);
                }
            }
        }
        Ok(Self {
            part_of,
            n_parts,
            part_adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn identity(mesh: &PolytopicMesh) -> Self {
        let n = mesh.n_cells();
        Partition {
            part_of: (0..n).collect(),
            n_parts: n,
            part_adjacency: cell_adjacency(mesh)
                .map(|adj| adj)
                .unwrap_or_else(|_| vec![Vec::new(); n]),
        }
    }

    pub fn single(mesh: &PolytopicMesh) -> Self {
        Partition {
            part_of: vec![0; mesh.n_cells()],
            n_parts: 1,
            part_adjacency: vec![Vec::new()],
        }
    }

    pub fn cells_of_part(&self, p: usize) -> Vec<usize> {
        (0..self.part_of.len())
            .filter(|&k| self.part_of[k] == p)
            .collect()
    }
}

/// Edge-sharing cell adjacency lists.
pub fn cell_adjacency(mesh: &PolytopicMesh) -> Result<Vec<Vec<usize>>> {
    let faces = extract_topology(mesh)?;
    let mut adj = vec![Vec::new(); mesh.n_cells()];
    for f in &faces.faces {
        if let Some(m) = f.side_minus {
            adj[f.side_plus].push(m);
            adj[m].push(f.side_plus);
        }
    }
    Ok(adj)
}

/// Maximum number of neighbouring parts any part touches, where "touches"
/// includes sharing a single vertex.
pub fn coloring_bound(partition: &Partition, face_set: &FaceSet) -> usize {
    let mut vertex_parts: BTreeMap<usize, std::collections::BTreeSet<usize>> = BTreeMap::new();
    for f in &face_set.faces {
        for &v in &f.endpoints {
            let entry = vertex_parts.entry(v).or_default();
            entry.insert(partition.part_of[f.side_plus]);
            if let Some(m) = f.side_minus {
                entry.insert(partition.part_of[m]);
            }
        }
    }
    let mut neighbors: Vec<std::collections::BTreeSet<usize>> =
        vec![Default::default(); partition.n_parts];
    for parts in vertex_parts.values() {
        for &i in parts {
            for &j in parts {
                if i != j {
                    neighbors[i].insert(j);
                }
            }
        }
    }
    neighbors.iter().map(|s| s.len()).max().unwrap_or(0)
}

/// Agglomerate each part into a single coarse cell by walking the unmatched
/// edges of the part; parts failing simple connectivity are rejected.
///
/// Returns the coarse mesh and the fine-to-coarse parent map.
pub fn coarsen(
    mesh: &PolytopicMesh,
    partition: &Partition,
) -> Result<(PolytopicMesh, Vec<usize>)> {
    let mut coarse_loops: Vec<Vec<usize>> = Vec::with_capacity(partition.n_parts);
    for p in 0..partition.n_parts {
        let cells = partition.cells_of_part(p);
        coarse_loops.push(part_boundary_loop(mesh, &cells).map_err(|e| {
            Error::Mesh(format!("part {p}: {e}"))
        })?);
    }
    // compact the vertex set
    let mut used: Vec<usize> = coarse_loops.iter().flatten().cloned().collect();
    used.sort_unstable();
    used.dedup();
    let mut remap = BTreeMap::new();
    for (new, &old) in used.iter().enumerate() {
        remap.insert(old, new);
    }
    let vertices: Vec<Point> = used.iter().map(|&v| mesh.vertices[v]).collect();
    let cells: Vec<Vec<usize>> = coarse_loops
        .iter()
        .map(|loop_| loop_.iter().map(|v| remap[v]).collect())
        .collect();
    let coarse = PolytopicMesh::from_cells(vertices, cells)?;
    let total_fine = mesh.domain_area();
    if (coarse.domain_area() - total_fine).abs() > 1e-10 * total_fine {
        return Err(Error::Mesh("coarsened mesh does not conserve area".into()));
    }
    for p in 0..partition.n_parts {
        let child_area: f64 = partition
            .cells_of_part(p)
            .iter()
            .map(|&k| mesh.cell_area[k])
            .sum();
        if (coarse.cell_area[p] - child_area).abs() > 1e-10 * child_area {
            return Err(Error::Mesh(format!(
                "coarse cell {p} area does not match its children"
            )));
        }
    }
    Ok((coarse, partition.part_of.clone()))
}

/// Boundary loop (vertex indices, CCW) of a union of cells. Fails when the
/// boundary is pinched (a vertex with two outgoing boundary edges) or
/// consists of multiple loops.
pub(crate) fn part_boundary_loop(mesh: &PolytopicMesh, cells: &[usize]) -> Result<Vec<usize>> {
    use std::collections::HashMap;
    let mut directed: HashMap<(usize, usize), ()> = HashMap::new();
    for &k in cells {
        let cell = &mesh.cells[k];
        let n = cell.len();
        for i in 0..n {
            directed.insert((cell[i], cell[(i + 1) % n]), ());
        }
    }
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n_boundary = 0;
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) {
            if next.insert(a, b).is_some() {
                return Err(Error::Mesh(format!(
                    "pinched boundary at vertex {a} (union is not simply connected)"
                )));
            }
            n_boundary += 1;
        }
    }
    if n_boundary < 3 {
        return Err(Error::Mesh("union has no valid boundary loop".into()));
    }
    let start = *next.keys().next().unwrap();
    let mut loop_ = vec![start];
    let mut cur = next[&start];
    while cur != start {
        loop_.push(cur);
        cur = *next
            .get(&cur)
            .ok_or_else(|| Error::Mesh("broken boundary walk".into()))?;
        if loop_.len() > n_boundary {
            return Err(Error::Mesh("boundary walk does not close".into()));
        }
    }
    if loop_.len() != n_boundary {
        return Err(Error::Mesh(
            "union boundary has multiple loops (hole or disconnected part)".into(),
        ));
    }
    Ok(loop_)
}

/// Relation between a fine and a coarse mesh covering the same domain.
#[derive(Debug, Clone)]
pub enum NestingMap {
    /// Every fine cell lies inside exactly one coarse cell.
    Nested { parent: Vec<usize> },
    /// Per fine cell: (coarse cell, intersection polygon) pairs.
    NonNested {
        overlaps: Vec<Vec<(usize, Vec<Point>)>>,
    },
}

impl NestingMap {
    pub fn is_nested(&self) -> bool {
        matches!(self, NestingMap::Nested { .. })
    }

    /// Coarse cells overlapping each fine cell (singleton parent when nested).
    pub fn coarse_partners(&self, fine_cell: usize) -> Vec<usize> {
        match self {
            NestingMap::Nested { parent } => vec![parent[fine_cell]],
            NestingMap::NonNested { overlaps } => {
                overlaps[fine_cell].iter().map(|(j, _)| *j).collect()
            }
        }
    }

    /// Fine cells per coarse cell.
    pub fn children_of(&self, n_coarse: usize) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); n_coarse];
        match self {
            NestingMap::Nested { parent } => {
                for (k, &j) in parent.iter().enumerate() {
                    children[j].push(k);
                }
            }
            NestingMap::NonNested { overlaps } => {
                for (k, list) in overlaps.iter().enumerate() {
                    for (j, _) in list {
                        children[*j].push(k);
                    }
                }
            }
        }
        children
    }
}

/// Detect nestedness geometrically (centroid + vertex containment with slack
/// 1e-10); otherwise compute all fine/coarse overlap polygons.
pub fn nesting_map(fine: &PolytopicMesh, coarse: &PolytopicMesh) -> Result<NestingMap> {
    let slack = 1e-10 * coarse.mesh_size.max(1.0);
    let coarse_polys: Vec<Vec<Point>> = (0..coarse.n_cells())
        .map(|j| coarse.cell_polygon(j))
        .collect();
    let mut parent = Vec::with_capacity(fine.n_cells());
    let mut nested = true;
    'fine: for k in 0..fine.n_cells() {
        let centroid = fine.cell_centroid(k);
        let poly = fine.cell_polygon(k);
        for (j, cpoly) in coarse_polys.iter().enumerate() {
            if !bbox_contains(&coarse.cell_bbox[j], centroid, slack) {
                continue;
            }
            if geometry::point_in_polygon(cpoly, centroid) {
                if poly
                    .iter()
                    .all(|&v| geometry::contains_with_slack(cpoly, v, slack))
                {
                    parent.push(j);
                    continue 'fine;
                }
                break;
            }
        }
        nested = false;
        break;
    }
    if nested {
        return Ok(NestingMap::Nested { parent });
    }
    non_nested_overlaps(fine, coarse).map(|overlaps| NestingMap::NonNested { overlaps })
}

/// Force the intersection-based transfer path even for nested pairs.
pub fn non_nested_overlaps(
    fine: &PolytopicMesh,
    coarse: &PolytopicMesh,
) -> Result<Vec<Vec<(usize, Vec<Point>)>>> {
    let coarse_polys: Vec<Vec<Point>> = (0..coarse.n_cells())
        .map(|j| coarse.cell_polygon(j))
        .collect();
    for (j, cpoly) in coarse_polys.iter().enumerate() {
        if !geometry::is_convex(cpoly) {
            return Err(Error::Mesh(format!(
                "non-nested transfer requires convex coarse cells; cell {j} is not convex"
            )));
        }
    }
    let mut overlaps = Vec::with_capacity(fine.n_cells());
    for k in 0..fine.n_cells() {
        let poly = fine.cell_polygon(k);
        if !geometry::is_convex(&poly) {
            return Err(Error::Mesh(format!(
                "non-nested transfer requires convex fine cells; cell {k} is not convex"
            )));
        }
        let (flo, fhi) = fine.cell_bbox[k];
        let mut list = Vec::new();
        let mut covered = 0.0;
        for (j, cpoly) in coarse_polys.iter().enumerate() {
            let (clo, chi) = coarse.cell_bbox[j];
            if clo[0] > fhi[0] || chi[0] < flo[0] || clo[1] > fhi[1] || chi[1] < flo[1] {
                continue;
            }
            if let Some(overlap) = geometry::convex_intersection(&poly, cpoly)? {
                covered += geometry::polygon_area(&overlap);
                list.push((j, overlap));
            }
        }
        if (covered - fine.cell_area[k]).abs() > 1e-8 * fine.cell_area[k] {
            return Err(Error::Mesh(format!(
                "overlap polygons of fine cell {k} cover {covered:.3e} of {:.3e}",
                fine.cell_area[k]
            )));
        }
        overlaps.push(list);
    }
    Ok(overlaps)
}

fn bbox_contains(bbox: &(Point, Point), p: Point, slack: f64) -> bool {
    p[0] >= bbox.0[0] - slack
        && p[0] <= bbox.1[0] + slack
        && p[1] >= bbox.0[1] - slack
        && p[1] <= bbox.1[1] + slack
}
