//! Mesh agglomeration into balanced, connected subdomains.
//!
//! The built-in partitioner is recursive coordinate bisection over cell
//! centroids. Partitions can also be read from a file (one part index per
//! line). Fragments and pinched boundaries are repaired so that the parts can
//! be agglomerated into simple polygons.

use super::{cell_adjacency, part_boundary_loop, Partition, PolytopicMesh};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum AgglomerationMethod {
    CoordinateBisection,
    FromFile(std::path::PathBuf),
}

/// Partition the mesh into `n_parts` balanced, edge-connected subdomains.
pub fn agglomerate(
    mesh: &PolytopicMesh,
    n_parts: usize,
    method: &AgglomerationMethod,
) -> Result<Partition> {
    if n_parts == 0 || n_parts > mesh.n_cells() {
        return Err(Error::Mesh(format!(
            "n_parts = {n_parts} out of range 1..={}",
            mesh.n_cells()
        )));
    }
    let mut part_of = match method {
        AgglomerationMethod::CoordinateBisection => {
            let centroids: Vec<[f64; 2]> =
                (0..mesh.n_cells()).map(|k| mesh.cell_centroid(k)).collect();
            let mut part_of = vec![0usize; mesh.n_cells()];
            let mut indices: Vec<usize> = (0..mesh.n_cells()).collect();
            rcb(&centroids, &mut indices, n_parts, 0, &mut part_of);
            part_of
        }
        AgglomerationMethod::FromFile(path) => {
            let assigned = super::read_partition_file(path)?;
            if assigned.len() != mesh.n_cells() {
                return Err(Error::Mesh(format!(
                    "partition file has {} entries for {} cells",
                    assigned.len(),
                    mesh.n_cells()
                )));
            }
            if assigned.iter().any(|&p| p >= n_parts) {
                return Err(Error::Mesh("partition file references part >= n_parts".into()));
            }
            assigned
        }
    };
    let adjacency = cell_adjacency(mesh)?;
    repair_connectivity(&adjacency, &mut part_of, n_parts)?;
    repair_pinches(mesh, &adjacency, &mut part_of, n_parts)?;
    Partition::new(mesh, part_of, n_parts)
}

/// Recursive coordinate bisection: split the index set by the centroid median
/// along the wider axis, with cell counts proportional to the part counts.
fn rcb(
    centroids: &[[f64; 2]],
    indices: &mut [usize],
    n_parts: usize,
    first_part: usize,
    part_of: &mut [usize],
) {
    if n_parts == 1 {
        for &i in indices.iter() {
            part_of[i] = first_part;
        }
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in indices.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(centroids[i][d]);
            hi[d] = hi[d].max(centroids[i][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    indices.sort_by(|&a, &b| {
        centroids[a][axis]
            .partial_cmp(&centroids[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let k1 = n_parts / 2;
    let k2 = n_parts - k1;
    let n1 = (indices.len() * k1 + n_parts / 2) / n_parts;
    let (left, right) = indices.split_at_mut(n1);
    rcb(centroids, left, k1, first_part, part_of);
    rcb(centroids, right, k2, first_part + k1, part_of);
}

/// Reassign disconnected fragments of each part to the adjacent part with the
/// strongest edge coupling, keeping the largest fragment in place.
fn repair_connectivity(
    adjacency: &[Vec<usize>],
    part_of: &mut [usize],
    n_parts: usize,
) -> Result<()> {
    for _pass in 0..part_of.len() {
        let mut changed = false;
        for p in 0..n_parts {
            let members: Vec<usize> = (0..part_of.len()).filter(|&k| part_of[k] == p).collect();
            if members.is_empty() {
                return Err(Error::Mesh(format!("part {p} became empty during repair")));
            }
            let comps = components(&members, adjacency, part_of, p);
            if comps.len() <= 1 {
                continue;
            }
            let largest = comps
                .iter()
                .enumerate()
                .max_by_key(|(i, c)| (c.len(), usize::MAX - i))
                .map(|(i, _)| i)
                .unwrap();
            for (ci, comp) in comps.iter().enumerate() {
                if ci == largest {
                    continue;
                }
                // adjacent part with the most shared edges
                let mut counts = std::collections::BTreeMap::new();
                for &k in comp {
                    for &j in &adjacency[k] {
                        if part_of[j] != p {
                            *counts.entry(part_of[j]).or_insert(0usize) += 1;
                        }
                    }
                }
                let target = counts
                    .iter()
                    .max_by_key(|(q, c)| (**c, usize::MAX - **q))
                    .map(|(&q, _)| q);
                if let Some(q) = target {
                    for &k in comp {
                        part_of[k] = q;
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(());
        }
    }
    Err(Error::Mesh("partition connectivity repair did not converge".into()))
}

fn components(
    members: &[usize],
    adjacency: &[Vec<usize>],
    part_of: &[usize],
    p: usize,
) -> Vec<Vec<usize>> {
    let mut seen: std::collections::BTreeSet<usize> = members.iter().cloned().collect();
    let mut comps = Vec::new();
    while let Some(&start) = seen.iter().next() {
        let mut comp = vec![start];
        seen.remove(&start);
        let mut stack = vec![start];
        while let Some(k) = stack.pop() {
            for &j in &adjacency[k] {
                if part_of[j] == p && seen.remove(&j) {
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Move cells away from pinch vertices until every part has a simple
/// single-loop boundary (so that `coarsen` succeeds).
fn repair_pinches(
    mesh: &PolytopicMesh,
    adjacency: &[Vec<usize>],
    part_of: &mut [usize],
    n_parts: usize,
) -> Result<()> {
    'outer: for _attempt in 0..200 {
        for p in 0..n_parts {
            let members: Vec<usize> = (0..part_of.len()).filter(|&k| part_of[k] == p).collect();
            if members.len() <= 1 {
                continue;
            }
            if let Err(err) = part_boundary_loop(mesh, &members) {
                let msg = err.to_string();
                let pinch = msg
                    .split("vertex ")
                    .nth(1)
                    .and_then(|s| s.split_whitespace().next())
                    .and_then(|s| s.parse::<usize>().ok());
                // pick a member incident to the pinch vertex (or any boundary
                // member) with a neighbour in another part and move it there
                let candidates: Vec<usize> = members
                    .iter()
                    .cloned()
                    .filter(|&k| match pinch {
                        Some(v) => mesh.cells[k].contains(&v),
                        None => true,
                    })
                    .collect();
                for &k in &candidates {
                    let mut counts = std::collections::BTreeMap::new();
                    for &j in &adjacency[k] {
                        if part_of[j] != p {
                            *counts.entry(part_of[j]).or_insert(0usize) += 1;
                        }
                    }
                    if let Some((&q, _)) =
                        counts.iter().max_by_key(|(q, c)| (**c, usize::MAX - **q))
                    {
                        part_of[k] = q;
                        repair_connectivity(adjacency, part_of, n_parts)?;
                        continue 'outer;
                    }
                }
                return Err(Error::Mesh(format!(
                    "cannot repair pinched boundary of part {p}: {msg}"
                )));
            }
        }
        return Ok(());
    }
    Err(Error::Mesh("pinch repair did not converge".into()))
}

/// Read a partition file and validate it against the mesh.
pub fn partition_from_file(mesh: &PolytopicMesh, path: &std::path::Path) -> Result<Partition> {
    let part_of = super::read_partition_file(path)?;
    if part_of.len() != mesh.n_cells() {
        return Err(Error::Mesh(format!(
            "partition file has {} entries for {} cells",
            part_of.len(),
            mesh.n_cells()
        )));
    }
    let n_parts = part_of.iter().cloned().max().map_or(0, |m| m + 1);
    Partition::new(mesh, part_of, n_parts)
}
