//! Mesh and partition file formats.
//!
//! Meshes are stored as JSON `{"vertices": [[x,y],...], "cells": [[i0,...],...]}`;
//! partitions as plain text with one part index per line (line k = cell k).

use super::PolytopicMesh;
use crate::geometry::Point;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
}

pub fn write_mesh_json(mesh: &PolytopicMesh, path: &Path) -> Result<()> {
    let file = MeshFile {
        vertices: mesh.vertices.clone(),
        cells: mesh.cells.clone(),
    };
    let body = serde_json::to_string(&file)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, body)?;
    Ok(())
}

pub fn read_mesh_json(path: &Path) -> Result<PolytopicMesh> {
    let body = std::fs::read_to_string(path)?;
    let file: MeshFile = serde_json::from_str(&body)
        .map_err(|e| Error::Config(format!("bad mesh file {}: {e}", path.display())))?;
    PolytopicMesh::from_cells(file.vertices, file.cells)
}

pub fn write_partition_file(part_of: &[usize], path: &Path) -> Result<()> {
    let mut body = String::with_capacity(part_of.len() * 4);
    for &p in part_of {
        body.push_str(&p.to_string());
        body.push('\n');
    }
    std::fs::write(path, body)?;
    Ok(())
}

pub fn read_partition_file(path: &Path) -> Result<Vec<usize>> {
    let body = std::fs::read_to_string(path)?;
    body.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad partition line {l:?}: {e}")))
        })
        .collect()
}
