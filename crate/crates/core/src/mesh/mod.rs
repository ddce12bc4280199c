//! Hexahedral meshes for the unit cell and the macroscale column.

mod column;
pub mod gmsh;
mod periodic;
mod voxel;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::hex;

pub use column::generate_column_mesh;
pub use periodic::{periodic_pairs, PeriodicMap};
pub use voxel::{generate_voxel_rve, interface_correspondence, three_cylinder_fraction, RvePair};

pub type Point = [f64; 3];

/// Boundary tags. Exterior faces of the unit cell carry one tag per side.
pub mod tags {
    pub const INTERFACE: u32 = 1;
    pub const X_MIN: u32 = 11;
    pub const X_MAX: u32 = 12;
    pub const Y_MIN: u32 = 13;
    pub const Y_MAX: u32 = 14;
    pub const Z_MIN: u32 = 15;
    pub const Z_MAX: u32 = 16;
    pub const BOTTOM: u32 = 21;
    pub const TOP: u32 = 22;
    pub const SIDES: u32 = 23;

    pub fn name(tag: u32) -> Option<&'static str> {
        Some(match tag {
            INTERFACE => "interface",
            X_MIN => "x_min",
            X_MAX => "x_max",
            Y_MIN => "y_min",
            Y_MAX => "y_max",
            Z_MIN => "z_min",
            Z_MAX => "z_max",
            BOTTOM => "bottom",
            TOP => "top",
            SIDES => "sides",
            _ => return None,
        })
    }

    pub fn from_name(name: &str) -> Option<u32> {
        [INTERFACE, X_MIN, X_MAX, Y_MIN, Y_MAX, Z_MIN, Z_MAX, BOTTOM, TOP, SIDES]
            .into_iter()
            .find(|t| self::name(*t) == Some(name))
    }

    /// Exterior tag of the unit-cell side `axis`, `upper` selecting the face at 1.
    pub fn cube_side(axis: usize, upper: bool) -> u32 {
        X_MIN + 2 * axis as u32 + upper as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Solid,
    Fluid,
    Macro,
}

impl Domain {
    pub fn physical_id(self) -> u32 {
        match self {
            Domain::Solid => 101,
            Domain::Fluid => 102,
            Domain::Macro => 103,
        }
    }

    pub fn from_physical_id(id: u32) -> Option<Self> {
        match id {
            101 => Some(Domain::Solid),
            102 => Some(Domain::Fluid),
            103 => Some(Domain::Macro),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Solid => "solid",
            Domain::Fluid => "fluid",
            Domain::Macro => "macro",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryFace {
    pub cell: usize,
    /// Local face index, see [`hex::FACES`].
    pub face: usize,
    pub tag: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub cells: Vec<[usize; 8]>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub domain: Domain,
}

pub(crate) fn face_key(cell: &[usize; 8], face: usize) -> [usize; 4] {
    let mut k = hex::FACES[face].map(|a| cell[a]);
    k.sort_unstable();
    k
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_coords(&self, c: usize) -> [Point; 8] {
        self.cells[c].map(|n| self.nodes[n])
    }

    /// Faces that belong to exactly one cell, in (cell, local face) order.
    pub fn exterior_faces(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<[usize; 4], (usize, usize, usize)> = HashMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for f in 0..6 {
                count.entry(face_key(cell, f)).and_modify(|e| e.2 += 1).or_insert((c, f, 1));
            }
        }
        let mut out: Vec<(usize, usize)> = count.into_values().filter(|e| e.2 == 1).map(|e| (e.0, e.1)).collect();
        out.sort_unstable();
        out
    }

    pub fn faces_with_tag(&self, tag: u32) -> impl Iterator<Item = &BoundaryFace> {
        self.boundary_faces.iter().filter(move |f| f.tag == tag)
    }

    /// Sorted, deduplicated node ids touching faces with `tag`.
    pub fn nodes_with_tag(&self, tag: u32) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .faces_with_tag(tag)
            .flat_map(|f| hex::FACES[f.face].map(|a| self.cells[f.cell][a]))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        let x = self.cell_coords(c);
        hex::gauss_points()
            .iter()
            .map(|q| hex::jacobian(&x, &q.xi).determinant() * q.weight)
            .sum()
    }

    pub fn volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Checks the structural invariants: valid indices, positive Jacobians at every
    /// Gauss point, exactly one tag per exterior face and none on interior faces, and
    /// unit-cube bounds for cell meshes.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (c, cell) in self.cells.iter().enumerate() {
            if let Some(bad) = cell.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references node {bad} but the mesh has {n} nodes"
                )));
            }
            let x = self.cell_coords(c);
            for q in hex::gauss_points() {
                let det = hex::jacobian(&x, &q.xi).determinant();
                if !(det > 0.0) {
                    return Err(Error::InvalidMesh(format!("cell {c} is degenerate or inverted (det J = {det:e})")));
                }
            }
        }
        let exterior = self.exterior_faces();
        let mut tagged: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.boundary_faces {
            if f.cell >= self.cells.len() || f.face >= 6 {
                return Err(Error::InvalidMesh(format!("boundary face ({}, {}) does not exist", f.cell, f.face)));
            }
            if tagged.insert((f.cell, f.face), f.tag).is_some() {
                return Err(Error::InvalidMesh(format!(
                    "face {} of cell {} carries more than one tag",
                    f.face, f.cell
                )));
            }
        }
        if let Some((c, f)) = exterior.iter().find(|k| !tagged.contains_key(k)) {
            return Err(Error::InvalidMesh(format!("face {f} of cell {c} has no boundary tag")));
        }
        if tagged.len() != exterior.len() {
            return Err(Error::InvalidMesh("boundary tags assigned to interior faces".into()));
        }
        if self.domain != Domain::Macro {
            let tol = 1e-12;
            if let Some((i, p)) = self
                .nodes
                .iter()
                .enumerate()
                .find(|(_, p)| p.iter().any(|&v| v < -tol || v > 1.0 + tol))
            {
                return Err(Error::InvalidMesh(format!(
                    "cell-domain node {i} at {p:?} lies outside the unit cube"
                )));
            }
        }
        Ok(())
    }

    /// Mesh statistics as a tab-separated `key\tvalue` table.
    pub fn stats_table(&self) -> String {
        let (lo, hi) = self.bounding_box();
        let mut per_tag: BTreeMap<u32, usize> = BTreeMap::new();
        for f in &self.boundary_faces {
            *per_tag.entry(f.tag).or_default() += 1;
        }
        let mut s = String::from("quantity\tvalue\n");
        let _ = writeln!(s, "domain\t{}", self.domain.name());
        let _ = writeln!(s, "nodes\t{}", self.n_nodes());
        let _ = writeln!(s, "cells\t{}", self.n_cells());
        let _ = writeln!(s, "boundary_faces\t{}", self.boundary_faces.len());
        for (t, c) in per_tag {
            let name = tags::name(t).map(str::to_string).unwrap_or_else(|| t.to_string());
            let _ = writeln!(s, "faces_{name}\t{c}");
        }
        let _ = writeln!(s, "volume\t{:.16e}", self.volume());
        for a in 0..3 {
            let _ = writeln!(s, "min_{}\t{:.16e}", a + 1, lo[a]);
            let _ = writeln!(s, "max_{}\t{:.16e}", a + 1, hi[a]);
        }
        s
    }
}

/// Builds a structured box mesh on `[0, lx] x [0, ly] x [0, lz]` keeping only the cells
/// for which `keep(i, j, k)` holds, and removing unused nodes. Exterior faces are
/// labelled by `side_tag(axis, upper)`; faces between a kept and a dropped cell get
/// `cut_tag`.
pub(crate) fn structured_box(
    divisions: [usize; 3],
    lengths: [f64; 3],
    keep: impl Fn(usize, usize, usize) -> bool,
    side_tag: impl Fn(usize, bool) -> u32,
    cut_tag: u32,
    domain: Domain,
) -> Mesh {
    let [nx, ny, nz] = divisions;
    let grid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let coord = |i: usize, n: usize, l: f64| if i == n { l } else { l * i as f64 / n as f64 };
    let kept = |i: usize, j: usize, k: usize| keep(i, j, k);

    let mut node_id = vec![usize::MAX; (nx + 1) * (ny + 1) * (nz + 1)];
    let mut nodes = Vec::new();
    let mut cells = Vec::new();
    let mut cell_ijk = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !kept(i, j, k) {
                    continue;
                }
                let mut cell = [0usize; 8];
                for (a, r) in hex::REFERENCE_NODES.iter().enumerate() {
                    let (di, dj, dk) = ((r[0] > 0.0) as usize, (r[1] > 0.0) as usize, (r[2] > 0.0) as usize);
                    let g = grid(i + di, j + dj, k + dk);
                    if node_id[g] == usize::MAX {
                        node_id[g] = nodes.len();
                        nodes.push([
                            coord(i + di, nx, lengths[0]),
                            coord(j + dj, ny, lengths[1]),
                            coord(k + dk, nz, lengths[2]),
                        ]);
                    }
                    cell[a] = node_id[g];
                }
                cells.push(cell);
                cell_ijk.push([i, j, k]);
            }
        }
    }

    let mut boundary_faces = Vec::new();
    for (c, ijk) in cell_ijk.iter().enumerate() {
        for (f, (axis, upper)) in hex::FACE_AXES.iter().enumerate() {
            let n = divisions[*axis];
            let at_edge = if *upper { ijk[*axis] + 1 == n } else { ijk[*axis] == 0 };
            let tag = if at_edge {
                Some(side_tag(*axis, *upper))
            } else {
                let mut nb = *ijk;
                if *upper {
                    nb[*axis] += 1;
                } else {
                    nb[*axis] -= 1;
                }
                (!kept(nb[0], nb[1], nb[2])).then_some(cut_tag)
            };
            if let Some(tag) = tag {
                boundary_faces.push(BoundaryFace { cell: c, face: f, tag });
            }
        }
    }

    Mesh {
        nodes,
        cells,
        boundary_faces,
        domain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_names_round_trip() {
        for t in [tags::INTERFACE, tags::X_MIN, tags::Z_MAX, tags::TOP, tags::SIDES] {
            assert_eq!(tags::from_name(tags::name(t).unwrap()), Some(t));
        }
        assert_eq!(tags::cube_side(1, true), tags::Y_MAX);
        assert_eq!(tags::cube_side(2, false), tags::Z_MIN);
    }

    #[test]
    fn validate_rejects_missing_tag_and_bad_index() {
        let mut m = generate_column_mesh(1.0, 1.0, [1, 1, 1]).unwrap();
        m.boundary_faces.pop();
        assert!(matches!(m.validate(), Err(Error::InvalidMesh(_))));
        let mut m = generate_column_mesh(1.0, 1.0, [1, 1, 1]).unwrap();
        m.cells[0][3] = 99;
        assert!(matches!(m.validate(), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn stats_table_lists_counts() {
        let m = generate_column_mesh(1.0, 1.0, [1, 1, 1]).unwrap();
        let t = m.stats_table();
        assert!(t.contains("cells\t1\n"));
        assert!(t.contains("faces_top\t1\n"));
        assert!(t.contains("faces_sides\t4\n"));
    }
}
