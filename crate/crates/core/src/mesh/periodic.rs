use std::collections::HashMap;

use super::Mesh;
use crate::error::{Error, Result};

/// Node pairs `(master, slave)` across opposite faces, one list per axis. Masters lie on
/// the lower face.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicMap {
    pub axes: Vec<usize>,
    pub pairs: Vec<Vec<(usize, usize)>>,
}

impl PeriodicMap {
    pub fn empty() -> Self {
        Self {
            axes: Vec::new(),
            pairs: Vec::new(),
        }
    }

    pub fn pairs_for(&self, axis: usize) -> Option<&[(usize, usize)]> {
        self.axes.iter().position(|&a| a == axis).map(|i| self.pairs[i].as_slice())
    }

    pub fn all_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const TOL: f64 = 1e-10;

fn key(p: &[f64; 3], axis: usize, scale: f64) -> [i64; 2] {
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    [(p[a] / scale * 1e8).round() as i64, (p[b] / scale * 1e8).round() as i64]
}

/// Pairs nodes on the lower and upper bounding faces of `mesh` along each axis in `axes`
/// (0-based). The mismatch tolerance is 1e-10 of the cell extent.
pub fn periodic_pairs(mesh: &Mesh, axes: &[usize]) -> Result<PeriodicMap> {
    let (lo, hi) = mesh.bounding_box();
    let mut out = PeriodicMap::empty();
    for &axis in axes {
        if axis > 2 {
            return Err(Error::Argument(format!("axis {axis} out of range")));
        }
        if out.axes.contains(&axis) {
            continue;
        }
        let extent = hi[axis] - lo[axis];
        let tol = TOL * extent.max(1.0);
        let on = |v: f64, target: f64| (v - target).abs() <= tol;
        let lower: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| on(mesh.nodes[i][axis], lo[axis])).collect();
        let mut upper: HashMap<[i64; 2], usize> = HashMap::new();
        for i in (0..mesh.n_nodes()).filter(|&i| on(mesh.nodes[i][axis], hi[axis])) {
            upper.insert(key(&mesh.nodes[i], axis, extent.max(1.0)), i);
        }
        let mut pairs = Vec::with_capacity(lower.len());
        for m in lower {
            let s = upper.remove(&key(&mesh.nodes[m], axis, extent.max(1.0))).ok_or_else(|| {
                Error::Pairing(format!(
                    "node {m} at {:?} has no partner on the opposite face along axis {}",
                    mesh.nodes[m],
                    axis + 1
                ))
            })?;
            let mut d = mesh.nodes[s];
            d[axis] -= extent;
            let mismatch = (0..3).map(|c| (d[c] - mesh.nodes[m][c]).abs()).fold(0.0, f64::max);
            if mismatch > tol {
                return Err(Error::Pairing(format!("nodes {m} and {s} mismatch by {mismatch:e}")));
            }
            pairs.push((m, s));
        }
        if let Some((_, &s)) = upper.iter().min_by_key(|(_, &s)| s) {
            return Err(Error::Pairing(format!(
                "node {s} at {:?} has no partner on the opposite face along axis {}",
                mesh.nodes[s],
                axis + 1
            )));
        }
        out.axes.push(axis);
        out.pairs.push(pairs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_column_mesh;

    #[test]
    fn single_cube_axis_one_has_four_pairs() {
        let m = generate_column_mesh(1.0, 1.0, [1, 1, 1]).unwrap();
        let p = periodic_pairs(&m, &[0]).unwrap();
        assert_eq!(p.len(), 4);
        for (a, b) in p.all_pairs() {
            assert_eq!(m.nodes[a][0], 0.0);
            assert_eq!(m.nodes[b][0], 1.0);
            assert_eq!(m.nodes[a][1], m.nodes[b][1]);
        }
    }

    #[test]
    fn unmatched_node_is_reported() {
        let mut m = generate_column_mesh(1.0, 1.0, [2, 1, 1]).unwrap();
        let moved = (0..m.n_nodes()).find(|&i| m.nodes[i][0] == 1.0).unwrap();
        m.nodes[moved][1] += 0.01;
        match periodic_pairs(&m, &[0]) {
            Err(Error::Pairing(msg)) => assert!(msg.contains("node")),
            other => panic!("expected pairing error, got {other:?}"),
        }
    }
}
