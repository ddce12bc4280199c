use std::collections::HashMap;

use super::{structured_box, tags, Domain, Mesh};
use crate::error::{Error, Result};

/// Solid and fluid meshes of one unit cell with their shared interface.
#[derive(Clone, Debug)]
pub struct RvePair {
    pub solid: Mesh,
    pub fluid: Mesh,
    /// Fluid voxel count over `n³`, or the fluid volume fraction for imported meshes.
    pub porosity: f64,
    /// Coincident `(solid node, fluid node)` pairs on the interface.
    pub interface: Vec<(usize, usize)>,
}

impl RvePair {
    pub fn solid_fraction(&self) -> f64 {
        1.0 - self.porosity
    }

    /// Pairs two separately loaded meshes, e.g. from [`super::gmsh::read_mesh`].
    pub fn from_meshes(solid: Mesh, fluid: Mesh) -> Result<Self> {
        let porosity = fluid.volume() / (fluid.volume() + solid.volume());
        let interface = interface_correspondence(&solid, &fluid)?;
        Ok(Self {
            solid,
            fluid,
            porosity,
            interface,
        })
    }
}

fn in_channel(c: [f64; 3], r: f64) -> bool {
    let r2 = r * r;
    let d = c.map(|v| v - 0.5);
    d[1] * d[1] + d[2] * d[2] < r2 || d[0] * d[0] + d[2] * d[2] < r2 || d[0] * d[0] + d[1] * d[1] < r2
}

/// Volume fraction of the union of three orthogonal centred cylinders of radius
/// `r ≤ 0.5` in the unit cube.
pub fn three_cylinder_fraction(r: f64) -> f64 {
    3.0 * std::f64::consts::PI * r * r - 16.0 * r.powi(3) + 8.0 * (2.0 - 2f64.sqrt()) * r.powi(3)
}

/// Voxelizes the unit cube minus three orthogonal channels of radius `channel_radius`
/// through its centre. A voxel is fluid when its centre lies in a channel.
pub fn generate_voxel_rve(resolution: usize, channel_radius: f64) -> Result<RvePair> {
    let n = resolution;
    if n < 8 {
        return Err(Error::Argument(format!("resolution {n} is below the minimum of 8")));
    }
    if !(channel_radius > 0.0 && channel_radius < 0.5) {
        return Err(Error::Argument(format!("channel radius {channel_radius} outside (0, 0.5)")));
    }
    let h = 1.0 / n as f64;
    let fluid_mask: Vec<bool> = (0..n * n * n)
        .map(|idx| {
            let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
            in_channel([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h], channel_radius)
        })
        .collect();
    let is_fluid = |i: usize, j: usize, k: usize| fluid_mask[(k * n + j) * n + i];
    let fluid_count = fluid_mask.iter().filter(|&&f| f).count();
    if fluid_count == 0 {
        return Err(Error::Geometry(format!(
            "channel radius {channel_radius} resolves no fluid voxels at resolution {n}"
        )));
    }
    if fluid_count == n * n * n {
        return Err(Error::Geometry("no solid voxels remain".into()));
    }
    for axis in 0..3 {
        let through = (0..n * n).any(|line| {
            let (a, b) = (line % n, line / n);
            (0..n).all(|s| match axis {
                0 => is_fluid(s, a, b),
                1 => is_fluid(a, s, b),
                _ => is_fluid(a, b, s),
            })
        });
        if !through {
            return Err(Error::Geometry(format!(
                "fluid region is not connected along axis {} at resolution {n}",
                axis + 1
            )));
        }
    }

    let side = tags::cube_side;
    let solid = structured_box([n; 3], [1.0; 3], |i, j, k| !is_fluid(i, j, k), side, tags::INTERFACE, Domain::Solid);
    let fluid = structured_box([n; 3], [1.0; 3], is_fluid, side, tags::INTERFACE, Domain::Fluid);
    let interface = interface_correspondence(&solid, &fluid)?;
    Ok(RvePair {
        solid,
        fluid,
        porosity: fluid_count as f64 / (n * n * n) as f64,
        interface,
    })
}

fn quantize(p: &[f64; 3]) -> [i64; 3] {
    p.map(|v| (v * 1e9).round() as i64)
}

/// Matches interface nodes of the solid mesh to coincident interface nodes of the fluid
/// mesh (tolerance 1e-9 of the unit cell).
pub fn interface_correspondence(solid: &Mesh, fluid: &Mesh) -> Result<Vec<(usize, usize)>> {
    let fluid_nodes: HashMap<[i64; 3], usize> = fluid
        .nodes_with_tag(tags::INTERFACE)
        .into_iter()
        .map(|i| (quantize(&fluid.nodes[i]), i))
        .collect();
    let solid_nodes = solid.nodes_with_tag(tags::INTERFACE);
    if solid_nodes.len() != fluid_nodes.len() {
        return Err(Error::Geometry(format!(
            "interface node counts differ: {} solid, {} fluid",
            solid_nodes.len(),
            fluid_nodes.len()
        )));
    }
    solid_nodes
        .into_iter()
        .map(|s| {
            fluid_nodes
                .get(&quantize(&solid.nodes[s]))
                .map(|&f| (s, f))
                .ok_or_else(|| Error::Geometry(format!("solid interface node {s} has no fluid partner")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_union_fraction() {
        assert!((three_cylinder_fraction(0.2) - 0.286_481).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(generate_voxel_rve(6, 0.2), Err(Error::Argument(_))));
        assert!(matches!(generate_voxel_rve(10, 0.5), Err(Error::Argument(_))));
        assert!(matches!(generate_voxel_rve(8, 0.05), Err(Error::Geometry(_))));
    }

    #[test]
    fn subdomains_share_interface_nodes() {
        let rve = generate_voxel_rve(10, 0.2).unwrap();
        assert!(!rve.interface.is_empty());
        for &(s, f) in &rve.interface {
            assert_eq!(rve.solid.nodes[s], rve.fluid.nodes[f]);
        }
        rve.solid.validate().unwrap();
        rve.fluid.validate().unwrap();
    }
}
