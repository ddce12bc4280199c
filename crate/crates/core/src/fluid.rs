//! Periodic Stokes cell problems on the fluid subdomain.
//!
//! For each direction `i` the cell problem `μ ∇²K̃ᵢ - ∇p̃ᵢ + eᵢ = 0`, `∇·K̃ᵢ = 0` is
//! solved with no-slip on the interface, periodic exterior faces, equal-order trilinear
//! velocity and pressure, and a pressure-Laplacian stabilization `β = c h²/μ`. A scalar
//! Lagrange multiplier fixes the pressure to zero mean. The conductivity column `i` is
//! the fluid-domain mean of `K̃ᵢ`.

use crate::error::{Error, Result};
use crate::fem::{assemble, hex, Dof, DofMap, ElementKernel, Factorization, Local};
use crate::mesh::{tags, Mesh, PeriodicMap};
use crate::tensor::Mat3;

pub const DEFAULT_VISCOSITY: f64 = 1e-3;
pub const DEFAULT_STABILIZATION: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct StokesCellSolution {
    /// Nodal velocity per direction.
    pub velocity: [Vec<[f64; 3]>; 3],
    /// Nodal pressure per direction.
    pub pressure: [Vec<f64>; 3],
    /// Column `i` is the fluid mean of velocity `i`.
    pub conductivity: Mat3,
    pub fluid_volume: f64,
    /// Largest |velocity| over interface nodes.
    pub interface_velocity_max: f64,
    /// Fluid mean of each pressure field.
    pub pressure_mean: [f64; 3],
    /// `|∫ ∇·K̃ᵢ dV|` over the whole fluid cell.
    pub net_divergence: [f64; 3],
    /// Largest cell-averaged `|∇·K̃ᵢ|`.
    pub cell_divergence_max: [f64; 3],
    /// Largest nodal velocity magnitude per direction.
    pub velocity_max: [f64; 3],
}

struct StokesKernel<'a> {
    mesh: &'a Mesh,
    dofmap: &'a DofMap,
    viscosity: f64,
    stabilization: f64,
}

impl StokesKernel<'_> {
    fn cell_size(&self, c: usize) -> f64 {
        self.mesh.cell_volume(c).cbrt()
    }
}

impl ElementKernel for StokesKernel<'_> {
    fn local_dofs(&self, cell: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(33);
        for &n in &self.mesh.cells[cell] {
            for c in 0..4 {
                d.push(self.dofmap.raw(n, c));
            }
        }
        d.push(self.dofmap.extra(0));
        d
    }

    fn evaluate(&self, cell: usize, local: &[f64], _with_matrix: bool) -> Result<Local> {
        const M: usize = 33;
        let x = self.mesh.cell_coords(cell);
        let mu = self.viscosity;
        let h = self.cell_size(cell);
        let beta = self.stabilization * h * h / mu;
        let mut k = vec![0.0; M * M];
        for q in hex::gauss_points() {
            let (g, det) = hex::gradients(&x, q)?;
            let w = det * q.weight;
            for a in 0..8 {
                for b in 0..8 {
                    let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
                    for i in 0..3 {
                        k[(4 * a + i) * M + 4 * b + i] += w * mu * gg;
                        k[(4 * a + i) * M + 4 * b + 3] -= w * g[a][i] * q.n[b];
                        k[(4 * a + 3) * M + 4 * b + i] -= w * q.n[a] * g[b][i];
                    }
                    k[(4 * a + 3) * M + 4 * b + 3] -= w * beta * gg;
                }
                k[(4 * a + 3) * M + 32] += w * q.n[a];
                k[32 * M + 4 * a + 3] += w * q.n[a];
            }
        }
        let vector = (0..M).map(|r| (0..M).map(|c| k[r * M + c] * local[c]).sum()).collect();
        Ok(Local { matrix: k, vector })
    }
}

/// Solves the three Stokes cell problems on `fluid`.
pub fn solve_stokes_cell(fluid: &Mesh, periodic: &PeriodicMap, viscosity: f64) -> Result<StokesCellSolution> {
    solve_stokes_cell_with(fluid, periodic, viscosity, DEFAULT_STABILIZATION)
}

pub fn solve_stokes_cell_with(fluid: &Mesh, periodic: &PeriodicMap, viscosity: f64, stabilization: f64) -> Result<StokesCellSolution> {
    if !(viscosity > 0.0) {
        return Err(Error::Argument(format!("viscosity must be positive, got {viscosity}")));
    }
    if !(stabilization > 0.0) {
        return Err(Error::Argument(format!("stabilization must be positive, got {stabilization}")));
    }
    let wall = fluid.nodes_with_tag(tags::INTERFACE);
    let mut builder = DofMap::builder(fluid.n_nodes(), 4).extra(1).periodic(periodic);
    for c in 0..3 {
        builder = builder.fix_nodes(&wall, c, 0.0);
    }
    let dofmap = builder.build()?;
    let kernel = StokesKernel {
        mesh: fluid,
        dofmap: &dofmap,
        viscosity,
        stabilization,
    };
    let zero = dofmap.expand(&dofmap.zero_free());
    let system = assemble(fluid.n_cells(), &dofmap, &kernel, &zero)?;
    let factor = Factorization::new(&system.matrix).map_err(|e| Error::Solver(format!("Stokes saddle system: {e}")))?;

    // Body-force load vectors ∫ Nₐ eᵢ.
    let mut loads = vec![vec![0.0; dofmap.n_free()]; 3];
    for c in 0..fluid.n_cells() {
        let x = fluid.cell_coords(c);
        for q in hex::gauss_points() {
            let (_, det) = hex::gradients(&x, q)?;
            for a in 0..8 {
                let node = fluid.cells[c][a];
                for (i, load) in loads.iter_mut().enumerate() {
                    if let Dof::Free(f) = dofmap.dof(dofmap.raw(node, i)) {
                        load[f] += det * q.weight * q.n[a];
                    }
                }
            }
        }
    }

    let fluid_volume = fluid.volume();
    let mut velocity: [Vec<[f64; 3]>; 3] = Default::default();
    let mut pressure: [Vec<f64>; 3] = Default::default();
    let mut conductivity = Mat3::zeros();
    let mut pressure_mean = [0.0; 3];
    let mut net_divergence = [0.0; 3];
    let mut cell_divergence_max = [0.0; 3];
    let mut velocity_max = [0.0; 3];
    let mut interface_velocity_max: f64 = 0.0;
    for i in 0..3 {
        let sol = factor
            .solve(&loads[i])
            .map_err(|e| Error::Solver(format!("Stokes cell problem in direction {}: {e}", i + 1)))?;
        let raw = dofmap.expand(&sol);
        let v: Vec<[f64; 3]> = (0..fluid.n_nodes())
            .map(|n| [raw[dofmap.raw(n, 0)], raw[dofmap.raw(n, 1)], raw[dofmap.raw(n, 2)]])
            .collect();
        let p: Vec<f64> = (0..fluid.n_nodes()).map(|n| raw[dofmap.raw(n, 3)]).collect();

        let mut mean_v = [0.0; 3];
        let mut mean_p = 0.0;
        let mut div_total = 0.0;
        let mut div_cell_max: f64 = 0.0;
        for c in 0..fluid.n_cells() {
            let x = fluid.cell_coords(c);
            let cell = &fluid.cells[c];
            let mut div_cell = 0.0;
            let mut vol = 0.0;
            for q in hex::gauss_points() {
                let (g, det) = hex::gradients(&x, q)?;
                let w = det * q.weight;
                vol += w;
                for a in 0..8 {
                    let n = cell[a];
                    for j in 0..3 {
                        mean_v[j] += w * q.n[a] * v[n][j];
                        div_cell += w * g[a][j] * v[n][j];
                    }
                    mean_p += w * q.n[a] * p[n];
                }
            }
            div_total += div_cell;
            div_cell_max = div_cell_max.max((div_cell / vol).abs());
        }
        for j in 0..3 {
            conductivity[(j, i)] = mean_v[j] / fluid_volume;
        }
        for &n in &wall {
            interface_velocity_max = interface_velocity_max.max(v[n].iter().map(|c| c * c).sum::<f64>().sqrt());
        }
        velocity_max[i] = v
            .iter()
            .map(|w| (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt())
            .fold(0.0, f64::max);
        pressure_mean[i] = mean_p / fluid_volume;
        net_divergence[i] = div_total.abs();
        cell_divergence_max[i] = div_cell_max;
        if conductivity[(i, i)] <= 0.0 || !conductivity[(i, i)].is_finite() {
            return Err(Error::Solver(format!("fluid phase carries no flow in direction {}", i + 1)));
        }
        velocity[i] = v;
        pressure[i] = p;
    }
    Ok(StokesCellSolution {
        velocity,
        pressure,
        conductivity,
        fluid_volume,
        interface_velocity_max,
        pressure_mean,
        net_divergence,
        cell_divergence_max,
        velocity_max,
    })
}

impl StokesCellSolution {
    /// Tab-separated table of the conductivity and per-direction field norms.
    pub fn table(&self) -> String {
        let mut s = String::from("direction\tK_1i\tK_2i\tK_3i\tvelocity_max\tpressure_mean\tnet_divergence\tcell_divergence_max\n");
        for i in 0..3 {
            s.push_str(&format!(
                "{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\n",
                i + 1,
                self.conductivity[(0, i)],
                self.conductivity[(1, i)],
                self.conductivity[(2, i)],
                self.velocity_max[i],
                self.pressure_mean[i],
                self.net_divergence[i],
                self.cell_divergence_max[i],
            ));
        }
        s
    }
}
