//! Nonlinear periodic solid cell problem.
//!
//! Given a macroscale displacement gradient `H₀` and pore pressure `p₀`, find the
//! periodic fluctuation `u₁` with `F = I + H₀ + ∇u₁` such that
//! `∫ P(F):∇δu dV + ∫_Γ p₀ cof(F)N·δu dA = 0` over the solid, where `N` is the outward
//! normal of the solid on the pore surface. The pore traction is a follower load with
//! its exact linearization.

mod sweep;
mod tangents;

use crate::error::{Error, Result};
use crate::fem::{assemble, assemble_residual, hex, newton_solve, CsrMatrix, DofMap, ElementKernel, Local, NewtonOptions};
use crate::material::{material_tangent, pk1, strain_energy, MaterialParams};
use crate::mesh::{tags, Mesh, PeriodicMap};
use crate::tensor::{Mat3, Vec3};

pub use sweep::{oat_sweep, sweep_values, SweepInput, SweepRow, SweepTable};
pub use tangents::{biot_modulus, tangents, TangentOptions, TangentPair};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroState {
    pub grad_u0: Mat3,
    pub p0: f64,
}

impl MacroState {
    pub fn zero() -> Self {
        Self {
            grad_u0: Mat3::zeros(),
            p0: 0.0,
        }
    }

    pub fn new(grad_u0: Mat3, p0: f64) -> Self {
        Self { grad_u0, p0 }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grad_u0: self.grad_u0 * s,
            p0: self.p0 * s,
        }
    }

    pub fn lerp(&self, other: &MacroState, s: f64) -> Self {
        Self {
            grad_u0: self.grad_u0 + (other.grad_u0 - self.grad_u0) * s,
            p0: self.p0 + (other.p0 - self.p0) * s,
        }
    }

    pub fn check(&self) -> Result<()> {
        let det = (Mat3::identity() + self.grad_u0).determinant();
        if !(det > 0.0) {
            return Err(Error::Kinematic { det });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MicroResponse {
    pub state: MacroState,
    /// Nodal fluctuation on the solid mesh.
    pub u1: Vec<[f64; 3]>,
    /// Solid-domain mean of `∇u₁`.
    pub avg_grad_u1: Mat3,
    /// Strain energy density at every quadrature point, cell-major.
    pub psi: Vec<f64>,
    pub psi_avg: f64,
    pub psi_max: f64,
    pub converged_increments: usize,
    /// Residual norm of the final iterate and of the first increment's initial state.
    pub final_residual: f64,
    pub first_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub increments: usize,
    pub max_bisections: usize,
    pub newton: NewtonOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            increments: 20,
            max_bisections: 5,
            newton: NewtonOptions::default(),
        }
    }
}

/// Solid cell discretization, reusable across solves.
pub struct SolidCell<'a> {
    pub mesh: &'a Mesh,
    pub params: MaterialParams,
    pub dofmap: DofMap,
    /// `(cell, local face)` of every pore-surface face.
    interface: Vec<Vec<usize>>,
    pub volume: f64,
    pub pinned: usize,
}

struct CellKernel<'c, 'a> {
    cell: &'c SolidCell<'a>,
    state: MacroState,
}

fn deformation(u: &[f64], g: &[[f64; 3]; 8], h0: &Mat3) -> Mat3 {
    let mut f = Mat3::identity() + h0;
    for a in 0..8 {
        for i in 0..3 {
            for j in 0..3 {
                f[(i, j)] += u[3 * a + i] * g[a][j];
            }
        }
    }
    f
}

impl ElementKernel for CellKernel<'_, '_> {
    fn local_dofs(&self, cell: usize) -> Vec<usize> {
        let d = &self.cell.dofmap;
        self.cell.mesh.cells[cell]
            .iter()
            .flat_map(|&n| (0..3).map(move |c| d.raw(n, c)))
            .collect()
    }

    fn evaluate(&self, cell: usize, u: &[f64], with_matrix: bool) -> Result<Local> {
        let mesh = self.cell.mesh;
        let x = mesh.cell_coords(cell);
        let h0 = self.state.grad_u0;
        let mut r = vec![0.0; 24];
        let mut k = if with_matrix { vec![0.0; 576] } else { Vec::new() };
        for q in hex::gauss_points() {
            let (g, det) = hex::gradients(&x, q)?;
            let w = det * q.weight;
            let f = deformation(u, &g, &h0);
            let p = pk1(&f, &self.cell.params)?;
            for a in 0..8 {
                for i in 0..3 {
                    r[3 * a + i] += w * (0..3).map(|j| p[(i, j)] * g[a][j]).sum::<f64>();
                }
            }
            if with_matrix {
                let t = material_tangent(&f, &self.cell.params)?;
                for a in 0..8 {
                    for b in 0..8 {
                        for i in 0..3 {
                            for kk in 0..3 {
                                let mut s = 0.0;
                                for j in 0..3 {
                                    for l in 0..3 {
                                        s += g[a][j] * t.get(i, j, kk, l) * g[b][l];
                                    }
                                }
                                k[(3 * a + i) * 24 + 3 * b + kk] += w * s;
                            }
                        }
                    }
                }
            }
        }
        let p0 = self.state.p0;
        if p0 != 0.0 {
            for &face in &self.cell.interface[cell] {
                let nodes = hex::FACES[face];
                let xf: [Vec3; 4] = nodes.map(|a| {
                    let xa = Vec3::from(x[a]);
                    xa + h0 * xa + Vec3::new(u[3 * a], u[3 * a + 1], u[3 * a + 2])
                });
                for fq in hex::face_points() {
                    let mut xs = Vec3::zeros();
                    let mut xt = Vec3::zeros();
                    for c in 0..4 {
                        xs += xf[c] * fq.dn[c][0];
                        xt += xf[c] * fq.dn[c][1];
                    }
                    let area = xs.cross(&xt) * fq.weight;
                    for (c, &a) in nodes.iter().enumerate() {
                        for i in 0..3 {
                            r[3 * a + i] += p0 * fq.n[c] * area[i];
                        }
                    }
                    if with_matrix {
                        // ∂(xs × xt)ᵢ/∂x_{e,m} = ∂N_e/∂s (eₘ × xt)ᵢ + ∂N_e/∂t (xs × eₘ)ᵢ
                        for (e, &b) in nodes.iter().enumerate() {
                            for m in 0..3 {
                                let em = Vec3::ith(m, 1.0);
                                let d = em.cross(&xt) * fq.dn[e][0] + xs.cross(&em) * fq.dn[e][1];
                                for (c, &a) in nodes.iter().enumerate() {
                                    for i in 0..3 {
                                        k[(3 * a + i) * 24 + 3 * b + m] += p0 * fq.n[c] * d[i] * fq.weight;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Local { matrix: k, vector: r })
    }
}

impl<'a> SolidCell<'a> {
    /// Sets up the periodic discretization with the node nearest the origin pinned.
    pub fn new(mesh: &'a Mesh, periodic: &PeriodicMap, params: MaterialParams) -> Result<Self> {
        let pinned = (0..mesh.n_nodes())
            .min_by(|&a, &b| {
                let na: f64 = mesh.nodes[a].iter().map(|v| v * v).sum();
                let nb: f64 = mesh.nodes[b].iter().map(|v| v * v).sum();
                na.total_cmp(&nb)
            })
            .ok_or_else(|| Error::InvalidMesh("empty solid mesh".into()))?;
        Self::with_pinned(mesh, periodic, params, pinned)
    }

    pub fn with_pinned(mesh: &'a Mesh, periodic: &PeriodicMap, params: MaterialParams, pinned: usize) -> Result<Self> {
        if pinned >= mesh.n_nodes() {
            return Err(Error::Argument(format!("pinned node {pinned} out of range")));
        }
        let dofmap = DofMap::builder(mesh.n_nodes(), 3)
            .periodic(periodic)
            .fix(pinned, 0, 0.0)
            .fix(pinned, 1, 0.0)
            .fix(pinned, 2, 0.0)
            .build()?;
        let mut interface = vec![Vec::new(); mesh.n_cells()];
        for f in mesh.faces_with_tag(tags::INTERFACE) {
            interface[f.cell].push(f.face);
        }
        Ok(Self {
            mesh,
            params,
            dofmap,
            interface,
            volume: mesh.volume(),
            pinned,
        })
    }

    fn kernel(&self, state: MacroState) -> CellKernel<'_, 'a> {
        CellKernel { cell: self, state }
    }

    /// Residual on the free dofs at `state` for the free fluctuation vector `free`.
    pub fn residual(&self, state: &MacroState, free: &[f64]) -> Result<Vec<f64>> {
        let raw = self.dofmap.expand(free);
        assemble_residual(self.mesh.n_cells(), &self.dofmap, &self.kernel(*state), &raw)
    }

    /// Jacobian and residual on the free dofs.
    pub fn system(&self, state: &MacroState, free: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
        let raw = self.dofmap.expand(free);
        let s = assemble(self.mesh.n_cells(), &self.dofmap, &self.kernel(*state), &raw)?;
        Ok((s.rhs.iter().map(|v| -v).collect(), s.matrix))
    }

    fn newton(&self, state: &MacroState, guess: Vec<f64>, opts: &NewtonOptions) -> Result<(Vec<f64>, f64, f64)> {
        let mut problem = |x: &[f64], with_jac: bool| -> Result<(Vec<f64>, Option<CsrMatrix>)> {
            if with_jac {
                let (r, j) = self.system(state, x)?;
                Ok((r, Some(j)))
            } else {
                Ok((self.residual(state, x)?, None))
            }
        };
        let rep = newton_solve(&mut problem, guess, opts)?;
        Ok((rep.x, rep.history[0], *rep.history.last().unwrap()))
    }

    /// Ramps linearly from `start` (with converged free field `guess`) to `target`.
    pub fn solve_from(&self, start: &MacroState, guess: Vec<f64>, target: &MacroState, opts: &SolveOptions) -> Result<MicroResponse> {
        target.check()?;
        if opts.increments == 0 {
            return Err(Error::Argument("at least one increment is required".into()));
        }
        let base = 1.0 / opts.increments as f64;
        let mut s = 0.0;
        let mut ds = base;
        let mut bisections = 0;
        let mut x = guess;
        let mut steps = 0;
        let mut first_residual = None;
        let mut final_residual = 0.0;
        while s < 1.0 - 1e-14 {
            let next = (s + ds).min(1.0);
            let st = start.lerp(target, next);
            match self.newton(&st, x.clone(), &opts.newton) {
                Ok((xn, r0, rf)) => {
                    first_residual.get_or_insert(r0);
                    final_residual = rf;
                    x = xn;
                    s = next;
                    steps += 1;
                    bisections = 0;
                    ds = base.min(2.0 * ds);
                }
                Err(e @ (Error::NonConvergence { .. } | Error::Kinematic { .. } | Error::Solver(_))) => {
                    if bisections == opts.max_bisections {
                        return Err(Error::IncrementExhausted {
                            converged_fraction: s,
                            reason: e.to_string(),
                        });
                    }
                    bisections += 1;
                    ds *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let first_residual = first_residual.unwrap_or(0.0);
        let goal = opts.newton.rel_tol * first_residual;
        if final_residual > goal {
            let polish = NewtonOptions {
                rel_tol: 0.0,
                abs_tol: goal,
                max_iter: 3,
                ..opts.newton
            };
            if let Ok((xn, _, rf)) = self.newton(target, x.clone(), &polish) {
                x = xn;
                final_residual = rf;
            }
        }
        self.response(target, &x, steps, first_residual, final_residual)
    }

    pub fn solve(&self, target: &MacroState, opts: &SolveOptions) -> Result<MicroResponse> {
        self.solve_from(&MacroState::zero(), self.dofmap.zero_free(), target, opts)
    }

    /// Free vector of a response's nodal field.
    pub fn free_of(&self, r: &MicroResponse) -> Vec<f64> {
        let raw: Vec<f64> = r.u1.iter().flatten().copied().collect();
        self.dofmap.restrict(&raw)
    }

    /// Solid mean of `∇u₁` for a free fluctuation vector.
    pub fn average_gradient(&self, free: &[f64]) -> Result<Mat3> {
        let raw = self.dofmap.expand(free);
        let mut sum = Mat3::zeros();
        for (c, cell) in self.mesh.cells.iter().enumerate() {
            let x = self.mesh.cell_coords(c);
            for q in hex::gauss_points() {
                let (g, det) = hex::gradients(&x, q)?;
                let w = det * q.weight;
                for (a, &n) in cell.iter().enumerate() {
                    for i in 0..3 {
                        for j in 0..3 {
                            sum[(i, j)] += w * raw[3 * n + i] * g[a][j];
                        }
                    }
                }
            }
        }
        Ok(sum / self.volume)
    }

    fn response(&self, state: &MacroState, free: &[f64], steps: usize, r0: f64, rf: f64) -> Result<MicroResponse> {
        let raw = self.dofmap.expand(free);
        let mut psi = Vec::with_capacity(self.mesh.n_cells() * 8);
        let mut psi_int = 0.0;
        for (c, cell) in self.mesh.cells.iter().enumerate() {
            let x = self.mesh.cell_coords(c);
            let u: Vec<f64> = cell.iter().flat_map(|&n| raw[3 * n..3 * n + 3].iter().copied()).collect();
            for q in hex::gauss_points() {
                let (g, det) = hex::gradients(&x, q)?;
                let f = deformation(&u, &g, &state.grad_u0);
                let e = strain_energy(&f, &self.params)?;
                psi_int += e * det * q.weight;
                psi.push(e);
            }
        }
        let psi_max = psi.iter().copied().fold(0.0, f64::max);
        Ok(MicroResponse {
            state: *state,
            u1: raw.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
            avg_grad_u1: self.average_gradient(free)?,
            psi,
            psi_avg: psi_int / self.volume,
            psi_max,
            converged_increments: steps,
            final_residual: rf,
            first_residual: r0,
        })
    }
}

/// Convenience wrapper: builds the discretization and solves from rest.
pub fn solve_rve(
    mesh: &Mesh,
    periodic: &PeriodicMap,
    params: MaterialParams,
    target: &MacroState,
    increments: usize,
) -> Result<MicroResponse> {
    let cell = SolidCell::new(mesh, periodic, params)?;
    cell.solve(
        target,
        &SolveOptions {
            increments,
            ..Default::default()
        },
    )
}
