//! Small-strain Biot reference with parameters from the linearized homogenized model.
//!
//! `σ = C:ε - α p`, `∇·w + α:ε̇ + ṗ/M = 0`, `w = -V_f Kᵢ ∇p`, on the same column,
//! boundary conditions, ramp and stabilization as the finite-strain model.

use super::column::{cell_centre_y, point_fields, CellValues, Column, ColumnModel, ColumnOptions, TimeSeries, NODE_DOFS};
use crate::error::{Error, Result};
use crate::fem::hex::{self, gauss_points};
use crate::fem::{ElementKernel, Local};
use crate::material::{material_tangent, MaterialParams};
use crate::solid::{biot_modulus, TangentPair};
use crate::tensor::{Mat3, Tensor4, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearPoroParams {
    pub stiffness: Tensor4,
    pub biot_coefficient: Mat3,
    pub biot_modulus: f64,
    pub conductivity: Mat3,
    pub fluid_fraction: f64,
}

impl LinearPoroParams {
    /// Isotropic parameters: Lamé pair, scalar Biot coefficient and modulus, and the
    /// effective scalar conductivity `V_f kᵢ`.
    pub fn isotropic(lambda: f64, mu: f64, alpha: f64, modulus: f64, conductivity: f64) -> Result<Self> {
        let mut c = Tensor4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let d = |a: usize, b: usize| (a == b) as u8 as f64;
                        c.set(
                            i,
                            j,
                            k,
                            l,
                            lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k)),
                        );
                    }
                }
            }
        }
        let p = Self {
            stiffness: c,
            biot_coefficient: Mat3::identity() * alpha,
            biot_modulus: modulus,
            conductivity: Mat3::identity() * conductivity,
            fluid_fraction: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.biot_modulus > 0.0) || !self.biot_modulus.is_finite() {
            return Err(Error::DegenerateParameter(format!(
                "Biot modulus must be positive, got {}",
                self.biot_modulus
            )));
        }
        let asym = self.stiffness.major_asymmetry();
        if asym > 1e-8 * self.stiffness.max_abs().max(1.0) {
            return Err(Error::DegenerateParameter(format!(
                "effective stiffness lacks major symmetry (deviation {asym:.3e})"
            )));
        }
        if !(self.stiffness.get(1, 1, 1, 1) > 0.0) {
            return Err(Error::DegenerateParameter("axial stiffness is not positive".into()));
        }
        Ok(())
    }

    /// Mass-side Biot coefficient `V_f δ_kl - Vₛ M_iikl`; equals the stress-side one
    /// when the cell tangents are reciprocal.
    pub fn mass_side_biot(tangents: &TangentPair, solid_fraction: f64) -> Mat3 {
        let mut a = Mat3::identity() * (1.0 - solid_fraction);
        for k in 0..3 {
            for l in 0..3 {
                a[(k, l)] -= solid_fraction * (0..3).map(|i| tangents.m.get(i, i, k, l)).sum::<f64>();
            }
        }
        a
    }
}

/// Linearizes the homogenized constitutive law at `F̄ = I`, `p = 0`:
/// `C = Vₛ 𝔸₀:(𝕀 + M)`, `α = V_f I - Vₛ 𝔸₀:Q`, `M_B = -1/(Vₛ tr Q)`.
/// The stiffness is symmetrized; the removed skew part comes from finite-difference noise
/// in `M`.
pub fn derive_linear_params(
    tangents: &TangentPair,
    params: &MaterialParams,
    fluid_fraction: f64,
    conductivity: Mat3,
) -> Result<LinearPoroParams> {
    let vs = 1.0 - fluid_fraction;
    let a0 = material_tangent(&Mat3::identity(), params)? * vs;
    let c = a0.compose(&(Tensor4::identity() + tangents.m));
    let stiffness = (c + c.major_transpose()) * 0.5;
    let biot_coefficient = Mat3::identity() * fluid_fraction - a0.contract(&tangents.q);
    let out = LinearPoroParams {
        stiffness,
        biot_coefficient,
        biot_modulus: biot_modulus(&tangents.q, vs)?,
        conductivity,
        fluid_fraction,
    };
    out.validate()?;
    Ok(out)
}

pub struct LinearModel {
    column: Column,
    pub params: LinearPoroParams,
    tau: Vec<f64>,
}

impl LinearModel {
    pub fn new(opts: &ColumnOptions, params: LinearPoroParams) -> Result<Self> {
        opts.validate()?;
        params.validate()?;
        let column = Column::new(opts.height, opts.breadth, opts.divisions)?;
        let stiff = params.stiffness.get(1, 1, 1, 1);
        let tau = (0..column.mesh.n_cells())
            .map(|c| opts.stabilization * column.cell_size(c).powi(2) / stiff)
            .collect();
        Ok(Self { column, params, tau })
    }

    fn flux(&self, gp: &Vec3) -> Vec3 {
        -self.params.fluid_fraction * (self.params.conductivity * gp)
    }

    /// `-(α:ε + p/M)`, the pore-volume decrease at a point.
    fn content(&self, h: &Mat3, p: f64) -> f64 {
        -(crate::tensor::ddot(&self.params.biot_coefficient, h) + p / self.params.biot_modulus)
    }
}

pub struct LinearKernel<'a> {
    model: &'a LinearModel,
    prev: &'a [f64],
    traction: f64,
    dt: f64,
}

impl ElementKernel for LinearKernel<'_> {
    fn local_dofs(&self, cell: usize) -> Vec<usize> {
        self.model.column.local_dofs(cell)
    }

    fn evaluate(&self, cell: usize, local: &[f64], with_matrix: bool) -> Result<Local> {
        const N: usize = 8 * NODE_DOFS;
        let md = self.model;
        let col = &md.column;
        let lp = &md.params;
        let x = col.mesh.cell_coords(cell);
        let prev: Vec<f64> = col.local_dofs(cell).iter().map(|&d| self.prev[d]).collect();
        let dt = self.dt;
        let tau = md.tau[cell] / dt;
        let alpha = lp.biot_coefficient;
        let kf = lp.conductivity * lp.fluid_fraction;
        let mut r = vec![0.0; N];
        let mut k = if with_matrix { vec![0.0; N * N] } else { Vec::new() };
        for qp in gauss_points() {
            let (g, det) = hex::gradients(&x, qp)?;
            let w = det * qp.weight;
            let (h, p, gp) = point_fields(local, &qp.n, &g);
            let (hn, pn, gpn) = point_fields(&prev, &qp.n, &g);
            let sigma = lp.stiffness.contract(&h) - alpha * p;
            let q = md.flux(&gp);
            let s = (md.content(&h, p) - md.content(&hn, pn)) / dt;
            let dgp = gp - gpn;
            for a in 0..8 {
                for i in 0..3 {
                    r[NODE_DOFS * a + i] += w * (0..3).map(|j| sigma[(i, j)] * g[a][j]).sum::<f64>();
                }
                let ga = Vec3::from(g[a]);
                r[NODE_DOFS * a + 3] += w * (q.dot(&ga) + s * qp.n[a] - tau * dgp.dot(&ga));
            }
            if !with_matrix {
                continue;
            }
            for a in 0..8 {
                let ra = NODE_DOFS * a;
                for b in 0..8 {
                    let cb = NODE_DOFS * b;
                    for i in 0..3 {
                        for kk in 0..3 {
                            let mut v = 0.0;
                            for j in 0..3 {
                                for l in 0..3 {
                                    v += g[a][j] * lp.stiffness.get(i, j, kk, l) * g[b][l];
                                }
                            }
                            k[(ra + i) * N + cb + kk] += w * v;
                        }
                        let v: f64 = (0..3).map(|j| alpha[(i, j)] * g[a][j]).sum();
                        k[(ra + i) * N + cb + 3] -= w * v * qp.n[b];
                        let v: f64 = (0..3).map(|l| alpha[(i, l)] * g[b][l]).sum();
                        k[(ra + 3) * N + cb + i] -= w * qp.n[a] * v / dt;
                    }
                    let mut v = qp.n[a] * qp.n[b] * -1.0 / (lp.biot_modulus * dt);
                    for i in 0..3 {
                        for j in 0..3 {
                            v -= g[a][i] * kf[(i, j)] * g[b][j];
                        }
                        v -= tau * g[a][i] * g[b][i];
                    }
                    k[(ra + 3) * N + cb + 3] += w * v;
                }
            }
        }
        col.add_traction(cell, self.traction, &mut r);
        Ok(Local { matrix: k, vector: r })
    }
}

impl ColumnModel for LinearModel {
    type Kernel<'a> = LinearKernel<'a>;

    fn column(&self) -> &Column {
        &self.column
    }

    fn kernel<'a>(&'a self, prev: &'a [f64], traction: f64, dt: f64) -> LinearKernel<'a> {
        LinearKernel {
            model: self,
            prev,
            traction,
            dt,
        }
    }

    fn storage_rate(&self, raw: &[f64], prev: &[f64], dt: f64) -> Result<f64> {
        let col = &self.column;
        let mut total = 0.0;
        for c in 0..col.mesh.n_cells() {
            let x = col.mesh.cell_coords(c);
            let dofs = col.local_dofs(c);
            let now: Vec<f64> = dofs.iter().map(|&d| raw[d]).collect();
            let before: Vec<f64> = dofs.iter().map(|&d| prev[d]).collect();
            for qp in gauss_points() {
                let (g, det) = hex::gradients(&x, qp)?;
                let (h, p, _) = point_fields(&now, &qp.n, &g);
                let (hn, pn, _) = point_fields(&before, &qp.n, &g);
                total += (self.content(&h, p) - self.content(&hn, pn)) / dt * det * qp.weight;
            }
        }
        Ok(total)
    }

    fn commit(&mut self, _raw: &[f64]) -> Result<()> {
        Ok(())
    }

    fn cell_values(&self, raw: &[f64]) -> Result<Vec<CellValues>> {
        let col = &self.column;
        let lp = &self.params;
        (0..col.mesh.n_cells())
            .map(|c| {
                let x = col.mesh.cell_coords(c);
                let local: Vec<f64> = col.local_dofs(c).iter().map(|&d| raw[d]).collect();
                let mut v = CellValues {
                    y: cell_centre_y(&col.mesh, c),
                    k11: lp.conductivity[(0, 0)],
                    k22: lp.conductivity[(1, 1)],
                    ..Default::default()
                };
                let nq = gauss_points().len() as f64;
                for qp in gauss_points() {
                    let (g, _) = hex::gradients(&x, qp)?;
                    let (h, _, gp) = point_fields(&local, &qp.n, &g);
                    v.f11 += (1.0 + h[(0, 0)]) / nq;
                    v.f22 += (1.0 + h[(1, 1)]) / nq;
                    v.f33 += (1.0 + h[(2, 2)]) / nq;
                    v.h22 += h[(1, 1)] / nq;
                    v.w2 += -(lp.conductivity * gp)[1] / nq;
                }
                Ok(v)
            })
            .collect()
    }
}

pub fn run_linear_reference(opts: &ColumnOptions, params: LinearPoroParams) -> Result<TimeSeries> {
    let mut model = LinearModel::new(opts, params)?;
    match super::column::march(&mut model, opts) {
        (s, None) => Ok(s),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rigid_micro_limit() {
        let params = MaterialParams::default();
        let lp = derive_linear_params(&TangentPair::zero(), &params, 0.29, Mat3::identity());
        assert!(matches!(lp, Err(Error::DegenerateParameter(_))));
        let mut t = TangentPair::zero();
        t.q = Mat3::identity() * -1e-12;
        let lp = derive_linear_params(&t, &params, 0.29, Mat3::identity()).unwrap();
        let a0 = material_tangent(&Mat3::identity(), &params).unwrap() * 0.71;
        assert!((lp.stiffness - a0).max_abs() < 1e-15);
        assert!((lp.biot_coefficient - Mat3::identity() * 0.29).abs().max() < 1e-11);
        assert_eq!(lp.biot_modulus, biot_modulus(&t.q, 0.71).unwrap());
    }

    #[test]
    fn element_matrix_matches_finite_differences() {
        let lp = LinearPoroParams::isotropic(0.4, 0.4, 0.6, 2.0, 0.7).unwrap();
        let opts = ColumnOptions {
            height: 1.0,
            breadth: 0.5,
            divisions: [1, 2, 1],
            ..Default::default()
        };
        let model = LinearModel::new(&opts, lp).unwrap();
        let n = model.column.dofmap.n_raw();
        let prev: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos() * 0.01).collect();
        let kernel = model.kernel(&prev, -0.1, 0.3);
        let local: Vec<f64> = kernel.local_dofs(0).iter().map(|&d| (d as f64 * 0.91).sin() * 0.02).collect();
        let base = kernel.evaluate(0, &local, true).unwrap();
        let m = local.len();
        for b in 0..m {
            let mut lp = local.clone();
            lp[b] += 1e-3;
            let r = kernel.evaluate(0, &lp, false).unwrap().vector;
            for a in 0..m {
                let fd = (r[a] - base.vector[a]) / 1e-3;
                assert!((fd - base.matrix[a * m + b]).abs() < 1e-9, "({a}, {b})");
            }
        }
    }
}
