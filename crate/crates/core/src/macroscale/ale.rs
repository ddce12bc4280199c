//! Finite-strain homogenized consolidation.
//!
//! Momentum: `∫ P_E : ∇δu = ∫_top t·δu` with `P_E = Vₛ P(F̄) - p V_f cof F̄` and
//! `F̄ = I + ∇u₀ + ⟨∇u₁⟩`. Mass, backward Euler:
//! `∫ q·∇δp + s δp - (τ/Δt) ∇(p - pₙ)·∇δp = 0` with `q = -V_f cof(F̄)ᵀ Kᵢ F̄⁻ᵀ ∇p` and
//! `s = [Vₛ cof F̄ : (A - Aₙ) - V_f cof F̄ : (H - Hₙ)]/Δt`, where `A = ⟨∇u₁⟩`, `H = ∇u₀`.
//!
//! Within a step the micro response is `A = Aₙ + Mₙ:(H - Hₙ) + Qₙ (p - pₙ)` with the
//! tangents of the last converged state, refreshed from the provider after convergence.
//! With `refresh_each_iteration` the provider is queried at every iterate instead.

use rayon::prelude::*;

use super::column::{cell_centre_y, point_fields, CellValues, Column, ColumnModel, ColumnOptions, NODE_DOFS};
use super::constitutive::{effective_stress_derivatives, transformed_conductivity};
use super::provider::{MicroProvider, MicroSample};
use crate::error::{Error, Result};
use crate::fem::hex::{self, gauss_points};
use crate::fem::{ElementKernel, Local};
use crate::material::{pk1, MaterialParams};
use crate::solid::MacroState;
use crate::tensor::{cofactor, cofactor_derivative, ddot, Mat3, Tensor4, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpRecord {
    pub h: Mat3,
    pub p: f64,
    pub sample: MicroSample,
}

pub struct AleModel<'p> {
    column: Column,
    provider: &'p dyn MicroProvider,
    pub params: MaterialParams,
    pub vs: f64,
    pub vf: f64,
    pub k_i: Mat3,
    pub refresh_each_iteration: bool,
    tau: Vec<f64>,
    records: Vec<QpRecord>,
}

/// Everything the element needs at one quadrature point.
struct PointEval {
    f: Mat3,
    a: Mat3,
    h: Mat3,
    m: Tensor4,
    q: Mat3,
}

impl<'p> AleModel<'p> {
    pub fn new(opts: &ColumnOptions, provider: &'p dyn MicroProvider, params: MaterialParams, vf: f64, k_i: Mat3) -> Result<Self> {
        opts.validate()?;
        if !(vf > 0.0 && vf < 1.0) {
            return Err(Error::Argument(format!("fluid fraction must lie in (0, 1), got {vf}")));
        }
        let column = Column::new(opts.height, opts.breadth, opts.divisions)?;
        let origin = provider.evaluate(&MacroState::zero())?;
        let records = vec![
            QpRecord {
                h: Mat3::zeros(),
                p: 0.0,
                sample: origin,
            };
            column.mesh.n_cells() * gauss_points().len()
        ];
        let vs = 1.0 - vf;
        // Constrained modulus along the column axis at the origin sets the stabilization scale.
        let (t, _) = effective_stress_derivatives(&(Mat3::identity() + origin.avg), 0.0, vs, vf, &params)?;
        let stiff = (t + t.compose(&origin.m)).get(1, 1, 1, 1);
        if !(stiff > 0.0) {
            return Err(Error::DegenerateParameter(format!("axial stiffness at the origin is {stiff}")));
        }
        let tau = (0..column.mesh.n_cells())
            .map(|c| opts.stabilization * column.cell_size(c).powi(2) / stiff)
            .collect();
        Ok(Self {
            column,
            provider,
            params,
            vs,
            vf,
            k_i,
            refresh_each_iteration: false,
            tau,
            records,
        })
    }

    pub fn records(&self) -> &[QpRecord] {
        &self.records
    }

    fn point(&self, rec: &QpRecord, h: Mat3, p: f64) -> Result<PointEval> {
        let (a, m, q) = if self.refresh_each_iteration {
            let s = self.provider.evaluate(&MacroState::new(h, p))?;
            (s.avg, s.m, s.q)
        } else {
            let s = &rec.sample;
            (s.avg + s.m.contract(&(h - rec.h)) + s.q * (p - rec.p), s.m, s.q)
        };
        let f = Mat3::identity() + h + a;
        let det = f.determinant();
        if !(det > 0.0) {
            return Err(Error::Kinematic { det });
        }
        Ok(PointEval { f, a, h, m, q })
    }

    /// Flux and storage rate at a point.
    fn flux_storage(&self, pe: &PointEval, rec: &QpRecord, gp: &Vec3, dt: f64) -> Result<(Vec3, f64)> {
        let cof = cofactor(&pe.f);
        let inv = pe.f.try_inverse().ok_or(Error::Kinematic { det: pe.f.determinant() })?;
        let q = -self.vf * (cof.transpose() * (self.k_i * (inv.transpose() * gp)));
        let e = self.vs * (pe.a - rec.sample.avg) - self.vf * (pe.h - rec.h);
        Ok((q, ddot(&cof, &e) / dt))
    }
}

pub struct AleKernel<'a, 'p> {
    model: &'a AleModel<'p>,
    prev: &'a [f64],
    traction: f64,
    dt: f64,
}

impl ElementKernel for AleKernel<'_, '_> {
    fn local_dofs(&self, cell: usize) -> Vec<usize> {
        self.model.column.local_dofs(cell)
    }

    fn evaluate(&self, cell: usize, local: &[f64], with_matrix: bool) -> Result<Local> {
        const N: usize = 8 * NODE_DOFS;
        let md = self.model;
        let col = &md.column;
        let x = col.mesh.cell_coords(cell);
        let prev: Vec<f64> = col.local_dofs(cell).iter().map(|&d| self.prev[d]).collect();
        let dt = self.dt;
        let tau = md.tau[cell] / dt;
        let (vs, vf) = (md.vs, md.vf);
        let mut r = vec![0.0; N];
        let mut k = if with_matrix { vec![0.0; N * N] } else { Vec::new() };
        for (iq, qp) in gauss_points().iter().enumerate() {
            let rec = &md.records[cell * 8 + iq];
            let (g, det) = hex::gradients(&x, qp)?;
            let w = det * qp.weight;
            let (h, p, gp) = point_fields(local, &qp.n, &g);
            let (_, _, gpn) = point_fields(&prev, &qp.n, &g);
            let pe = md.point(rec, h, p)?;
            let cof = cofactor(&pe.f);
            let pstress = vs * pk1(&pe.f, &md.params)? - p * vf * cof;
            let (q, s) = md.flux_storage(&pe, rec, &gp, dt)?;
            let dgp = gp - gpn;
            for a in 0..8 {
                for i in 0..3 {
                    r[NODE_DOFS * a + i] += w * (0..3).map(|j| pstress[(i, j)] * g[a][j]).sum::<f64>();
                }
                let ga = Vec3::from(g[a]);
                r[NODE_DOFS * a + 3] += w * (q.dot(&ga) + s * qp.n[a] - tau * dgp.dot(&ga));
            }
            if !with_matrix {
                continue;
            }

            // Chain rule through F̄(H, p): ∂F̄/∂H = I + M, ∂F̄/∂p = Q.
            let chain = Tensor4::identity() + pe.m;
            let (t, _) = effective_stress_derivatives(&pe.f, p, vs, vf, &md.params)?;
            let d_ph = t.compose(&chain);
            let d_pp = t.contract(&pe.q) - vf * cof;

            let dcof = cofactor_derivative(&pe.f);
            let inv = pe.f.try_inverse().ok_or(Error::Kinematic { det: pe.f.determinant() })?;
            let gt = inv.transpose() * gp;
            let kg = md.k_i * gt;
            // dq_I/dF_mM
            let mut dq_df = [[0.0; 9]; 3];
            for ii in 0..3 {
                for m in 0..3 {
                    for mm in 0..3 {
                        let mut v = 0.0;
                        for kk in 0..3 {
                            v += dcof.get(kk, ii, m, mm) * kg[kk];
                            let mut kinv = 0.0;
                            for l in 0..3 {
                                kinv += md.k_i[(kk, l)] * inv[(mm, l)];
                            }
                            v -= cof[(kk, ii)] * kinv * gt[m];
                        }
                        dq_df[ii][3 * m + mm] = -vf * v;
                    }
                }
            }
            let mut dq_dh = [[0.0; 9]; 3];
            let mut dq_dp = Vec3::zeros();
            let qf = crate::tensor::flatten(&pe.q);
            for ii in 0..3 {
                for b in 0..9 {
                    dq_dh[ii][b] = (0..9).map(|c| dq_df[ii][c] * chain.0[c][b]).sum();
                }
                dq_dp[ii] = (0..9).map(|c| dq_df[ii][c] * qf[c]).sum();
            }
            let dq_dgp = -vf * cof.transpose() * md.k_i * inv.transpose();

            let e = vs * (pe.a - rec.sample.avg) - vf * (pe.h - rec.h);
            let ed = dcof.left_contract(&e);
            let ds_dh = (chain.left_contract(&ed) + vs * pe.m.left_contract(&cof) - vf * cof) / dt;
            let ds_dp = (ddot(&ed, &pe.q) + vs * ddot(&cof, &pe.q)) / dt;

            for a in 0..8 {
                let ra = NODE_DOFS * a;
                for b in 0..8 {
                    let cb = NODE_DOFS * b;
                    for i in 0..3 {
                        for kk in 0..3 {
                            let mut v = 0.0;
                            for j in 0..3 {
                                for l in 0..3 {
                                    v += g[a][j] * d_ph.get(i, j, kk, l) * g[b][l];
                                }
                            }
                            k[(ra + i) * N + cb + kk] += w * v;
                        }
                        let v: f64 = (0..3).map(|j| d_pp[(i, j)] * g[a][j]).sum();
                        k[(ra + i) * N + cb + 3] += w * v * qp.n[b];
                    }
                    for kk in 0..3 {
                        let mut v = 0.0;
                        for n in 0..3 {
                            let mut flux = 0.0;
                            for ii in 0..3 {
                                flux += dq_dh[ii][3 * kk + n] * g[a][ii];
                            }
                            v += (flux + ds_dh[(kk, n)] * qp.n[a]) * g[b][n];
                        }
                        k[(ra + 3) * N + cb + kk] += w * v;
                    }
                    let mut v = 0.0;
                    for ii in 0..3 {
                        v += dq_dp[ii] * g[a][ii] * qp.n[b];
                        for j in 0..3 {
                            v += dq_dgp[(ii, j)] * g[a][ii] * g[b][j];
                        }
                        v -= tau * g[a][ii] * g[b][ii];
                    }
                    v += ds_dp * qp.n[a] * qp.n[b];
                    k[(ra + 3) * N + cb + 3] += w * v;
                }
            }
        }
        col.add_traction(cell, self.traction, &mut r);
        Ok(Local { matrix: k, vector: r })
    }
}

impl<'p> ColumnModel for AleModel<'p> {
    type Kernel<'a>
        = AleKernel<'a, 'p>
    where
        Self: 'a;

    fn column(&self) -> &Column {
        &self.column
    }

    fn kernel<'a>(&'a self, prev: &'a [f64], traction: f64, dt: f64) -> AleKernel<'a, 'p> {
        AleKernel {
            model: self,
            prev,
            traction,
            dt,
        }
    }

    fn storage_rate(&self, raw: &[f64], _prev: &[f64], dt: f64) -> Result<f64> {
        let col = &self.column;
        let mut total = 0.0;
        for c in 0..col.mesh.n_cells() {
            let x = col.mesh.cell_coords(c);
            let local: Vec<f64> = col.local_dofs(c).iter().map(|&d| raw[d]).collect();
            for (iq, qp) in gauss_points().iter().enumerate() {
                let rec = &self.records[c * 8 + iq];
                let (g, det) = hex::gradients(&x, qp)?;
                let (h, p, gp) = point_fields(&local, &qp.n, &g);
                let pe = self.point(rec, h, p)?;
                let (_, s) = self.flux_storage(&pe, rec, &gp, dt)?;
                total += s * det * qp.weight;
            }
        }
        Ok(total)
    }

    fn commit(&mut self, raw: &[f64]) -> Result<()> {
        let col = &self.column;
        let states: Vec<(Mat3, f64)> = (0..col.mesh.n_cells())
            .flat_map(|c| {
                let x = col.mesh.cell_coords(c);
                let local: Vec<f64> = col.local_dofs(c).iter().map(|&d| raw[d]).collect();
                gauss_points()
                    .iter()
                    .map(move |qp| {
                        let (g, _) = hex::gradients(&x, qp)?;
                        let (h, p, _) = point_fields(&local, &qp.n, &g);
                        Ok((h, p))
                    })
                    .collect::<Vec<Result<_>>>()
            })
            .collect::<Result<_>>()?;
        let provider = self.provider;
        let samples: Vec<MicroSample> = states
            .par_iter()
            .map(|&(h, p)| provider.evaluate(&MacroState::new(h, p)))
            .collect::<Result<_>>()?;
        for ((rec, &(h, p)), sample) in self.records.iter_mut().zip(&states).zip(samples) {
            let det = (Mat3::identity() + h + sample.avg).determinant();
            if !(det > 0.0) {
                return Err(Error::Kinematic { det });
            }
            *rec = QpRecord { h, p, sample };
        }
        Ok(())
    }

    fn cell_values(&self, raw: &[f64]) -> Result<Vec<CellValues>> {
        let col = &self.column;
        (0..col.mesh.n_cells())
            .map(|c| {
                let x = col.mesh.cell_coords(c);
                let local: Vec<f64> = col.local_dofs(c).iter().map(|&d| raw[d]).collect();
                let mut v = CellValues {
                    y: cell_centre_y(&col.mesh, c),
                    ..Default::default()
                };
                let nq = gauss_points().len() as f64;
                for (iq, qp) in gauss_points().iter().enumerate() {
                    let rec = &self.records[c * 8 + iq];
                    let (g, _) = hex::gradients(&x, qp)?;
                    let (h, _, gp) = point_fields(&local, &qp.n, &g);
                    let f = Mat3::identity() + h + rec.sample.avg;
                    let kk = transformed_conductivity(&f, &self.k_i)?;
                    let (_, wv) = super::constitutive::transformed_darcy(&f, &self.k_i, &gp)?;
                    v.k11 += kk[(0, 0)] / nq;
                    v.k22 += kk[(1, 1)] / nq;
                    v.f11 += f[(0, 0)] / nq;
                    v.f22 += f[(1, 1)] / nq;
                    v.f33 += f[(2, 2)] / nq;
                    v.h22 += h[(1, 1)] / nq;
                    v.m2222 += rec.sample.m.get(1, 1, 1, 1) / nq;
                    v.q22 += rec.sample.q[(1, 1)] / nq;
                    v.w2 += wv[1] / nq;
                }
                Ok(v)
            })
            .collect()
    }

    fn bracket_violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| {
                let f22 = 1.0 + r.h[(1, 1)] + r.sample.avg[(1, 1)];
                let lo = 1.0 + r.h[(1, 1)];
                r.h[(1, 1)] < 0.0 && !(f22 >= lo - 1e-12 && f22 <= 1.0 + 1e-12)
            })
            .count()
    }
}

/// Runs the finite-strain consolidation; the error carries the failure time.
pub fn run_consolidation(
    opts: &ColumnOptions,
    provider: &dyn MicroProvider,
    params: MaterialParams,
    vf: f64,
    k_i: Mat3,
) -> Result<super::column::TimeSeries> {
    let mut model = AleModel::new(opts, provider, params, vf, k_i)?;
    match super::column::march(&mut model, opts) {
        (s, None) => Ok(s),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macroscale::provider::{LinearProvider, ZeroProvider};

    fn provider() -> LinearProvider {
        let mut m = Tensor4::zeros();
        for i in 0..3 {
            m.set(i, i, i, i, -0.23);
            for j in 0..3 {
                if i != j {
                    m.set(i, i, j, j, -0.076);
                }
            }
        }
        m.set(0, 1, 0, 1, -0.1);
        m.set(1, 2, 1, 2, -0.05);
        LinearProvider {
            m,
            q: Mat3::identity() * -0.113,
        }
    }

    fn options() -> ColumnOptions {
        ColumnOptions {
            height: 1.0,
            breadth: 0.5,
            divisions: [1, 2, 1],
            ..Default::default()
        }
    }

    #[test]
    fn element_jacobian_matches_finite_differences() {
        let lp = provider();
        let mut model = AleModel::new(
            &options(),
            &lp,
            MaterialParams::from_poisson(0.3).unwrap(),
            0.29,
            Mat3::new(1.9, 0.1, 0.0, 0.1, 2.0, 0.05, 0.0, 0.05, 1.8),
        )
        .unwrap();
        let n = model.column.dofmap.n_raw();
        let pseudo = |i: usize, s: f64| ((i as f64 * 0.7 + s).sin()) * 0.03;
        let committed: Vec<f64> = (0..n).map(|i| pseudo(i, 0.3)).collect();
        model.commit(&committed).unwrap();
        let prev: Vec<f64> = (0..n).map(|i| pseudo(i, 1.1)).collect();
        let kernel = model.kernel(&prev, -0.1, 0.5);
        let dofs = kernel.local_dofs(1);
        let local: Vec<f64> = dofs.iter().map(|&d| pseudo(d, 2.0)).collect();
        let base = kernel.evaluate(1, &local, true).unwrap();
        let m = local.len();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let scale = base.matrix.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for b in 0..m {
            let mut lp = local.clone();
            let mut lm = local.clone();
            lp[b] += h;
            lm[b] -= h;
            let rp = kernel.evaluate(1, &lp, false).unwrap().vector;
            let rm = kernel.evaluate(1, &lm, false).unwrap().vector;
            for a in 0..m {
                let fd = (rp[a] - rm[a]) / (2.0 * h);
                worst = worst.max((fd - base.matrix[a * m + b]).abs());
            }
        }
        assert!(worst <= 1e-6 * scale, "worst {worst} scale {scale}");
    }

    #[test]
    fn zero_load_stays_at_rest() {
        let opts = ColumnOptions {
            traction: 0.0,
            ..options()
        };
        let s = run_consolidation(&opts, &ZeroProvider, MaterialParams::default(), 0.29, Mat3::identity() * 2.0).unwrap();
        assert!(s.steady);
        assert!(s
            .records
            .iter()
            .all(|r| r.settlement == 0.0 && r.p_max == 0.0 && r.drained_volume == 0.0));
    }
}
