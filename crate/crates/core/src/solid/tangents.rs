use super::{MacroState, MicroResponse, SolidCell, SolveOptions};
use crate::error::{Error, Result};
use crate::fem::sparse::norm;
use crate::fem::{Factorization, LinearSolver, NewtonOptions};
use crate::material::MaterialParams;
use crate::mesh::{Mesh, PeriodicMap};
use crate::tensor::{component_label, Mat3, Tensor4};

/// `M = ∂⟨∇u₁⟩/∂∇u₀` and `Q = ∂⟨∇u₁⟩/∂p₀` (solid means).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentPair {
    pub m: Tensor4,
    pub q: Mat3,
}

impl TangentPair {
    pub fn zero() -> Self {
        Self {
            m: Tensor4::zeros(),
            q: Mat3::zeros(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentOptions {
    pub delta: f64,
    /// Central differences when true, forward otherwise.
    pub central: bool,
    /// Components `(i, j)` of `∇u₀` to perturb; the rest of `M` is left zero.
    pub components: Vec<(usize, usize)>,
    pub pressure: bool,
}

impl Default for TangentOptions {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            central: true,
            components: (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect(),
            pressure: true,
        }
    }
}

/// Biot modulus `-1 / tr⟨Q⟩ₛ` with `⟨Q⟩ₛ = Vₛ Q̄`.
pub fn biot_modulus(q: &Mat3, solid_fraction: f64) -> Result<f64> {
    let tr = solid_fraction * q.trace();
    if tr == 0.0 || !tr.is_finite() {
        return Err(Error::DegenerateParameter(format!("trace of the pressure tangent is {tr}")));
    }
    Ok(-1.0 / tr)
}

impl SolidCell<'_> {
    /// Re-solves from the converged `base` field at a nearby state. Uses the base
    /// factorization as a frozen Jacobian and falls back to full Newton if that stalls.
    fn perturbed(&self, factor: &Factorization, base_free: &[f64], state: &MacroState) -> Result<Vec<f64>> {
        let mut x = base_free.to_vec();
        let mut r = self.residual(state, &x)?;
        let r0 = norm(&r);
        if r0 == 0.0 {
            return Ok(x);
        }
        let mut prev = r0;
        for _ in 0..30 {
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let dx = factor.solve(&neg)?;
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            r = self.residual(state, &x)?;
            let rn = norm(&r);
            if rn <= 1e-12 * r0 {
                return Ok(x);
            }
            if rn > 0.5 * prev {
                if rn <= 1e-8 * r0 {
                    return Ok(x);
                }
                break;
            }
            prev = rn;
        }
        let opts = SolveOptions {
            increments: 1,
            newton: NewtonOptions {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                ..Default::default()
            },
            ..Default::default()
        };
        let resp = self.solve_from(state, base_free.to_vec(), state, &opts)?;
        Ok(self.free_of(&resp))
    }

    /// Finite-difference tangents around a converged response.
    pub fn tangents(&self, base: &MicroResponse, opts: &TangentOptions) -> Result<TangentPair> {
        if !(opts.delta > 0.0) {
            return Err(Error::Argument(format!("tangent step must be positive, got {}", opts.delta)));
        }
        let free = self.free_of(base);
        let (_, jac) = self.system(&base.state, &free)?;
        let factor = LinearSolver::new().factorize(&jac)?;
        let avg0 = base.avg_grad_u1;
        let d = opts.delta;

        let eval = |label: String, perturb: &dyn Fn(f64) -> MacroState| -> Result<Mat3> {
            let wrap = |e: Error| Error::Tangent {
                component: label.clone(),
                reason: e.to_string(),
            };
            let plus = self.perturbed(&factor, &free, &perturb(d)).map_err(wrap)?;
            let ap = self.average_gradient(&plus)?;
            if opts.central {
                let minus = self.perturbed(&factor, &free, &perturb(-d)).map_err(wrap)?;
                let am = self.average_gradient(&minus)?;
                Ok((ap - am) / (2.0 * d))
            } else {
                Ok((ap - avg0) / d)
            }
        };

        let mut out = TangentPair::zero();
        for &(k, l) in &opts.components {
            let col = eval(component_label("grad_u0", k, l), &|h| {
                let mut s = base.state;
                s.grad_u0[(k, l)] += h;
                s
            })?;
            for i in 0..3 {
                for j in 0..3 {
                    out.m.set(i, j, k, l, col[(i, j)]);
                }
            }
        }
        if opts.pressure {
            out.q = eval("p0".into(), &|h| {
                let mut s = base.state;
                s.p0 += h;
                s
            })?;
        }
        Ok(out)
    }
}

/// Solves the base state from rest and differentiates around it.
pub fn tangents(mesh: &Mesh, periodic: &PeriodicMap, params: MaterialParams, base: &MacroState, delta: f64) -> Result<TangentPair> {
    let cell = SolidCell::new(mesh, periodic, params)?;
    let resp = cell.solve(base, &SolveOptions::default())?;
    cell.tangents(
        &resp,
        &TangentOptions {
            delta,
            ..Default::default()
        },
    )
}
