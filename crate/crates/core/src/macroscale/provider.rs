//! Micro response at a macroscale quadrature point.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::Result;
use crate::solid::{MacroState, SolidCell, SolveOptions, TangentOptions};
use crate::tensor::{Mat3, Tensor4};

/// Solid mean `⟨∇u₁⟩` with its tangents `M` and `Q` at one macro state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicroSample {
    pub avg: Mat3,
    pub m: Tensor4,
    pub q: Mat3,
}

impl MicroSample {
    pub fn zero() -> Self {
        Self {
            avg: Mat3::zeros(),
            m: Tensor4::zeros(),
            q: Mat3::zeros(),
        }
    }
}

pub trait MicroProvider: Sync {
    fn evaluate(&self, state: &MacroState) -> Result<MicroSample>;

    /// Short name recorded in run manifests.
    fn name(&self) -> String;
}

/// Rigid micro structure: `⟨∇u₁⟩ = 0`.
pub struct ZeroProvider;

impl MicroProvider for ZeroProvider {
    fn evaluate(&self, _: &MacroState) -> Result<MicroSample> {
        Ok(MicroSample::zero())
    }

    fn name(&self) -> String {
        "zero".into()
    }
}

/// Constant tangents: `⟨∇u₁⟩ = M:∇u₀ + Q p₀`.
pub struct LinearProvider {
    pub m: Tensor4,
    pub q: Mat3,
}

impl MicroProvider for LinearProvider {
    fn evaluate(&self, s: &MacroState) -> Result<MicroSample> {
        Ok(MicroSample {
            avg: self.m.contract(&s.grad_u0) + self.q * s.p0,
            m: self.m,
            q: self.q,
        })
    }

    fn name(&self) -> String {
        "linear".into()
    }
}

/// Direct solves of the solid cell at every requested state, memoized on the exact
/// input bits.
pub struct DnsProvider<'a> {
    cell: SolidCell<'a>,
    solve: SolveOptions,
    tangent: TangentOptions,
    cache: Mutex<HashMap<[u64; 10], MicroSample>>,
}

impl<'a> DnsProvider<'a> {
    pub fn new(cell: SolidCell<'a>, solve: SolveOptions, tangent: TangentOptions) -> Self {
        Self {
            cell,
            solve,
            tangent,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn key(s: &MacroState) -> [u64; 10] {
        let mut k = [0; 10];
        for (a, v) in s.grad_u0.iter().enumerate() {
            k[a] = v.to_bits();
        }
        k[9] = s.p0.to_bits();
        k
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

impl MicroProvider for DnsProvider<'_> {
    fn evaluate(&self, s: &MacroState) -> Result<MicroSample> {
        let key = Self::key(s);
        if let Some(hit) = self.cache.lock().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(hit);
        }
        let resp = self.cell.solve(s, &self.solve)?;
        let t = self.cell.tangents(&resp, &self.tangent)?;
        let sample = MicroSample {
            avg: resp.avg_grad_u1,
            m: t.m,
            q: t.q,
        };
        if let Ok(mut c) = self.cache.lock() {
            c.insert(key, sample);
        }
        Ok(sample)
    }

    fn name(&self) -> String {
        "dns".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_provider_is_affine() {
        let mut m = Tensor4::zeros();
        m.set(1, 1, 1, 1, -0.23);
        m.set(0, 0, 1, 1, -0.076);
        let q = Mat3::identity() * -0.113;
        let p = LinearProvider { m, q };
        let mut h = Mat3::zeros();
        h[(1, 1)] = -0.1;
        let s = p.evaluate(&MacroState::new(h, 0.2)).unwrap();
        assert!((s.avg[(1, 1)] - (0.023 - 0.0226)).abs() < 1e-15);
        assert!((s.avg[(0, 0)] - (0.0076 - 0.0226)).abs() < 1e-15);
        assert_eq!(ZeroProvider.evaluate(&MacroState::new(h, 0.2)).unwrap(), MicroSample::zero());
    }
}
