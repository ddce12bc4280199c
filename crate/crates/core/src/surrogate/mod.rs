//! Surrogate of the solid cell response for the confined column: adaptive dataset
//! generation, a small tanh network, and a micro provider built on it.
//!
//! Inputs are `(∂u₀₂/∂X₂, p₀)`, outputs the diagonal of the solid mean `⟨∇u₁⟩`.

mod io;
mod mlp;
mod sampler;

use std::sync::atomic::{AtomicUsize, Ordering};

pub use io::{dataset_from_str, dataset_to_string, model_from_str, model_to_string, DATASET_HEADER, MODEL_HEADER};
pub use mlp::{cost_and_gradient, train, Mlp, Normalizer, Prediction, TrainConfig, TrainingRecord};
pub use sampler::{adaptive_sample, replay, residual, Axis, Dataset, Sample, SamplerConfig};

use crate::error::Result;
use crate::macroscale::{MicroProvider, MicroSample};
use crate::solid::{MacroState, SolidCell, SolveOptions};
use crate::tensor::{Mat3, Tensor4};

pub const INPUT_NAMES: [&str; 2] = ["grad_u0_22", "p0"];
pub const OUTPUT_NAMES: [&str; 3] = ["avg_grad_u1_11", "avg_grad_u1_22", "avg_grad_u1_33"];

/// Gradient axis swept along lines of fixed pressure.
pub fn consolidation_axes(grad: (f64, f64), pressure: (f64, f64), steps: (f64, f64)) -> (Axis, Vec<Axis>) {
    (
        Axis::new(INPUT_NAMES[0], grad.0, grad.1, steps.0),
        vec![Axis::new(INPUT_NAMES[1], pressure.0, pressure.1, steps.1)],
    )
}

pub fn consolidation_state(input: &[f64]) -> MacroState {
    let mut h = Mat3::zeros();
    h[(1, 1)] = input[0];
    MacroState::new(h, input[1])
}

/// Solid cell oracle for one traversal line. Each call continues from the previous
/// converged state in a single increment, falling back to a solve from rest.
pub fn cell_oracle<'c>(cell: &'c SolidCell<'c>, opts: &'c SolveOptions) -> impl FnMut(&[f64]) -> Result<Vec<f64>> + 'c {
    let mut last: Option<(MacroState, Vec<f64>)> = None;
    let step = SolveOptions {
        increments: 1,
        max_bisections: opts.max_bisections + 3,
        ..*opts
    };
    move |input: &[f64]| {
        let target = consolidation_state(input);
        let resp = match &last {
            Some((s, free)) => cell
                .solve_from(s, free.clone(), &target, &step)
                .or_else(|_| cell.solve(&target, opts))?,
            None => cell.solve(&target, opts)?,
        };
        let g = resp.avg_grad_u1;
        last = Some((target, cell.free_of(&resp)));
        Ok(vec![g[(0, 0)], g[(1, 1)], g[(2, 2)]])
    }
}

/// Central-difference tangents of the prediction: `(∂out/∂in₀, ∂out/∂in₁)`.
pub fn surrogate_tangents(model: &Mlp, input: &[f64], delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let jac = model.jacobian(input, delta)?;
    Ok((jac.iter().map(|r| r[0]).collect(), jac.iter().map(|r| r[1]).collect()))
}

/// Micro response from a trained model. The prediction at the origin is subtracted so
/// the unloaded state maps exactly to a zero response.
pub struct SurrogateProvider {
    pub model: Mlp,
    pub offset: Vec<f64>,
    pub delta: f64,
    extrapolations: AtomicUsize,
}

impl SurrogateProvider {
    pub fn new(model: Mlp) -> Result<Self> {
        let offset = model.predict(&[0.0, 0.0])?.values;
        Ok(Self {
            model,
            offset,
            delta: 1e-6,
            extrapolations: AtomicUsize::new(0),
        })
    }

    /// Evaluations that fell more than 10% outside the training box.
    pub fn extrapolations(&self) -> usize {
        self.extrapolations.load(Ordering::Relaxed)
    }
}

impl MicroProvider for SurrogateProvider {
    fn evaluate(&self, s: &MacroState) -> Result<MicroSample> {
        let x = [s.grad_u0[(1, 1)], s.p0];
        let pred = self.model.predict(&x)?;
        if pred.extrapolated {
            self.extrapolations.fetch_add(1, Ordering::Relaxed);
        }
        let (dg, dp) = surrogate_tangents(&self.model, &x, self.delta)?;
        let mut out = MicroSample::zero();
        let mut m = Tensor4::zeros();
        for k in 0..3 {
            out.avg[(k, k)] = pred.values[k] - self.offset[k];
            m.set(k, k, 1, 1, dg[k]);
            out.q[(k, k)] = dp[k];
        }
        out.m = m;
        Ok(out)
    }

    fn name(&self) -> String {
        "surrogate".into()
    }
}
