//! Run configuration: a TOML file with one table per pipeline stage. Every field has a
//! default, so an empty file is a valid configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::NewtonOptions;
use crate::macroscale::ColumnOptions;
use crate::material::MaterialParams;
use crate::scaling::CharacteristicSet;
use crate::solid::{SolveOptions, TangentOptions};
use crate::surrogate::{consolidation_axes, Axis, SamplerConfig, TrainConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub fluid: FluidConfig,
    pub solid: SolidConfig,
    pub sampler: SamplerSection,
    pub training: TrainingSection,
    #[serde(rename = "macro")]
    pub column: MacroSection,
    pub scaling: ScalingSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Voxels per cell edge.
    pub resolution: usize,
    pub channel_radius: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            resolution: 12,
            channel_radius: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub poisson_ratio: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self { poisson_ratio: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidConfig {
    pub viscosity: f64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self { viscosity: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolidConfig {
    pub increments: usize,
    pub max_bisections: usize,
    pub newton_rel_tol: f64,
    pub newton_abs_tol: f64,
    pub newton_max_iter: usize,
    pub tangent_delta: f64,
}

impl Default for SolidConfig {
    fn default() -> Self {
        let s = SolveOptions::default();
        Self {
            increments: s.increments,
            max_bisections: s.max_bisections,
            newton_rel_tol: s.newton.rel_tol,
            newton_abs_tol: s.newton.abs_tol,
            newton_max_iter: s.newton.max_iter,
            tangent_delta: TangentOptions::default().delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub tol: f64,
    pub max_depth: usize,
    pub grad_min: f64,
    pub grad_max: f64,
    pub grad_step: f64,
    pub pressure_min: f64,
    pub pressure_max: f64,
    pub pressure_step: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_depth: 6,
            grad_min: -0.35,
            grad_max: 0.05,
            grad_step: 0.02,
            pressure_min: 0.0,
            pressure_max: 0.2,
            pressure_step: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub target_cost: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Held-out max abs error a model must meet before a column run accepts it.
    pub accuracy_gate: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: t.hidden,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            max_epochs: t.max_epochs,
            target_cost: t.target_cost,
            holdout_fraction: t.holdout_fraction,
            seed: t.seed,
            accuracy_gate: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Surrogate,
    Linear,
    Dns,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroSection {
    pub traction: f64,
    pub dt: f64,
    pub height: f64,
    pub breadth: f64,
    pub divisions: [usize; 3],
    pub ramp_increments: usize,
    pub total_time: f64,
    pub max_steps: usize,
    pub steady_tol: f64,
    pub stabilization: f64,
    pub max_halvings: usize,
    pub newton_rel_tol: f64,
    pub newton_abs_tol: f64,
    pub newton_max_iter: usize,
    pub profile_every: usize,
    pub provider: ProviderKind,
    /// Re-evaluate the micro response at every Newton iterate instead of once per step.
    pub refresh_each_iteration: bool,
}

impl Default for MacroSection {
    fn default() -> Self {
        let c = ColumnOptions::default();
        Self {
            traction: c.traction,
            dt: c.dt,
            height: c.height,
            breadth: c.breadth,
            divisions: c.divisions,
            ramp_increments: c.ramp_increments,
            total_time: c.total_time,
            max_steps: c.max_steps,
            steady_tol: c.steady_tol,
            stabilization: c.stabilization,
            max_halvings: c.max_halvings,
            newton_rel_tol: c.newton.rel_tol,
            newton_abs_tol: c.newton.abs_tol,
            newton_max_iter: c.newton.max_iter,
            profile_every: c.profile_every,
            provider: ProviderKind::Surrogate,
            refresh_each_iteration: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    /// `brain`, `soil`, or `custom` to use `custom_set`.
    pub preset: String,
    pub custom_set: Option<CharacteristicSet>,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            preset: "brain".into(),
            custom_set: None,
        }
    }
}

fn positive(errs: &mut Vec<String>, path: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(format!("{path}: must be positive, got {v}"));
    }
}

fn at_least(errs: &mut Vec<String>, path: &str, v: usize, min: usize) {
    if v < min {
        errs.push(format!("{path}: must be at least {min}, got {v}"));
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        let g = &self.geometry;
        at_least(&mut e, "geometry.resolution", g.resolution, 8);
        if !(g.channel_radius > 0.0 && g.channel_radius < 0.5) {
            e.push(format!("geometry.channel_radius: must lie in (0, 0.5), got {}", g.channel_radius));
        }
        let nu = self.material.poisson_ratio;
        if !(nu > -1.0 && nu < 0.5) {
            e.push(format!("material.poisson_ratio: must lie in (-1, 0.5), got {nu}"));
        }
        positive(&mut e, "fluid.viscosity", self.fluid.viscosity);

        let s = &self.solid;
        at_least(&mut e, "solid.increments", s.increments, 1);
        at_least(&mut e, "solid.newton_max_iter", s.newton_max_iter, 1);
        positive(&mut e, "solid.newton_rel_tol", s.newton_rel_tol);
        positive(&mut e, "solid.newton_abs_tol", s.newton_abs_tol);
        positive(&mut e, "solid.tangent_delta", s.tangent_delta);

        let sa = &self.sampler;
        positive(&mut e, "sampler.tol", sa.tol);
        positive(&mut e, "sampler.grad_step", sa.grad_step);
        positive(&mut e, "sampler.pressure_step", sa.pressure_step);
        if !(sa.grad_min < sa.grad_max) {
            e.push(format!(
                "sampler.grad_min: must be below grad_max ({} >= {})",
                sa.grad_min, sa.grad_max
            ));
        }
        if !(sa.pressure_min <= sa.pressure_max) {
            e.push(format!(
                "sampler.pressure_min: must not exceed pressure_max ({} > {})",
                sa.pressure_min, sa.pressure_max
            ));
        }

        let t = &self.training;
        if t.hidden.is_empty() || t.hidden.contains(&0) {
            e.push(format!(
                "training.hidden: needs at least one positive layer size, got {:?}",
                t.hidden
            ));
        }
        positive(&mut e, "training.learning_rate", t.learning_rate);
        positive(&mut e, "training.epsilon", t.epsilon);
        positive(&mut e, "training.accuracy_gate", t.accuracy_gate);
        for (name, b) in [("training.beta1", t.beta1), ("training.beta2", t.beta2)] {
            if !(0.0..1.0).contains(&b) {
                e.push(format!("{name}: must lie in [0, 1), got {b}"));
            }
        }
        if !(0.0..1.0).contains(&t.holdout_fraction) {
            e.push(format!("training.holdout_fraction: must lie in [0, 1), got {}", t.holdout_fraction));
        }

        let m = &self.column;
        for (name, v) in [
            ("height", m.height),
            ("breadth", m.breadth),
            ("dt", m.dt),
            ("total_time", m.total_time),
        ] {
            positive(&mut e, &format!("macro.{name}"), v);
        }
        positive(&mut e, "macro.newton_rel_tol", m.newton_rel_tol);
        positive(&mut e, "macro.newton_abs_tol", m.newton_abs_tol);
        if !m.traction.is_finite() {
            e.push(format!("macro.traction: must be finite, got {}", m.traction));
        }
        if !(m.stabilization >= 0.0) {
            e.push(format!("macro.stabilization: must be non-negative, got {}", m.stabilization));
        }
        if !(m.steady_tol >= 0.0) {
            e.push(format!("macro.steady_tol: must be non-negative, got {}", m.steady_tol));
        }
        if m.divisions.contains(&0) {
            e.push(format!("macro.divisions: entries must be positive, got {:?}", m.divisions));
        }
        at_least(&mut e, "macro.ramp_increments", m.ramp_increments, 1);
        at_least(&mut e, "macro.max_steps", m.max_steps, 1);
        at_least(&mut e, "macro.newton_max_iter", m.newton_max_iter, 1);

        match self.scaling.preset.as_str() {
            "brain" | "soil" => {}
            "custom" => match &self.scaling.custom_set {
                Some(c) => {
                    if let Err(err) = c.validate() {
                        e.push(format!("scaling.custom_set: {err}"));
                    }
                }
                None => e.push("scaling.custom_set: required when preset = \"custom\"".into()),
            },
            other => e.push(format!("scaling.preset: expected brain, soil or custom, got `{other}`")),
        }

        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    pub fn material_params(&self) -> Result<MaterialParams> {
        MaterialParams::from_poisson(self.material.poisson_ratio)
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solid;
        SolveOptions {
            increments: s.increments,
            max_bisections: s.max_bisections,
            newton: NewtonOptions {
                rel_tol: s.newton_rel_tol,
                abs_tol: s.newton_abs_tol,
                max_iter: s.newton_max_iter,
                ..NewtonOptions::default()
            },
        }
    }

    pub fn tangent_options(&self) -> TangentOptions {
        TangentOptions {
            delta: self.solid.tangent_delta,
            ..TangentOptions::default()
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            tol: self.sampler.tol,
            max_depth: self.sampler.max_depth,
            ..SamplerConfig::default()
        }
    }

    pub fn sampler_axes(&self) -> (Axis, Vec<Axis>) {
        let s = &self.sampler;
        consolidation_axes(
            (s.grad_min, s.grad_max),
            (s.pressure_min, s.pressure_max),
            (s.grad_step, s.pressure_step),
        )
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            hidden: t.hidden.clone(),
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            max_epochs: t.max_epochs,
            target_cost: t.target_cost,
            holdout_fraction: t.holdout_fraction,
            seed: t.seed,
        }
    }

    pub fn column_options(&self) -> ColumnOptions {
        let m = &self.column;
        let d = ColumnOptions::default();
        ColumnOptions {
            height: m.height,
            breadth: m.breadth,
            divisions: m.divisions,
            traction: m.traction,
            dt: m.dt,
            ramp_increments: m.ramp_increments,
            total_time: m.total_time,
            max_steps: m.max_steps,
            steady_tol: m.steady_tol,
            stabilization: m.stabilization,
            max_halvings: m.max_halvings,
            newton: NewtonOptions {
                rel_tol: m.newton_rel_tol,
                abs_tol: m.newton_abs_tol,
                max_iter: m.newton_max_iter,
                ..d.newton
            },
            profile_every: m.profile_every,
        }
    }

    pub fn characteristic_set(&self) -> Result<CharacteristicSet> {
        match (self.scaling.preset.as_str(), &self.scaling.custom_set) {
            ("custom", Some(c)) => Ok(*c),
            (name, _) => CharacteristicSet::preset(name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.column_options(), ColumnOptions::default());
        assert_eq!(c.train_config(), TrainConfig::default());
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn sections_override() {
        let c = RunConfig::from_toml("[macro]\ntraction = -0.01\nprovider = \"linear\"\n[material]\npoisson_ratio = 0.3\n").unwrap();
        assert_eq!(c.column.traction, -0.01);
        assert_eq!(c.column.provider, ProviderKind::Linear);
        assert!((c.material_params().unwrap().nu - 0.3).abs() < 1e-15);
    }

    #[test]
    fn all_errors_are_reported_with_paths() {
        let text = "[geometry]\nresolution = 4\n[fluid]\nviscosity = -1.0\n[macro]\ndt = 0.0\n[scaling]\npreset = \"mars\"\n";
        match RunConfig::from_toml(text) {
            Err(Error::Config(m)) => {
                let all = m.join("\n");
                for p in ["geometry.resolution", "fluid.viscosity", "macro.", "scaling.preset"] {
                    assert!(all.contains(p), "{p} missing from {all}");
                }
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::from_toml("[fluid]\nvisc = 1.0\n"), Err(Error::Config(_))));
    }
}
