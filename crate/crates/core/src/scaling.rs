//! Conversion between dimensionless and SI quantities.
//!
//! With force `f_c`, cell size `d`, column size `L` and viscosity `μ_c`:
//!
//! | kind | scale |
//! |---|---|
//! | displacement | `L` |
//! | stress, pressure, traction | `f_c / L²` |
//! | time | `L⁴ μ_c / (f_c d²)` |
//! | velocity | `f_c d² / (L³ μ_c)` |
//! | conductivity | velocity / (stress / L) `= d² / μ_c` |
//!
//! Conductivity follows from Darcy's law `w = -K ∇p`, so it carries the velocity scale
//! over the pressure-gradient scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicSet {
    /// Force, N.
    pub force: f64,
    /// Microscale length, m.
    pub micro_length: f64,
    /// Macroscale length, m.
    pub macro_length: f64,
    /// Viscosity, Pa·s.
    pub viscosity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Displacement,
    Velocity,
    Stress,
    Time,
    Traction,
    Conductivity,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::Displacement,
        Quantity::Velocity,
        Quantity::Stress,
        Quantity::Time,
        Quantity::Traction,
        Quantity::Conductivity,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "displacement" | "u" => Quantity::Displacement,
            "velocity" | "w" => Quantity::Velocity,
            "stress" | "pressure" | "p" => Quantity::Stress,
            "time" | "t" => Quantity::Time,
            "traction" => Quantity::Traction,
            "conductivity" | "k" => Quantity::Conductivity,
            other => {
                return Err(Error::Argument(format!(
                    "unknown quantity `{other}` (expected displacement, velocity, stress, pressure, time, traction or conductivity)"
                )))
            }
        })
    }

    pub fn unit(self) -> &'static str {
        match self {
            Quantity::Displacement => "m",
            Quantity::Velocity => "m/s",
            Quantity::Stress | Quantity::Traction => "Pa",
            Quantity::Time => "s",
            Quantity::Conductivity => "m^2/(Pa s)",
        }
    }
}

impl CharacteristicSet {
    pub const BRAIN: CharacteristicSet = CharacteristicSet {
        force: 1e-3,
        micro_length: 2e-6,
        macro_length: 1e-3,
        viscosity: 1.0,
    };

    pub const SOIL: CharacteristicSet = CharacteristicSet {
        force: 1.5e6,
        micro_length: 2e-4,
        macro_length: 1.0,
        viscosity: 1.0,
    };

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "brain" => Ok(Self::BRAIN),
            "soil" => Ok(Self::SOIL),
            _ => Err(Error::Argument(format!("unknown preset `{name}` (expected brain or soil)"))),
        }
    }

    /// Checks positivity; returns a warning when `d/L` exceeds 0.1.
    pub fn validate(&self) -> Result<Option<String>> {
        let vals = [
            ("force", self.force),
            ("micro_length", self.micro_length),
            ("macro_length", self.macro_length),
            ("viscosity", self.viscosity),
        ];
        let bad: Vec<String> = vals
            .iter()
            .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
            .map(|(n, v)| format!("{n} must be positive, got {v}"))
            .collect();
        if !bad.is_empty() {
            return Err(Error::Argument(bad.join("; ")));
        }
        let eps = self.epsilon();
        Ok((eps > 0.1).then(|| format!("scale ratio d/L = {eps} is not small; the two-scale model may not apply")))
    }

    pub fn epsilon(&self) -> f64 {
        self.micro_length / self.macro_length
    }

    pub fn scale(&self, q: Quantity) -> f64 {
        let (f, d, l, mu) = (self.force, self.micro_length, self.macro_length, self.viscosity);
        match q {
            Quantity::Displacement => l,
            Quantity::Stress | Quantity::Traction => f / (l * l),
            Quantity::Time => l.powi(4) * mu / (f * d * d),
            Quantity::Velocity => f * d * d / (l.powi(3) * mu),
            Quantity::Conductivity => d * d / mu,
        }
    }

    pub fn dimensionalize(&self, q: Quantity, value: f64) -> f64 {
        value * self.scale(q)
    }

    pub fn nondimensionalize(&self, q: Quantity, value: f64) -> f64 {
        value / self.scale(q)
    }
}
