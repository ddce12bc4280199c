//! Compressible neo-Hookean solid in non-dimensional form.
//!
//! With `μ' = 1/(2(1+ν))` and `λ' = ν/((1+ν)(1-2ν))` the energy is
//! `Ψ = μ'/2 (I₁ - 3) - μ' ln J + λ'/2 (ln J)²` and the first Piola-Kirchhoff stress is
//! `P = μ'(F - F⁻ᵀ) + λ' ln J F⁻ᵀ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mat3, Tensor4, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub nu: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl MaterialParams {
    pub fn from_poisson(nu: f64) -> Result<Self> {
        if !(nu > -1.0 && nu < 0.5) {
            return Err(Error::Argument(format!("Poisson ratio {nu} outside (-1, 0.5)")));
        }
        Ok(Self {
            nu,
            mu: 1.0 / (2.0 * (1.0 + nu)),
            lambda: nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        })
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::from_poisson(0.25).expect("default Poisson ratio is admissible")
    }
}

fn admissible(f: &Mat3) -> Result<(f64, Mat3)> {
    let det = f.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::Kinematic { det });
    }
    let inv = f.try_inverse().ok_or(Error::Kinematic { det })?;
    Ok((det, inv))
}

pub fn strain_energy(f: &Mat3, p: &MaterialParams) -> Result<f64> {
    let (j, _) = admissible(f)?;
    let i1 = f.norm_squared();
    let lnj = j.ln();
    Ok(0.5 * p.mu * (i1 - 3.0) - p.mu * lnj + 0.5 * p.lambda * lnj * lnj)
}

pub fn pk1(f: &Mat3, p: &MaterialParams) -> Result<Mat3> {
    let (j, inv) = admissible(f)?;
    let fit = inv.transpose();
    Ok(p.mu * (f - fit) + p.lambda * j.ln() * fit)
}

/// `A_{iJkL} = ∂P_{iJ}/∂F_{kL}`.
pub fn material_tangent(f: &Mat3, p: &MaterialParams) -> Result<Tensor4> {
    let (j, inv) = admissible(f)?;
    let lnj = j.ln();
    let c1 = p.mu - p.lambda * lnj;
    let mut a = Tensor4::zeros();
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut v = c1 * inv[(jj, k)] * inv[(l, i)] + p.lambda * inv[(jj, i)] * inv[(l, k)];
                    if i == k && jj == l {
                        v += p.mu;
                    }
                    a.set(i, jj, k, l, v);
                }
            }
        }
    }
    Ok(a)
}

/// Piola transformation tensor `G = J F⁻¹`.
pub fn piola_transform(f: &Mat3) -> Result<Mat3> {
    let (j, inv) = admissible(f)?;
    Ok(j * inv)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NansonArea {
    pub vector: Vec3,
    pub normal: Vec3,
    pub area: f64,
}

/// Nanson's formula `n da = Gᵀ N dA`.
pub fn nanson_area(f: &Mat3, normal: &Vec3, area: f64) -> Result<NansonArea> {
    let g = piola_transform(f)?;
    let vector = g.transpose() * normal * area;
    let norm = vector.norm();
    let normal = if norm > 0.0 { vector / norm } else { Vec3::zeros() };
    Ok(NansonArea {
        vector,
        normal,
        area: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_state_is_stress_free() {
        let p = MaterialParams::from_poisson(0.3).unwrap();
        let i = Mat3::identity();
        assert_eq!(strain_energy(&i, &p).unwrap(), 0.0);
        assert!(pk1(&i, &p).unwrap().abs().max() < 1e-15);
    }

    #[test]
    fn uniaxial_energy_matches_high_precision_value() {
        let p = MaterialParams::from_poisson(0.25).unwrap();
        let f = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        let psi = strain_energy(&f, &p).unwrap();
        assert!((psi - 0.418_831_730_559_662_16).abs() < 1e-14);
    }

    #[test]
    fn singular_deformation_is_rejected() {
        let p = MaterialParams::default();
        let f = Mat3::from_diagonal(&Vec3::new(0.0, 1.0, 1.0));
        assert!(matches!(strain_energy(&f, &p), Err(Error::Kinematic { .. })));
        assert!(matches!(pk1(&-Mat3::identity(), &p), Err(Error::Kinematic { .. })));
    }

    #[test]
    fn tangent_at_identity_is_linear_elastic() {
        let p = MaterialParams::from_poisson(0.25).unwrap();
        let a = material_tangent(&Mat3::identity(), &p).unwrap();
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let c = p.lambda * d(i, j) * d(k, l) + p.mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                        assert!((a.get(i, j, k, l) - c).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_leaves_energy_and_stress_zero() {
        let p = MaterialParams::default();
        let r = *nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).matrix();
        assert!(strain_energy(&r, &p).unwrap().abs() < 1e-12);
        assert!(pk1(&r, &p).unwrap().abs().max() < 1e-12);
    }

    #[test]
    fn piola_and_nanson_hand_values() {
        let f = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        let g = piola_transform(&f).unwrap();
        assert!((g - Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 2.0))).abs().max() < 1e-15);
        let n = nanson_area(&f, &Vec3::x(), 1.0).unwrap();
        assert!((n.vector - Vec3::x()).norm() < 1e-15);
        assert!((n.area - 1.0).abs() < 1e-15);
        let id = nanson_area(&Mat3::identity(), &Vec3::y(), 0.5).unwrap();
        assert_eq!(id.normal, Vec3::y());
        assert_eq!(id.area, 0.5);
    }
}
