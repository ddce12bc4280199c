//! Homogenized constitutive operations at one macroscale point.

use crate::error::{Error, Result};
use crate::material::{material_tangent, pk1, MaterialParams};
use crate::tensor::{cofactor, cofactor_derivative, Mat3, Tensor4, Vec3};

fn inverse(f: &Mat3) -> Result<(f64, Mat3)> {
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(Error::Kinematic { det });
    }
    Ok((det, f.try_inverse().ok_or(Error::Kinematic { det })?))
}

/// `P_E = Vₛ P(F̄) - p V_f cof(F̄)`, where `cof(F̄) = Ḡᵀ`.
pub fn effective_stress(fbar: &Mat3, p: f64, vs: f64, vf: f64, params: &MaterialParams) -> Result<Mat3> {
    Ok(vs * pk1(fbar, params)? - p * vf * cofactor(fbar))
}

/// `∂P_E/∂F̄` at fixed `p`, and `∂P_E/∂p` at fixed `F̄`.
pub fn effective_stress_derivatives(fbar: &Mat3, p: f64, vs: f64, vf: f64, params: &MaterialParams) -> Result<(Tensor4, Mat3)> {
    let a = material_tangent(fbar, params)? * vs - cofactor_derivative(fbar) * (p * vf);
    Ok((a, -vf * cofactor(fbar)))
}

/// Transformed seepage flux `⟨Ḡw⟩_f = -Ḡ Kᵢ F̄⁻ᵀ ∇p` and the untransformed relative
/// velocity `w = -Kᵢ F̄⁻ᵀ ∇p`.
pub fn transformed_darcy(fbar: &Mat3, k_i: &Mat3, grad_p: &Vec3) -> Result<(Vec3, Vec3)> {
    let (j, inv) = inverse(fbar)?;
    let w = -(k_i * inv.transpose() * grad_p);
    Ok((j * inv * w, w))
}

/// `K = J⁻¹ Ḡ Kᵢ F̄⁻ᵀ = F̄⁻¹ Kᵢ F̄⁻ᵀ`.
pub fn transformed_conductivity(fbar: &Mat3, k_i: &Mat3) -> Result<Mat3> {
    let (_, inv) = inverse(fbar)?;
    Ok(inv * k_i * inv.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat3 {
        Mat3::new(1.05, 0.1, -0.02, 0.03, 0.85, 0.05, -0.04, 0.02, 1.1)
    }

    #[test]
    fn reference_and_pressure_only() {
        let params = MaterialParams::default();
        let i = Mat3::identity();
        assert!(effective_stress(&i, 0.0, 0.71, 0.29, &params).unwrap().abs().max() < 1e-15);
        let pe = effective_stress(&i, 0.1, 0.71, 0.29, &params).unwrap();
        assert!((pe - Mat3::identity() * -0.029).abs().max() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let params = MaterialParams::from_poisson(0.3).unwrap();
        let (f, p, vs, vf) = (sample(), 0.15, 0.7, 0.3);
        let (a, dp) = effective_stress_derivatives(&f, p, vs, vf, &params).unwrap();
        let dir = Mat3::new(0.3, -0.1, 0.2, 0.05, -0.4, 0.1, 0.2, 0.1, 0.25);
        let h = 1e-6;
        let num = (effective_stress(&(f + dir * h), p, vs, vf, &params).unwrap()
            - effective_stress(&(f - dir * h), p, vs, vf, &params).unwrap())
            / (2.0 * h);
        let ana = a.contract(&dir);
        assert!((num - ana).abs().max() <= 1e-5 * ana.abs().max());
        let nump =
            (effective_stress(&f, p + h, vs, vf, &params).unwrap() - effective_stress(&f, p - h, vs, vf, &params).unwrap()) / (2.0 * h);
        assert!((nump - dp).abs().max() < 1e-8);
    }

    #[test]
    fn darcy_hand_values() {
        let k = 1.7;
        let ki = Mat3::identity() * k;
        let g = Vec3::new(0.0, 0.4, 0.0);
        let (q, w) = transformed_darcy(&Mat3::identity(), &ki, &g).unwrap();
        assert!((q - (-k * g)).norm() < 1e-15 && (w - q).norm() < 1e-15);
        let f = Mat3::from_diagonal(&Vec3::new(1.0, 0.7, 1.0));
        let (q, _) = transformed_darcy(&f, &ki, &g).unwrap();
        // -J F⁻¹ k F⁻ᵀ g = -0.7 · (1/0.7)² · k · 0.4 in the second component.
        assert!((q[1] + 0.7 * k * 0.4 / 0.49).abs() < 1e-14);
        assert!(q[0] == 0.0 && q[2] == 0.0);
        let (q, _) = transformed_darcy(&f, &ki, &Vec3::zeros()).unwrap();
        assert_eq!(q, Vec3::zeros());
    }

    #[test]
    fn conductivity_transforms_with_compression() {
        let ki = Mat3::identity() * 2.0;
        assert_eq!(transformed_conductivity(&Mat3::identity(), &ki).unwrap(), ki);
        let f = Mat3::from_diagonal(&Vec3::new(1.0, 0.98, 1.0));
        let k = transformed_conductivity(&f, &ki).unwrap();
        assert!(k[(1, 1)] > 2.0);
        assert_eq!(k[(0, 0)], 2.0);
        let f = Mat3::from_diagonal(&Vec3::new(1.01, 0.98, 1.01));
        let k = transformed_conductivity(&f, &ki).unwrap();
        assert!(k[(1, 1)] > 2.0 && k[(0, 0)] < 2.0);
    }
}
