//! Trilinear 8-node hexahedron on the bi-unit cube, node order as in Gmsh.

use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::tensor::{Mat3, Vec3};

pub const REFERENCE_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local faces, counter-clockwise seen from outside: ξ-, ξ+, η-, η+, ζ-, ζ+.
pub const FACES: [[usize; 4]; 6] = [[0, 4, 7, 3], [1, 2, 6, 5], [0, 1, 5, 4], [3, 7, 6, 2], [0, 3, 2, 1], [4, 5, 6, 7]];

/// `(axis, upper)` of each local face.
pub const FACE_AXES: [(usize, bool); 6] = [(0, false), (0, true), (1, false), (1, true), (2, false), (2, true)];

const FACE_REF: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

pub fn shape(xi: &[f64; 3]) -> [f64; 8] {
    REFERENCE_NODES.map(|r| 0.125 * (1.0 + r[0] * xi[0]) * (1.0 + r[1] * xi[1]) * (1.0 + r[2] * xi[2]))
}

pub fn shape_derivatives(xi: &[f64; 3]) -> [[f64; 3]; 8] {
    REFERENCE_NODES.map(|r| {
        let a = 1.0 + r[0] * xi[0];
        let b = 1.0 + r[1] * xi[1];
        let c = 1.0 + r[2] * xi[2];
        [0.125 * r[0] * b * c, 0.125 * r[1] * a * c, 0.125 * r[2] * a * b]
    })
}

/// `J_ij = ∂x_i/∂ξ_j`.
pub fn jacobian(x: &[Point; 8], xi: &[f64; 3]) -> Mat3 {
    jacobian_from(x, &shape_derivatives(xi))
}

fn jacobian_from(x: &[Point; 8], dn: &[[f64; 3]; 8]) -> Mat3 {
    let mut j = Mat3::zeros();
    for a in 0..8 {
        for i in 0..3 {
            for k in 0..3 {
                j[(i, k)] += x[a][i] * dn[a][k];
            }
        }
    }
    j
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn gauss_1d(n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    Some(match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => return None,
    })
}

impl QuadratureRule {
    /// Tensor-product Gauss-Legendre rule with `n` points per direction, `n` in 1..=3.
    pub fn gauss(n: usize) -> Result<Self> {
        let (p, w) = gauss_1d(n).ok_or_else(|| Error::Argument(format!("no {n}-point Gauss rule")))?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    points.push([p[i], p[j], p[k]]);
                    weights.push(w[i] * w[j] * w[k]);
                }
            }
        }
        Ok(Self { points, weights })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub xi: [f64; 3],
    pub weight: f64,
    pub n: [f64; 8],
    pub dn: [[f64; 3]; 8],
}

static GAUSS: LazyLock<[QuadPoint; 8]> = LazyLock::new(|| {
    let rule = QuadratureRule::gauss(2).unwrap();
    std::array::from_fn(|q| {
        let xi = rule.points[q];
        QuadPoint {
            xi,
            weight: rule.weights[q],
            n: shape(&xi),
            dn: shape_derivatives(&xi),
        }
    })
});

/// The default 2x2x2 rule with tabulated shape data.
pub fn gauss_points() -> &'static [QuadPoint; 8] {
    &GAUSS
}

/// Physical shape gradients `∂N_a/∂x` and `det J` at a quadrature point.
pub fn gradients(x: &[Point; 8], q: &QuadPoint) -> Result<([[f64; 3]; 8], f64)> {
    let j = jacobian_from(x, &q.dn);
    let det = j.determinant();
    let inv = j
        .try_inverse()
        .filter(|_| det > 0.0)
        .ok_or_else(|| Error::InvalidMesh(format!("non-positive element Jacobian {det:e}")))?;
    let mut g = [[0.0; 3]; 8];
    for a in 0..8 {
        for i in 0..3 {
            g[a][i] = (0..3).map(|k| q.dn[a][k] * inv[(k, i)]).sum();
        }
    }
    Ok((g, det))
}

#[derive(Clone, Copy, Debug)]
pub struct FacePoint {
    pub weight: f64,
    pub n: [f64; 4],
    pub dn: [[f64; 2]; 4],
}

static FACE_GAUSS: LazyLock<[FacePoint; 4]> = LazyLock::new(|| {
    let a = 1.0 / 3f64.sqrt();
    let pts = [[-a, -a], [a, -a], [a, a], [-a, a]];
    pts.map(|[s, t]| FacePoint {
        weight: 1.0,
        n: FACE_REF.map(|r| 0.25 * (1.0 + r[0] * s) * (1.0 + r[1] * t)),
        dn: FACE_REF.map(|r| [0.25 * r[0] * (1.0 + r[1] * t), 0.25 * r[1] * (1.0 + r[0] * s)]),
    })
});

/// 2x2 Gauss rule on a quadrilateral face with bilinear shape data.
pub fn face_points() -> &'static [FacePoint; 4] {
    &FACE_GAUSS
}

/// Unnormalized outward area vector `∂x/∂s × ∂x/∂t` of a face at a face point.
pub fn face_area_vector(x: &[Vec3; 4], q: &FacePoint) -> Vec3 {
    let mut xs = Vec3::zeros();
    let mut xt = Vec3::zeros();
    for a in 0..4 {
        xs += x[a] * q.dn[a][0];
        xt += x[a] * q.dn[a][1];
    }
    xs.cross(&xt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_cell() -> [Point; 8] {
        let a = Mat3::new(0.6, 0.1, 0.0, -0.05, 0.4, 0.1, 0.02, 0.0, 0.5);
        let b = Vec3::new(0.3, -0.2, 1.0);
        REFERENCE_NODES.map(|r| {
            let p = a * Vec3::from(r) + b;
            [p.x, p.y, p.z]
        })
    }

    #[test]
    fn partition_of_unity_and_nodal_interpolation() {
        let n = shape(&[0.2, -0.7, 0.4]);
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for (a, r) in REFERENCE_NODES.iter().enumerate() {
            let n = shape(r);
            for (b, v) in n.iter().enumerate() {
                assert_eq!(*v, if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn weights_sum_to_reference_volume() {
        for n in 1..=3 {
            let r = QuadratureRule::gauss(n).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn trilinear_function_integrates_exactly() {
        // On the reference cube ∫ (1 + ξ)(2 + η)(3 - ζ) = 2·4·6 = 48 and ∫ ξηζ = 0.
        let f = |x: &[f64; 3]| (1.0 + x[0]) * (2.0 + x[1]) * (3.0 - x[2]) + x[0] * x[1] * x[2];
        let s: f64 = gauss_points().iter().map(|q| f(&q.xi) * q.weight).sum();
        assert!((s - 48.0).abs() < 1e-13);
    }

    #[test]
    fn gradients_reproduce_linear_field() {
        let x = affine_cell();
        let g = Vec3::new(0.7, -1.3, 2.1);
        let u: Vec<f64> = x.iter().map(|p| g.dot(&Vec3::from(*p))).collect();
        for q in gauss_points() {
            let (dn, _) = gradients(&x, q).unwrap();
            for i in 0..3 {
                let d: f64 = (0..8).map(|a| u[a] * dn[a][i]).sum();
                assert!((d - g[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn face_vectors_point_outward_and_close() {
        let x = affine_cell();
        let centre: Vec3 = x.iter().map(|p| Vec3::from(*p)).sum::<Vec3>() / 8.0;
        let mut total = Vec3::zeros();
        for face in FACES {
            let fx = face.map(|a| Vec3::from(x[a]));
            let fc: Vec3 = fx.iter().sum::<Vec3>() / 4.0;
            for q in face_points() {
                let v = face_area_vector(&fx, q) * q.weight;
                assert!(v.dot(&(fc - centre)) > 0.0);
                total += v;
            }
        }
        assert!(total.norm() < 1e-14);
    }
}
