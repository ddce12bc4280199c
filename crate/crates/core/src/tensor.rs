//! Small fixed-size tensor helpers shared by the material, cell and macroscale solvers.
//!
//! Second-order tensors are `nalgebra::Matrix3<f64>`. Fourth-order tensors are stored
//! as a 9x9 array indexed by flattened pairs `(3i + j, 3k + l)` so that `A:B` is a
//! plain matrix-vector product on the flattened second-order argument.

use std::ops::{Add, AddAssign, Mul, Sub};

pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

#[inline]
pub fn pair(i: usize, j: usize) -> usize {
    3 * i + j
}

/// Levi-Civita symbol.
#[inline]
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Cofactor matrix `det(F) F^-T`, defined for any F.
pub fn cofactor(f: &Mat3) -> Mat3 {
    let mut c = Mat3::zeros();
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for j in 0..3 {
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            c[(i, j)] = f[(i1, j1)] * f[(i2, j2)] - f[(i1, j2)] * f[(i2, j1)];
        }
    }
    c
}

/// Derivative of the cofactor matrix: `d cof(F)_{iJ} / d F_{kL}`.
pub fn cofactor_derivative(f: &Mat3) -> Tensor4 {
    let mut d = Tensor4::zeros();
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                for ll in 0..3 {
                    let mut s = 0.0;
                    for m in 0..3 {
                        let e1 = levi_civita(i, k, m);
                        if e1 == 0.0 {
                            continue;
                        }
                        for n in 0..3 {
                            let e2 = levi_civita(jj, ll, n);
                            if e2 != 0.0 {
                                s += e1 * e2 * f[(m, n)];
                            }
                        }
                    }
                    d.set(i, jj, k, ll, s);
                }
            }
        }
    }
    d
}

/// Frobenius inner product `A:B`.
#[inline]
pub fn ddot(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

pub fn flatten(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[pair(i, j)] = m[(i, j)];
        }
    }
    out
}

pub fn unflatten(v: &[f64]) -> Mat3 {
    Mat3::from_fn(|i, j| v[pair(i, j)])
}

/// Fourth-order tensor with flattened `(ij, kl)` storage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor4(pub [[f64; 9]; 9]);

impl Default for Tensor4 {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Tensor4 {
    pub fn zeros() -> Self {
        Tensor4([[0.0; 9]; 9])
    }

    /// Identity on second-order tensors: `I_{ijkl} = δ_ik δ_jl`.
    pub fn identity() -> Self {
        let mut t = Self::zeros();
        for a in 0..9 {
            t.0[a][a] = 1.0;
        }
        t
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[pair(i, j)][pair(k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.0[pair(i, j)][pair(k, l)] = v;
    }

    /// `(A:H)_{ij} = A_{ijkl} H_{kl}`.
    pub fn contract(&self, h: &Mat3) -> Mat3 {
        let hf = flatten(h);
        let mut out = [0.0; 9];
        for (a, row) in self.0.iter().enumerate() {
            out[a] = row.iter().zip(hf.iter()).map(|(x, y)| x * y).sum();
        }
        unflatten(&out)
    }

    /// `(H:A)_{kl} = H_{ij} A_{ijkl}`.
    pub fn left_contract(&self, h: &Mat3) -> Mat3 {
        let hf = flatten(h);
        let mut out = [0.0; 9];
        for (a, row) in self.0.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                out[b] += hf[a] * v;
            }
        }
        unflatten(&out)
    }

    /// `(A:B)_{ijmn} = A_{ijkl} B_{klmn}`.
    pub fn compose(&self, other: &Tensor4) -> Tensor4 {
        let mut out = Tensor4::zeros();
        for a in 0..9 {
            for c in 0..9 {
                let mut s = 0.0;
                for b in 0..9 {
                    s += self.0[a][b] * other.0[b][c];
                }
                out.0[a][c] = s;
            }
        }
        out
    }

    /// Major transpose `A_{klij}`.
    pub fn major_transpose(&self) -> Tensor4 {
        let mut out = Tensor4::zeros();
        for a in 0..9 {
            for b in 0..9 {
                out.0[b][a] = self.0[a][b];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Tensor4 {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_{ijkl} - A_{klij}|`.
    pub fn major_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..9 {
            for b in 0..9 {
                m = m.max((self.0[a][b] - self.0[b][a]).abs());
            }
        }
        m
    }
}

impl Add for Tensor4 {
    type Output = Tensor4;
    fn add(mut self, rhs: Tensor4) -> Tensor4 {
        self += rhs;
        self
    }
}

impl AddAssign for Tensor4 {
    fn add_assign(&mut self, rhs: Tensor4) {
        for a in 0..9 {
            for b in 0..9 {
                self.0[a][b] += rhs.0[a][b];
            }
        }
    }
}

impl Sub for Tensor4 {
    type Output = Tensor4;
    fn sub(mut self, rhs: Tensor4) -> Tensor4 {
        for a in 0..9 {
            for b in 0..9 {
                self.0[a][b] -= rhs.0[a][b];
            }
        }
        self
    }
}

impl Mul<f64> for Tensor4 {
    type Output = Tensor4;
    fn mul(self, rhs: f64) -> Tensor4 {
        self.scale(rhs)
    }
}

/// Index name of a tensor component, 1-based as in `grad_u0_22`.
pub fn component_label(prefix: &str, i: usize, j: usize) -> String {
    format!("{prefix}_{}{}", i + 1, j + 1)
}

/// Parses `"<prefix>_ij"` with 1-based indices.
pub fn parse_component(label: &str, prefix: &str) -> Option<(usize, usize)> {
    let rest = label.strip_prefix(prefix)?.strip_prefix('_')?;
    let bytes = rest.as_bytes();
    if bytes.len() != 2 {
        return None;
    }
    let i = (bytes[0] as char).to_digit(10)? as usize;
    let j = (bytes[1] as char).to_digit(10)? as usize;
    if (1..=3).contains(&i) && (1..=3).contains(&j) {
        Some((i - 1, j - 1))
    } else {
        None
    }
}
