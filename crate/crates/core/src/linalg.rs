//! 4x4 linear algebra over plain numbers and over jets.
//!
//! The metric synthesis takes matrix square roots and inverses of fields
//! whose entries are jets, so the basic operations are generic over a small
//! ring abstraction.  The eigen decomposition, which needs comparisons, is
//! provided for numbers only; jet-level square roots go through a
//! Denman-Beavers iteration that never compares entries.

use crate::config::{JACOBI_TOL, SQRT_ITER_MAX, SQRT_ITER_TOL};
use crate::jet::Jet;

/// The operations matrix algorithms need from their entries.
pub trait Ring: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn recip(&self) -> Self;
    fn scale(&self, s: f64) -> Self;
    /// Leading (value) part, used for pivot selection.
    fn lead(&self) -> f64;
    /// Magnitude including all jet coefficients, used for convergence tests.
    fn mag(&self) -> f64;
}

impl Ring for f64 {
    fn zero_like(&self) -> f64 {
        0.0
    }
    fn one_like(&self) -> f64 {
        1.0
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
    fn scale(&self, s: f64) -> f64 {
        self * s
    }
    fn lead(&self) -> f64 {
        *self
    }
    fn mag(&self) -> f64 {
        self.abs()
    }
}

impl Ring for Jet {
    fn zero_like(&self) -> Jet {
        Jet::zeros(self.order())
    }
    fn one_like(&self) -> Jet {
        Jet::constant(self.order(), 1.0)
    }
    fn add(&self, o: &Jet) -> Jet {
        self + o
    }
    fn sub(&self, o: &Jet) -> Jet {
        self - o
    }
    fn mul(&self, o: &Jet) -> Jet {
        self * o
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
    fn scale(&self, s: f64) -> Jet {
        Jet::scale(self, s)
    }
    fn lead(&self) -> f64 {
        self.val()
    }
    fn mag(&self) -> f64 {
        self.max_abs_coeff()
    }
}

/// A 4x4 matrix over a ring.
#[derive(Debug, Clone)]
pub struct Mat4<T>(pub [[T; 4]; 4]);

impl<T: Ring> Mat4<T> {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Mat4<T> {
        Mat4(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub fn identity_like(sample: &T) -> Mat4<T> {
        Mat4::from_fn(|i, j| {
            if i == j {
                sample.one_like()
            } else {
                sample.zero_like()
            }
        })
    }

    pub fn transpose(&self) -> Mat4<T> {
        Mat4::from_fn(|i, j| self.0[j][i].clone())
    }

    pub fn add(&self, o: &Mat4<T>) -> Mat4<T> {
        Mat4::from_fn(|i, j| self.0[i][j].add(&o.0[i][j]))
    }

    pub fn sub(&self, o: &Mat4<T>) -> Mat4<T> {
        Mat4::from_fn(|i, j| self.0[i][j].sub(&o.0[i][j]))
    }

    pub fn scale(&self, s: f64) -> Mat4<T> {
        Mat4::from_fn(|i, j| self.0[i][j].scale(s))
    }

    pub fn matmul(&self, o: &Mat4<T>) -> Mat4<T> {
        Mat4::from_fn(|i, j| {
            let mut acc = self.0[i][0].mul(&o.0[0][j]);
            for k in 1..4 {
                acc = acc.add(&self.0[i][k].mul(&o.0[k][j]));
            }
            acc
        })
    }

    pub fn apply(&self, v: &[T; 4]) -> [T; 4] {
        std::array::from_fn(|i| {
            let mut acc = self.0[i][0].mul(&v[0]);
            for k in 1..4 {
                acc = acc.add(&self.0[i][k].mul(&v[k]));
            }
            acc
        })
    }

    pub fn max_mag(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(Ring::mag)
            .fold(0.0f64, f64::max)
    }

    /// Gauss-Jordan inverse with partial pivoting on the leading parts.
    pub fn inverse(&self) -> Mat4<T> {
        let mut m = self.clone();
        let mut inv = Mat4::identity_like(&self.0[0][0]);
        for col in 0..4 {
            let piv = (col..4)
                .max_by(|&a, &b| {
                    m.0[a][col]
                        .lead()
                        .abs()
                        .partial_cmp(&m.0[b][col].lead().abs())
                        .expect("NaN pivot")
                })
                .unwrap();
            assert!(
                m.0[piv][col].lead() != 0.0,
                "matrix is singular to working precision"
            );
            m.0.swap(col, piv);
            inv.0.swap(col, piv);
            let d = m.0[col][col].recip();
            for k in 0..4 {
                m.0[col][k] = m.0[col][k].mul(&d);
                inv.0[col][k] = inv.0[col][k].mul(&d);
            }
            for r in 0..4 {
                if r == col {
                    continue;
                }
                let f = m.0[r][col].clone();
                if f.mag() == 0.0 {
                    continue;
                }
                for k in 0..4 {
                    m.0[r][k] = m.0[r][k].sub(&f.mul(&m.0[col][k]));
                    inv.0[r][k] = inv.0[r][k].sub(&f.mul(&inv.0[col][k]));
                }
            }
        }
        inv
    }

    /// Principal square root by the Denman-Beavers iteration.  Quadratically
    /// convergent for matrices whose spectrum lies in the open right half
    /// plane; entries may be jets, in which case the Taylor coefficients of
    /// the square root field are produced along with the values.
    pub fn sqrt_db(&self) -> Mat4<T> {
        let mut y = self.clone();
        let mut z = Mat4::identity_like(&self.0[0][0]);
        for _ in 0..SQRT_ITER_MAX {
            let yn = y.add(&z.inverse()).scale(0.5);
            let zn = z.add(&y.inverse()).scale(0.5);
            let step = yn.sub(&y).max_mag();
            y = yn;
            z = zn;
            if step <= SQRT_ITER_TOL * (1.0 + y.max_mag()) {
                break;
            }
        }
        y
    }
}

/// Eigenvalues and eigenvectors of a symmetric 4x4 matrix by cyclic Jacobi
/// rotations.  Returns (eigenvalues, columns of the orthogonal matrix V)
/// with A = V diag(vals) V^T, eigenvalues in no particular order.
pub fn jacobi_eigh(a: &[[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut m = *a;
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..4 {
            for q in p + 1..4 {
                off = off.max(m[p][q].abs());
            }
        }
        if off <= JACOBI_TOL * (1.0 + m.iter().flatten().fold(0.0f64, |a, &x| a.max(x.abs()))) {
            break;
        }
        for p in 0..4 {
            for q in p + 1..4 {
                if m[p][q].abs() <= JACOBI_TOL {
                    continue;
                }
                let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..4 {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..4 {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    (std::array::from_fn(|i| m[i][i]), v)
}
