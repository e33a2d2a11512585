//! Small dense complex matrices, enough for ball automorphisms.

use crate::scalar::{abs2, Scalar};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "Vec<Vec<Complex<T>>>",
    try_from = "Vec<Vec<Complex<T>>>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct CMatrix<T: Scalar> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<Complex<T>>> {
        self.data.chunks(self.n.max(1)).map(|c| c.to_vec()).collect()
    }

    pub fn conj(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| *z * c).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                    acc + self[(i, j)] * v[j]
                })
            })
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + abs2(*z)).sqrt()
    }

    /// `|| M^H M - I ||_F`
    pub fn unitarity_residual(&self) -> T {
        self.adjoint().mul(self).sub(&Self::identity(self.n)).frobenius()
    }

    /// Gram-Schmidt orthonormalization of the columns.
    pub fn orthonormalized(&self) -> Option<Self> {
        let n = self.n;
        let mut cols: Vec<Vec<Complex<T>>> = (0..n).map(|j| (0..n).map(|i| self[(i, j)]).collect()).collect();
        for j in 0..n {
            for k in 0..j {
                let proj = inner(&cols[j], &cols[k]);
                let ck = cols[k].clone();
                for (x, y) in cols[j].iter_mut().zip(ck) {
                    *x = *x - y * proj;
                }
            }
            let norm = norm2(&cols[j]).sqrt();
            if norm <= T::epsilon() {
                return None;
            }
            for x in cols[j].iter_mut() {
                *x = *x / norm;
            }
        }
        let mut out = Self::zeros(n);
        for (j, col) in cols.iter().enumerate() {
            for (i, x) in col.iter().enumerate() {
                out[(i, j)] = *x;
            }
        }
        Some(out)
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Scalar> From<CMatrix<T>> for Vec<Vec<Complex<T>>> {
    fn from(m: CMatrix<T>) -> Self {
        m.rows()
    }
}

impl<T: Scalar> TryFrom<Vec<Vec<Complex<T>>>> for CMatrix<T> {
    type Error = String;
    fn try_from(rows: Vec<Vec<Complex<T>>>) -> Result<Self, String> {
        CMatrix::from_rows(rows).ok_or_else(|| "matrix must be square".to_string())
    }
}

/// `<u, v> = sum u_j conj(v_j)`
pub fn inner<T: Scalar>(u: &[Complex<T>], v: &[Complex<T>]) -> Complex<T> {
    u.iter()
        .zip(v)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * b.conj())
}

/// `||v||^2`
pub fn norm2<T: Scalar>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + abs2(*z))
}
