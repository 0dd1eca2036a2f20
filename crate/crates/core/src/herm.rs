//! Small dense complex matrices (dimension 1 or 2) with closed-form linear algebra.

use std::ops::{Add, Mul, Sub};

use crate::grid::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat {
    pub n: usize,
    pub a: [[C64; 2]; 2],
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        debug_assert!(n == 1 || n == 2);
        SmallMat { n, a: [[ZERO; 2]; 2] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i][j]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j] * s)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[j][i])
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j].conj())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[j][i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    pub fn det(&self) -> C64 {
        match self.n {
            1 => self.a[0][0],
            _ => self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0],
        }
    }

    /// Inverse, or `None` when the determinant underflows.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() < 1e-300 {
            return None;
        }
        let inv = d.inv();
        Some(match self.n {
            1 => Self::from_fn(1, |_, _| inv),
            _ => {
                let a = &self.a;
                let mut m = Self::zeros(2);
                m.a[0][0] = a[1][1] * inv;
                m.a[1][1] = a[0][0] * inv;
                m.a[0][1] = -a[0][1] * inv;
                m.a[1][0] = -a[1][0] * inv;
                m
            }
        })
    }

    /// Eigenvalues `(min, max)` of the Hermitian part.
    pub fn herm_eigs(&self) -> (f64, f64) {
        match self.n {
            1 => (self.a[0][0].re, self.a[0][0].re),
            _ => {
                let p = self.a[0][0].re;
                let q = self.a[1][1].re;
                let b = (self.a[0][1] + self.a[1][0].conj()) * 0.5;
                let mean = 0.5 * (p + q);
                let rad = (0.25 * (p - q) * (p - q) + b.norm_sqr()).sqrt();
                (mean - rad, mean + rad)
            }
        }
    }

    /// Lower-triangular `L` with `self = L L^*`, for Hermitian positive input.
    pub fn cholesky(&self) -> Option<Self> {
        let a = &self.a;
        let l00 = a[0][0].re;
        if l00 <= 0.0 {
            return None;
        }
        let l00 = l00.sqrt();
        let mut l = Self::zeros(self.n);
        l.a[0][0] = C64::new(l00, 0.0);
        if self.n == 2 {
            let l10 = a[1][0] / l00;
            let rest = a[1][1].re - l10.norm_sqr();
            if rest <= 0.0 {
                return None;
            }
            l.a[1][0] = l10;
            l.a[1][1] = C64::new(rest.sqrt(), 0.0);
        }
        Some(l)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.a[i][j].norm());
            }
        }
        m
    }

    /// Hermitian part `(A + A^*)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| (self.a[i][j] + self.a[j][i].conj()) * 0.5)
    }
}

impl Add for SmallMat {
    type Output = SmallMat;
    fn add(self, o: SmallMat) -> SmallMat {
        SmallMat::from_fn(self.n, |i, j| self.a[i][j] + o.a[i][j])
    }
}

impl Sub for SmallMat {
    type Output = SmallMat;
    fn sub(self, o: SmallMat) -> SmallMat {
        SmallMat::from_fn(self.n, |i, j| self.a[i][j] - o.a[i][j])
    }
}

impl Mul for SmallMat {
    type Output = SmallMat;
    fn mul(self, o: SmallMat) -> SmallMat {
        SmallMat::from_fn(self.n, |i, j| (0..self.n).map(|k| self.a[i][k] * o.a[k][j]).sum())
    }
}
