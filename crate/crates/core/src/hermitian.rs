//! Dense complex matrices and the Hermitian positive-definite kernels used
//! pointwise on the frequency grid.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    m: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(m: usize) -> Self {
        Self { m, data: vec![Complex::new(T::zero(), T::zero()); m * m] }
    }

    pub fn identity(m: usize) -> Self {
        Self::scaled_identity(m, T::one())
    }

    pub fn scaled_identity(m: usize, s: T) -> Self {
        let mut out = Self::zeros(m);
        for i in 0..m {
            out.data[i * m + i] = Complex::new(s, T::zero());
        }
        out
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let m = diag.len();
        let mut out = Self::zeros(m);
        for (i, &d) in diag.iter().enumerate() {
            out.data[i * m + i] = Complex::new(d, T::zero());
        }
        out
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                data.push(f(i, j));
            }
        }
        Self { m, data }
    }

    /// Builds a matrix from row-major entries; `data.len()` must be a square.
    pub fn from_row_major(m: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), m * m, "row-major data must hold m*m entries");
        Self { m, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let m = rows.len();
        Self::from_fn(m, |i, j| Complex::new(T::lit(rows[i][j]), T::zero()))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.m + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.m, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: T) -> Self {
        Self { m: self.m, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.m).map(|i| self.get(i, i)).fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    pub fn frobenius_norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// `max |a_ij - conj(a_ji)|` relative to `max |a_ij|`.
    pub fn hermitian_drift(&self) -> T {
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let mut drift = T::zero();
        for i in 0..self.m {
            for j in i..self.m {
                drift = drift.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        drift / scale
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.m, |i, j| (self.get(i, j) + self.get(j, i).conj()) * half)
    }

    /// Real part of `tr(A B*)`, the real inner product on complex matrices.
    pub fn inner(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(a, b)| (a * b.conj()).re).sum()
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: Self) -> CMatrix<T> {
        CMatrix { m: self.m, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: Self) -> CMatrix<T> {
        CMatrix { m: self.m, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: Self) -> CMatrix<T> {
        let m = self.m;
        let mut out = CMatrix::zeros(m);
        for i in 0..m {
            for k in 0..m {
                let a = self.get(i, k);
                for j in 0..m {
                    out.data[i * m + j] = out.data[i * m + j] + a * rhs.get(k, j);
                }
            }
        }
        out
    }
}

// Drift at or below this multiple of epsilon is accepted as is; up to
// `DRIFT_REJECT` it is symmetrized away; beyond that the input is rejected.
// For f64 these are 1e-13 and 1e-10.
const DRIFT_ACCEPT: f64 = 450.0;
const DRIFT_REJECT: f64 = 4.5e5;

fn hermitian_input<T: Real>(a: &CMatrix<T>) -> Result<std::borrow::Cow<'_, CMatrix<T>>> {
    let drift = a.hermitian_drift();
    if drift <= T::epsilon() * T::lit(DRIFT_ACCEPT) {
        Ok(std::borrow::Cow::Borrowed(a))
    } else if drift <= T::epsilon() * T::lit(DRIFT_REJECT) {
        Ok(std::borrow::Cow::Owned(a.hermitian_part()))
    } else {
        Err(Error::NotHermitian { drift: drift.to_f64_lossy() })
    }
}

/// Lower-triangular Cholesky factor `L` with positive real diagonal.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: CMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(&self) -> &CMatrix<T> {
        &self.l
    }

    pub fn into_factor(self) -> CMatrix<T> {
        self.l
    }

    pub fn logdet(&self) -> T {
        let two = T::lit(2.0);
        (0..self.l.m).map(|i| two * self.l.get(i, i).re.ln()).sum()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let m = self.l.m;
        for i in 0..m {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.l.get(i, k) * b[k];
            }
            b[i] = s / self.l.get(i, i).re;
        }
        for i in (0..m).rev() {
            let mut s = b[i];
            for k in i + 1..m {
                s = s - self.l.get(k, i).conj() * b[k];
            }
            b[i] = s / self.l.get(i, i).re;
        }
    }

    /// `A^{-1}`, symmetrized to be exactly Hermitian.
    pub fn inverse(&self) -> CMatrix<T> {
        let m = self.l.m;
        let mut inv = CMatrix::zeros(m);
        let mut col = vec![Complex::new(T::zero(), T::zero()); m];
        for j in 0..m {
            col.iter_mut().for_each(|z| *z = Complex::new(T::zero(), T::zero()));
            col[j] = Complex::new(T::one(), T::zero());
            self.solve_in_place(&mut col);
            for i in 0..m {
                inv.set(i, j, col[i]);
            }
        }
        inv.hermitian_part()
    }
}

/// Factors a Hermitian matrix as `L L*`. Any nonpositive pivot fails.
pub fn cholesky<T: Real>(a: &CMatrix<T>) -> Result<Cholesky<T>> {
    let a = hermitian_input(a)?;
    cholesky_unchecked(&a)
}

/// Cholesky on the lower triangle only; the caller guarantees Hermitian input.
pub(crate) fn cholesky_unchecked<T: Real>(a: &CMatrix<T>) -> Result<Cholesky<T>> {
    let m = a.m;
    let mut l = CMatrix::zeros(m);
    for j in 0..m {
        let mut d = a.get(j, j).re;
        for k in 0..j {
            d = d - l.get(j, k).norm_sqr();
        }
        // `!(d > 0)` also rejects NaN.
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        l.set(j, j, Complex::new(ljj, T::zero()));
        for i in j + 1..m {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(Cholesky { l })
}

pub fn logdet_pd<T: Real>(a: &CMatrix<T>) -> Result<T> {
    Ok(cholesky(a)?.logdet())
}

pub fn inverse_pd<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    Ok(cholesky(a)?.inverse())
}
