//! Covariance estimation from one realization on the full grid: the finite
//! Fourier transform, the ridge-regularized periodogram, and lag estimates
//! obtained as its moments. Estimates produced this way are always
//! realizable: the periodogram itself is a positive definite witness.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::grid::{dft_field, moment_map, GridData, wrap_lag_index, Direction, GridShape, Lag, LagBox, MatrixField, VectorField};
use crate::hermitian::CMatrix;
use crate::scalar::Real;

/// Matrix moments `{Sigma_k}` over a lag box, aligned with `lag_box.lags()`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSet<T> {
    lag_box: LagBox,
    matrices: Vec<CMatrix<T>>,
}

impl<T: Real> CovarianceSet<T> {
    /// Validates the lag symmetry `Sigma_{-k} = Sigma_k^*` (to a relative
    /// `1e-10` of the largest entry) and that `Sigma_0` is Hermitian.
    pub fn new(lag_box: LagBox, matrices: Vec<CMatrix<T>>) -> Result<Self> {
        if matrices.len() != lag_box.len() {
            return Err(Error::DimensionMismatch { expected: lag_box.len(), found: matrices.len() });
        }
        let scale = matrices.iter().map(|m| m.max_abs()).fold(T::zero(), T::max).max(T::min_positive_value());
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
        for pos in 0..lag_box.len() {
            let neg = lag_box.negated_position(pos);
            let drift = (&matrices[neg] - &matrices[pos].adjoint()).max_abs() / scale;
            if drift > tol {
                return Err(Error::NotHermitian { drift: drift.to_f64_lossy() });
            }
        }
        Ok(Self { lag_box, matrices })
    }

    pub(crate) fn new_unchecked(lag_box: LagBox, matrices: Vec<CMatrix<T>>) -> Self {
        Self { lag_box, matrices }
    }

    pub fn lag_box(&self) -> &LagBox {
        &self.lag_box
    }

    pub fn matrices(&self) -> &[CMatrix<T>] {
        &self.matrices
    }

    pub fn channels(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.dim())
    }

    pub fn get(&self, lag: &Lag) -> Option<&CMatrix<T>> {
        self.lag_box.position(lag).map(|p| &self.matrices[p])
    }

    pub fn zero_lag(&self) -> &CMatrix<T> {
        &self.matrices[self.lag_box.zero_position()]
    }

    /// Frobenius norm of the stacked set.
    pub fn frobenius_norm(&self) -> T {
        self.matrices.iter().map(|m| m.frobenius_norm_sqr()).sum::<T>().sqrt()
    }

    /// `|| self - other ||_F` over all lags.
    pub fn distance(&self, other: &Self) -> T {
        self.matrices.iter().zip(&other.matrices).map(|(a, b)| (a - b).frobenius_norm_sqr()).sum::<T>().sqrt()
    }

    /// `sum_k tr(A_k B_k^*)`, real for two Hermitian-symmetric sets.
    pub fn pairing(&self, other: &Self) -> T {
        self.matrices.iter().zip(&other.matrices).map(|(a, b)| a.inner(b)).sum()
    }
}

/// Ridge-regularized periodogram `(1/|N|) y_hat y_hat^* + (eps/|N|) I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Periodogram<T> {
    pub field: MatrixField<T>,
    pub epsilon: T,
}

/// `y_hat(zeta_l) = sum_t y(t) exp(-i <t, theta_l>)`, channelwise.
pub fn finite_fourier<T: Real>(y: &VectorField<T>) -> VectorField<T> {
    dft_field(y, Direction::Forward)
}

/// Rank-one outer products `(1/|N|) y_hat y_hat^*` at every grid point.
pub(crate) fn raw_periodogram<T: Real>(y: &VectorField<T>) -> MatrixField<T> {
    let yh = finite_fourier(y);
    let m = y.channels();
    let inv_n = T::one() / T::of_usize(y.shape().total());
    MatrixField::from_fn(y.shape().clone(), m, |p| {
        let v = yh.at(y.shape().linear_index(p));
        CMatrix::from_fn(m, |a, b| v[a] * v[b].conj() * inv_n)
    })
}

pub fn periodogram<T: Real>(y: &VectorField<T>, epsilon: T) -> Result<Periodogram<T>> {
    if !(epsilon > T::zero()) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    let mut field = raw_periodogram(y);
    let m = y.channels();
    let ridge = epsilon / T::of_usize(y.shape().total());
    let mm = m * m;
    for chunk in field.data_mut().chunks_mut(mm) {
        for a in 0..m {
            chunk[a * m + a].re = chunk[a * m + a].re + ridge;
        }
    }
    Ok(Periodogram { field, epsilon })
}

/// Scale-relative default ridge: `1e-6 * tr(S0) / m` where `S0` is the
/// unregularized zero-lag sample covariance. Falls back to `1e-6` for an
/// all-zero realization.
pub fn default_epsilon<T: Real>(y: &VectorField<T>) -> T {
    let n = T::of_usize(y.shape().total());
    let m = T::of_usize(y.channels().max(1));
    let power: T = y.data().iter().map(|z| z.norm_sqr()).sum::<T>() / n;
    let eps = T::lit(1e-6) * power / m;
    if eps > T::zero() {
        eps
    } else {
        T::lit(1e-6)
    }
}

/// `Sigma_hat_k = int exp(i <k, theta>) Phi_p dnu_N` for every `k` in the box.
pub fn covariance_from_periodogram<T: Real>(p: &Periodogram<T>, lag_box: &LagBox) -> Result<CovarianceSet<T>> {
    moment_map(&p.field, lag_box)
}

/// Periodogram with the given ridge followed by its moments over the box.
pub fn estimate_covariances<T: Real>(y: &VectorField<T>, lag_box: &LagBox, epsilon: T) -> Result<(Periodogram<T>, CovarianceSet<T>)> {
    y.shape().check_radii(lag_box.radii())?;
    let p = periodogram(y, epsilon)?;
    let sigma = covariance_from_periodogram(&p, lag_box)?;
    Ok((p, sigma))
}

/// Circular sample covariances for every wrapped lag, without ridge:
/// the value at grid index `s` is `(1/|N|) sum_t y(t + s mod N) y(t)^*`.
pub fn circular_covariance_field<T: Real>(y: &VectorField<T>) -> MatrixField<T> {
    dft_field(&raw_periodogram(y), Direction::Inverse)
}

/// Direct circular sums, independent of the FFT path. `O(|N| |Lambda| m^2)`;
/// intended as a reference for tests.
pub mod oracle {
    use super::*;

    /// `(1/|N|) sum_s y((s + k) mod N) y(s)^*` for an arbitrary lag `k`.
    pub fn circular_lag_covariance<T: Real>(y: &VectorField<T>, lag: &Lag) -> CMatrix<T> {
        let shape: &GridShape = y.shape();
        let m = y.channels();
        let mut acc = vec![Complex::new(T::zero(), T::zero()); m * m];
        let mut shifted = vec![0i64; shape.ndim()];
        for s in 0..shape.total() {
            let point = shape.point(s);
            for ((slot, &p), &k) in shifted.iter_mut().zip(&point).zip(&lag.0) {
                *slot = p as i64 + k;
            }
            let a = y.at(wrap_lag_index(&shifted, shape));
            let b = y.at(s);
            for i in 0..m {
                for j in 0..m {
                    acc[i * m + j] = acc[i * m + j] + a[i] * b[j].conj();
                }
            }
        }
        let inv_n = T::one() / T::of_usize(shape.total());
        CMatrix::from_row_major(m, acc.into_iter().map(|z| z * inv_n).collect())
    }

    /// Direct-sum counterpart of [`covariance_from_periodogram`] applied to
    /// `periodogram(y, epsilon)`.
    pub fn covariance_direct_oracle<T: Real>(y: &VectorField<T>, lag_box: &LagBox, epsilon: T) -> Result<CovarianceSet<T>> {
        y.shape().check_radii(lag_box.radii())?;
        let m = y.channels();
        let ridge = epsilon / T::of_usize(y.shape().total());
        let matrices = lag_box
            .lags()
            .iter()
            .map(|k| {
                let s = circular_lag_covariance(y, k);
                if k.is_zero() {
                    &s + &CMatrix::scaled_identity(m, ridge)
                } else {
                    s
                }
            })
            .collect();
        Ok(CovarianceSet::new_unchecked(lag_box.clone(), matrices))
    }
}
