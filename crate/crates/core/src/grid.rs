//! Multi-index bookkeeping on the finite grid, the symmetric lag box, and
//! exact multidimensional DFTs of vector- and matrix-valued fields.
//!
//! Grid points are stored row-major over `(l_1, ..., l_d)`, and within a
//! point the vector or row-major matrix entries are contiguous. The grid
//! point `l` carries the frequency `theta_l = (2 pi l_1 / N_1, ..., 2 pi l_d / N_d)`.

use std::collections::HashMap;

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::covariance::CovarianceSet;
use crate::error::{Error, Result};
use crate::hermitian::CMatrix;
use crate::scalar::Real;

/// Grid dimensions `N = (N_1, ..., N_d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GridShape {
    dims: Vec<usize>,
    total: usize,
}

impl GridShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(crate::error::invalid("dims", "grid needs at least one axis"));
        }
        if let Some(axis) = dims.iter().position(|&n| n == 0) {
            return Err(crate::error::invalid("dims", format!("axis {axis} has zero length")));
        }
        let total = dims.iter().product();
        Ok(Self { dims, total })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// `|N|`, the number of grid points.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Row-major linear index of a grid point.
    pub fn linear_index(&self, point: &[usize]) -> usize {
        debug_assert_eq!(point.len(), self.dims.len());
        point.iter().zip(&self.dims).fold(0, |acc, (&p, &n)| acc * n + p)
    }

    pub fn point(&self, mut index: usize) -> Vec<usize> {
        let mut p = vec![0; self.dims.len()];
        for (slot, &n) in p.iter_mut().zip(&self.dims).rev() {
            *slot = index % n;
            index /= n;
        }
        p
    }

    /// Angular frequency of grid index `l` on `axis`, in `[0, 2 pi)`.
    pub fn frequency<T: Real>(&self, axis: usize, l: usize) -> T {
        T::TAU() * T::of_usize(l) / T::of_usize(self.dims[axis])
    }

    /// Frequency vector of a grid point folded into `(-pi, pi]`.
    pub fn centered_frequencies(&self, point: &[usize]) -> Vec<f64> {
        point
            .iter()
            .zip(&self.dims)
            .map(|(&l, &n)| {
                let w = std::f64::consts::TAU * l as f64 / n as f64;
                if w > std::f64::consts::PI {
                    w - std::f64::consts::TAU
                } else {
                    w
                }
            })
            .collect()
    }

    /// Checks `N_j > 2 n_j` on every axis.
    pub fn check_radii(&self, radii: &[usize]) -> Result<()> {
        if radii.len() != self.ndim() {
            return Err(Error::DimensionMismatch { expected: self.ndim(), found: radii.len() });
        }
        for (axis, (&n, &r)) in self.dims.iter().zip(radii).enumerate() {
            if n <= 2 * r {
                return Err(Error::GridTooCoarse { axis, size: n, radius: r });
            }
        }
        Ok(())
    }
}

/// Signed multi-index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lag(pub Vec<i64>);

impl Lag {
    pub fn zero(d: usize) -> Self {
        Lag(vec![0; d])
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn neg(&self) -> Self {
        Lag(self.0.iter().map(|k| -k).collect())
    }

    pub fn add(&self, other: &Lag) -> Self {
        Lag(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }
}

impl From<Vec<i64>> for Lag {
    fn from(v: Vec<i64>) -> Self {
        Lag(v)
    }
}

/// Componentwise `k_j mod N_j`, in `[0, N_j - 1]`.
pub fn wrap_lag(k: &Lag, shape: &GridShape) -> Vec<usize> {
    k.0.iter().zip(shape.dims()).map(|(&kj, &n)| kj.rem_euclid(n as i64) as usize).collect()
}

pub(crate) fn wrap_lag_index(k: &[i64], shape: &GridShape) -> usize {
    k.iter().zip(shape.dims()).fold(0, |acc, (&kj, &n)| acc * n + kj.rem_euclid(n as i64) as usize)
}

/// The box `{k : |k_j| <= n_j}` enumerated in lexicographic order.
///
/// Lexicographic order makes negation a reversal: the lag at position `p`
/// has its negative at `len - 1 - p`, the zero lag sits in the middle, and
/// the lexicographically positive lags (the canonical half) follow it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LagBox {
    radii: Vec<usize>,
    lags: Vec<Lag>,
}

impl LagBox {
    /// The lag box with the given radii, without reference to a grid.
    pub fn new(radii: Vec<usize>) -> Self {
        let mut lags = vec![Lag(Vec::with_capacity(radii.len()))];
        for &r in &radii {
            let r = r as i64;
            lags = lags
                .into_iter()
                .flat_map(|prefix| {
                    (-r..=r).map(move |k| {
                        let mut v = prefix.0.clone();
                        v.push(k);
                        Lag(v)
                    })
                })
                .collect();
        }
        Self { radii, lags }
    }

    pub fn radii(&self) -> &[usize] {
        &self.radii
    }

    pub fn ndim(&self) -> usize {
        self.radii.len()
    }

    pub fn lags(&self) -> &[Lag] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn zero_position(&self) -> usize {
        self.lags.len() / 2
    }

    pub fn negated_position(&self, pos: usize) -> usize {
        self.lags.len() - 1 - pos
    }

    pub fn position(&self, k: &Lag) -> Option<usize> {
        if k.0.len() != self.radii.len() {
            return None;
        }
        let mut pos = 0usize;
        for (&kj, &r) in k.0.iter().zip(&self.radii) {
            if kj.unsigned_abs() as usize > r {
                return None;
            }
            pos = pos * (2 * r + 1) + (kj + r as i64) as usize;
        }
        Some(pos)
    }

    /// Zero lag followed by the lexicographically positive lags.
    pub fn half(&self) -> &[Lag] {
        &self.lags[self.zero_position()..]
    }
}

/// Builds the lag box `{k : |k_j| <= n_j}` for a grid, enforcing `N_j > 2 n_j`.
pub fn lambda_box(radii: &[usize], shape: &GridShape) -> Result<LagBox> {
    shape.check_radii(radii)?;
    Ok(LagBox::new(radii.to_vec()))
}

/// Field of `m x m` complex matrices on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField<T> {
    shape: GridShape,
    m: usize,
    data: Vec<Complex<T>>,
}

/// Field of complex `m`-vectors on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    shape: GridShape,
    m: usize,
    data: Vec<Complex<T>>,
}

/// Shared storage view used by the entrywise DFT.
pub trait GridData<T> {
    fn shape(&self) -> &GridShape;
    /// Complex entries stored per grid point.
    fn entries(&self) -> usize;
    fn data(&self) -> &[Complex<T>];
    fn data_mut(&mut self) -> &mut [Complex<T>];
}

impl<T: Real> MatrixField<T> {
    pub fn zeros(shape: GridShape, m: usize) -> Self {
        let data = vec![Complex::new(T::zero(), T::zero()); shape.total() * m * m];
        Self { shape, m, data }
    }

    pub fn from_data(shape: GridShape, m: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let expected = shape.total() * m * m;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: data.len() });
        }
        Ok(Self { shape, m, data })
    }

    pub fn constant(shape: GridShape, value: &CMatrix<T>) -> Self {
        Self::from_fn(shape, value.dim(), |_| value.clone())
    }

    pub fn from_fn(shape: GridShape, m: usize, mut f: impl FnMut(&[usize]) -> CMatrix<T>) -> Self {
        let mut data = Vec::with_capacity(shape.total() * m * m);
        for idx in 0..shape.total() {
            let mat = f(&shape.point(idx));
            assert_eq!(mat.dim(), m, "matrix size must match the field's channel count");
            data.extend_from_slice(mat.as_slice());
        }
        Self { shape, m, data }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn entries_at(&self, index: usize) -> &[Complex<T>] {
        let mm = self.m * self.m;
        &self.data[index * mm..(index + 1) * mm]
    }

    pub fn matrix(&self, index: usize) -> CMatrix<T> {
        CMatrix::from_row_major(self.m, self.entries_at(index).to_vec())
    }

    pub fn set_matrix(&mut self, index: usize, value: &CMatrix<T>) {
        let mm = self.m * self.m;
        self.data[index * mm..(index + 1) * mm].copy_from_slice(value.as_slice());
    }

    pub fn matrices(&self) -> impl Iterator<Item = CMatrix<T>> + '_ {
        (0..self.shape.total()).map(move |i| self.matrix(i))
    }

    pub fn scale(&self, s: T) -> Self {
        Self { shape: self.shape.clone(), m: self.m, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// Squared Frobenius norm of the stacked grid tensor.
    pub fn frobenius_norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `|| self - other ||_F / || other ||_F` over all grid points and entries.
    pub fn relative_error(&self, reference: &Self) -> T {
        let num: T = self.data.iter().zip(&reference.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        (num / reference.frobenius_norm_sqr()).sqrt()
    }

    /// Squared Frobenius norm at every grid point.
    pub fn pointwise_frobenius_sqr(&self) -> Vec<T> {
        let mm = self.m * self.m;
        self.data.chunks(mm).map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    pub fn same_layout(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.m != other.m {
            return Err(Error::ShapeMismatch(format!(
                "{:?} x {} vs {:?} x {}",
                self.shape.dims(),
                self.m,
                other.shape.dims(),
                other.m
            )));
        }
        Ok(())
    }
}

impl<T: Real> VectorField<T> {
    pub fn zeros(shape: GridShape, m: usize) -> Self {
        let data = vec![Complex::new(T::zero(), T::zero()); shape.total() * m];
        Self { shape, m, data }
    }

    pub fn from_data(shape: GridShape, m: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let expected = shape.total() * m;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: data.len() });
        }
        Ok(Self { shape, m, data })
    }

    pub fn from_fn(shape: GridShape, m: usize, mut f: impl FnMut(&[usize]) -> Vec<Complex<T>>) -> Self {
        let mut data = Vec::with_capacity(shape.total() * m);
        for idx in 0..shape.total() {
            let v = f(&shape.point(idx));
            assert_eq!(v.len(), m, "vector length must match the field's channel count");
            data.extend(v);
        }
        Self { shape, m, data }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn at(&self, index: usize) -> &[Complex<T>] {
        &self.data[index * self.m..(index + 1) * self.m]
    }

    pub fn at_mut(&mut self, index: usize) -> &mut [Complex<T>] {
        &mut self.data[index * self.m..(index + 1) * self.m]
    }

    pub fn map<U: Real>(&self, f: impl Fn(Complex<T>) -> Complex<U>) -> VectorField<U> {
        VectorField { shape: self.shape.clone(), m: self.m, data: self.data.iter().map(|&z| f(z)).collect() }
    }
}

impl<T: Real> GridData<T> for MatrixField<T> {
    fn shape(&self) -> &GridShape {
        &self.shape
    }
    fn entries(&self) -> usize {
        self.m * self.m
    }
    fn data(&self) -> &[Complex<T>] {
        &self.data
    }
    fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }
}

impl<T: Real> GridData<T> for VectorField<T> {
    fn shape(&self) -> &GridShape {
        &self.shape
    }
    fn entries(&self) -> usize {
        self.m
    }
    fn data(&self) -> &[Complex<T>] {
        &self.data
    }
    fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `sum_t f(t) exp(-i <t, theta_l>)`, unnormalized.
    Forward,
    /// `(1/|N|) sum_t f(t) exp(+i <t, theta_l>)`.
    Inverse,
}

/// Entrywise d-dimensional DFT of interleaved grid data, in place.
pub(crate) fn dft_in_place<T: Real>(shape: &GridShape, entries: usize, data: &mut [Complex<T>], direction: Direction) {
    debug_assert_eq!(data.len(), shape.total() * entries);
    let fft_dir = match direction {
        Direction::Forward => FftDirection::Forward,
        Direction::Inverse => FftDirection::Inverse,
    };
    let mut planner = FftPlanner::<T>::new();
    let dims = shape.dims();
    let mut plans: HashMap<usize, std::sync::Arc<dyn Fft<T>>> = HashMap::new();
    for (axis, &n) in dims.iter().enumerate() {
        if n == 1 {
            continue;
        }
        let fft = plans.entry(n).or_insert_with(|| planner.plan_fft(n, fft_dir)).clone();
        let inner: usize = dims[axis + 1..].iter().product::<usize>() * entries;
        let outer: usize = dims[..axis].iter().product();
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        for o in 0..outer {
            let base = o * n * inner;
            for i in 0..inner {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + t * inner + i];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * inner + i] = *v;
                }
            }
        }
    }
    if direction == Direction::Inverse {
        let s = T::one() / T::of_usize(shape.total());
        data.iter_mut().for_each(|z| *z = *z * s);
    }
}

/// Entrywise DFT of a vector or matrix field.
pub fn dft_field<T: Real, F: GridData<T> + Clone>(field: &F, direction: Direction) -> F {
    let mut out = field.clone();
    let shape = out.shape().clone();
    let entries = out.entries();
    dft_in_place(&shape, entries, out.data_mut(), direction);
    out
}

/// Evaluates `Q(zeta_l) = sum_k Q_k exp(-i <k, theta_l>)` on the grid.
///
/// `coeffs` is aligned with `lag_box.lags()`.
pub fn eval_trig_polynomial<T: Real>(lag_box: &LagBox, coeffs: &[CMatrix<T>], shape: &GridShape) -> Result<MatrixField<T>> {
    shape.check_radii(lag_box.radii())?;
    if coeffs.len() != lag_box.len() {
        return Err(Error::DimensionMismatch { expected: lag_box.len(), found: coeffs.len() });
    }
    let m = coeffs.first().map_or(0, |c| c.dim());
    let mut field = MatrixField::zeros(shape.clone(), m);
    for (lag, q) in lag_box.lags().iter().zip(coeffs) {
        field.set_matrix(wrap_lag_index(&lag.0, shape), q);
    }
    dft_in_place(shape, m * m, &mut field.data, Direction::Forward);
    Ok(field)
}

/// Aligns sparse `(lag, coefficient)` pairs with a lag box; missing lags are zero.
pub fn coefficients_from_pairs<T: Real>(lag_box: &LagBox, m: usize, pairs: &[(Lag, CMatrix<T>)]) -> Result<Vec<CMatrix<T>>> {
    let mut out = vec![CMatrix::zeros(m); lag_box.len()];
    for (lag, q) in pairs {
        let pos = lag_box.position(lag).ok_or_else(|| Error::LagOutsideBox(lag.0.clone()))?;
        out[pos] = q.clone();
    }
    Ok(out)
}

/// The moment map: `Sigma_k = (1/|N|) sum_l exp(i <k, theta_l>) Phi(zeta_l)` for
/// `k` in the box.
///
/// The field is taken to be Hermitian; the canonical half of the box is
/// computed and the rest filled in by `Sigma_{-k} = Sigma_k^*`.
pub fn moment_map<T: Real>(phi: &MatrixField<T>, lag_box: &LagBox) -> Result<CovarianceSet<T>> {
    let shape = phi.shape();
    shape.check_radii(lag_box.radii())?;
    let spectral = dft_field(phi, Direction::Inverse);
    Ok(gather_hermitian(&spectral, lag_box))
}

/// Reads `Sigma_k` for the box out of a lag-domain field indexed by wrapped
/// lag, imposing the Hermitian lag symmetry.
pub(crate) fn gather_hermitian<T: Real>(lag_field: &MatrixField<T>, lag_box: &LagBox) -> CovarianceSet<T> {
    let shape = lag_field.shape();
    let m = lag_field.channels();
    let mut mats = vec![CMatrix::zeros(m); lag_box.len()];
    let zero = lag_box.zero_position();
    for pos in zero..lag_box.len() {
        let s = lag_field.matrix(wrap_lag_index(&lag_box.lags()[pos].0, shape));
        if pos == zero {
            mats[pos] = s.hermitian_part();
        } else {
            mats[lag_box.negated_position(pos)] = s.adjoint();
            mats[pos] = s;
        }
    }
    CovarianceSet::new_unchecked(lag_box.clone(), mats)
}
