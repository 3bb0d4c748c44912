//! Itakura-Saito covariance extension on the discrete torus, solved through
//! its convex dual.
//!
//! Given a prior spectrum `Psi` and moments `Sigma` over a lag box, the
//! estimate is `Phi = (Psi^{-1} + Q)^{-1}` where the matrix trigonometric
//! polynomial `Q` minimizes
//!
//! ```text
//! J(Q) = <Q, Sigma> - (1/|N|) sum_l log det (Psi^{-1} + Q)(zeta_l)
//! ```
//!
//! over the open set where `Psi^{-1} + Q` is positive definite at every grid
//! point. `J` is strictly convex there and blows up at the boundary, so a
//! damped Newton iteration started from `Q = 0` converges to the unique
//! minimizer whenever `Sigma` has some positive definite realization.

use num_complex::Complex;

use crate::covariance::CovarianceSet;
use crate::error::{Error, Result};
use crate::grid::{dft_in_place, eval_trig_polynomial, moment_map, wrap_lag_index, Direction, LagBox, MatrixField};
use crate::hermitian::{cholesky, cholesky_unchecked, CMatrix};
use crate::scalar::Real;

/// Prior spectrum, Cholesky-certified positive definite at every grid point.
#[derive(Clone, Debug)]
pub struct Prior<T> {
    field: MatrixField<T>,
    inverse: MatrixField<T>,
}

impl<T: Real> Prior<T> {
    pub fn new(field: MatrixField<T>) -> Result<Self> {
        let mut inverse = MatrixField::zeros(field.shape().clone(), field.channels());
        for idx in 0..field.shape().total() {
            let chol = cholesky(&field.matrix(idx))
                .map_err(|_| Error::NotPositiveDefiniteAt { point: field.shape().point(idx) })?;
            inverse.set_matrix(idx, &chol.inverse());
        }
        Ok(Self { field, inverse })
    }

    /// A prior that is the same matrix at every grid point.
    pub fn constant(shape: crate::grid::GridShape, value: &CMatrix<T>) -> Result<Self> {
        Self::new(MatrixField::constant(shape, value))
    }

    pub fn field(&self) -> &MatrixField<T> {
        &self.field
    }

    /// `Psi^{-1}` at every grid point.
    pub fn inverse(&self) -> &MatrixField<T> {
        &self.inverse
    }

    pub fn channels(&self) -> usize {
        self.field.channels()
    }
}

/// Lagrange multipliers `{Q_k}` with `Q_{-k} = Q_k^*`.
///
/// Only the zero lag and the lexicographically positive lags are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct DualCertificate<T> {
    lag_box: LagBox,
    half: Vec<CMatrix<T>>,
}

impl<T: Real> DualCertificate<T> {
    pub fn zero(lag_box: LagBox, m: usize) -> Self {
        let n = lag_box.half().len();
        Self { lag_box, half: vec![CMatrix::zeros(m); n] }
    }

    /// Builds a certificate from `[Q_0, Q_k for positive k...]`; `Q_0` must be Hermitian.
    pub fn from_half(lag_box: LagBox, half: Vec<CMatrix<T>>) -> Result<Self> {
        if half.len() != lag_box.half().len() {
            return Err(Error::DimensionMismatch { expected: lag_box.half().len(), found: half.len() });
        }
        let mut half = half;
        let drift = half[0].hermitian_drift();
        if drift > T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) {
            return Err(Error::NotHermitian { drift: drift.to_f64_lossy() });
        }
        half[0] = half[0].hermitian_part();
        Ok(Self { lag_box, half })
    }

    pub fn lag_box(&self) -> &LagBox {
        &self.lag_box
    }

    pub fn channels(&self) -> usize {
        self.half[0].dim()
    }

    pub fn half(&self) -> &[CMatrix<T>] {
        &self.half
    }

    /// `Q_k` for the lag at `pos` in box order.
    pub fn coefficient(&self, pos: usize) -> CMatrix<T> {
        let zero = self.lag_box.zero_position();
        if pos >= zero {
            self.half[pos - zero].clone()
        } else {
            self.half[zero - pos].adjoint()
        }
    }

    /// All coefficients aligned with `lag_box().lags()`.
    pub fn coefficients(&self) -> Vec<CMatrix<T>> {
        (0..self.lag_box.len()).map(|p| self.coefficient(p)).collect()
    }

    /// Frobenius norm over the full (both halves) coefficient set.
    pub fn norm(&self) -> T {
        self.coefficients().iter().map(|c| c.frobenius_norm_sqr()).sum::<T>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> T {
        self.coefficients()
            .iter()
            .zip(other.coefficients())
            .map(|(a, b)| (a - &b).frobenius_norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// `Q(zeta_l)` on the grid of the prior.
    pub fn evaluate(&self, shape: &crate::grid::GridShape) -> Result<MatrixField<T>> {
        eval_trig_polynomial(&self.lag_box, &self.coefficients(), shape)
    }
}

/// One term `coeff * e_{row,col}` placed at lag `pos`.
#[derive(Clone, Debug)]
struct Atom {
    pos: usize,
    lag: Vec<i64>,
    row: usize,
    col: usize,
    /// 1, i or -i.
    coeff: (i8, i8),
}

impl Atom {
    fn coeff<T: Real>(&self) -> Complex<T> {
        Complex::new(T::lit(self.coeff.0 as f64), T::lit(self.coeff.1 as f64))
    }
}

/// Real coordinates for certificates.
///
/// Order: the upper triangle of `Q_0` row by row (diagonal entries real,
/// off-diagonal entries as re/im pairs), then for every positive lag in
/// lexicographic order the full `Q_k` row-major as re/im pairs. The length is
/// `m^2 + (|Lambda| - 1) m^2`.
#[derive(Clone, Debug)]
pub struct Parametrization {
    lag_box: LagBox,
    m: usize,
    coords: Vec<Vec<Atom>>,
}

impl Parametrization {
    pub fn new(lag_box: &LagBox, m: usize) -> Self {
        let zero = lag_box.zero_position();
        let lag = |pos: usize| lag_box.lags()[pos].0.clone();
        let mut coords = Vec::new();
        for a in 0..m {
            for b in a..m {
                let at = |row, col, coeff| Atom { pos: zero, lag: lag(zero), row, col, coeff };
                if a == b {
                    coords.push(vec![at(a, a, (1, 0))]);
                } else {
                    coords.push(vec![at(a, b, (1, 0)), at(b, a, (1, 0))]);
                    coords.push(vec![at(a, b, (0, 1)), at(b, a, (0, -1))]);
                }
            }
        }
        for pos in zero + 1..lag_box.len() {
            let neg = lag_box.negated_position(pos);
            for a in 0..m {
                for b in 0..m {
                    let plus = |coeff| Atom { pos, lag: lag(pos), row: a, col: b, coeff };
                    let minus = |coeff| Atom { pos: neg, lag: lag(neg), row: b, col: a, coeff };
                    coords.push(vec![plus((1, 0)), minus((1, 0))]);
                    coords.push(vec![plus((0, 1)), minus((0, -1))]);
                }
            }
        }
        Self { lag_box: lag_box.clone(), m, coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn pack<T: Real>(&self, q: &DualCertificate<T>) -> Vec<T> {
        let zero = self.lag_box.zero_position();
        self.coords
            .iter()
            .map(|atoms| {
                // The first atom always sits in the stored half.
                let a = &atoms[0];
                let v = q.half[a.pos - zero].get(a.row, a.col);
                if a.coeff.0 != 0 {
                    v.re
                } else {
                    v.im
                }
            })
            .collect()
    }

    pub fn unpack<T: Real>(&self, x: &[T]) -> DualCertificate<T> {
        assert_eq!(x.len(), self.len(), "parameter vector length");
        let zero = self.lag_box.zero_position();
        let mut half = vec![CMatrix::zeros(self.m); self.lag_box.half().len()];
        for (atoms, &xi) in self.coords.iter().zip(x) {
            for a in atoms.iter().filter(|a| a.pos >= zero) {
                let h = &mut half[a.pos - zero];
                h.set(a.row, a.col, h.get(a.row, a.col) + a.coeff::<T>() * xi);
            }
        }
        DualCertificate { lag_box: self.lag_box.clone(), half }
    }

    /// Coordinates of the linear functional `Q -> Re <Q, G>`.
    fn project<T: Real>(&self, g: &CovarianceSet<T>) -> Vec<T> {
        self.coords
            .iter()
            .map(|atoms| atoms.iter().map(|a| (a.coeff::<T>() * g.matrices()[a.pos].get(a.row, a.col).conj()).re).sum())
            .collect()
    }
}

/// Statistics of a dual solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Euclidean norm of the gradient in real coordinates.
    pub final_gradient_norm: f64,
    /// `final_gradient_norm / (1 + ||Sigma||_F)`, the stopping quantity.
    pub relative_gradient_norm: f64,
    pub final_dual_value: f64,
    /// `||Gamma(Phi) - Sigma||_F / ||Sigma||_F`.
    pub moment_residual: f64,
    pub backtracking_steps: usize,
    /// Iterations that could not use the Newton (or quasi-Newton) direction.
    pub steepest_descent_steps: usize,
    /// Dual value at the start and after every accepted step.
    pub value_history: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Exact Hessian.
    #[default]
    Newton,
    /// BFGS inverse-Hessian updates from gradient differences.
    QuasiNewton,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Bound on `||g|| / (1 + ||Sigma||_F)`.
    pub tol: f64,
    /// Bound on the relative moment residual.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Step shrink factor in the line search.
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// The line search gives up below this step length.
    pub min_step: f64,
    pub method: SolverMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            residual_tol: 1e-6,
            max_iterations: 200,
            backtrack: 0.5,
            armijo: 1e-4,
            min_step: 1e-14,
            method: SolverMethod::Newton,
        }
    }
}

/// Discrete IS distance `(1/|N|) sum_l [log det(Phi^{-1} Psi) + tr(Psi^{-1}(Phi - Psi))]`.
pub fn is_distance<T: Real>(phi: &MatrixField<T>, psi: &MatrixField<T>) -> Result<T> {
    phi.same_layout(psi)?;
    let m = phi.channels();
    let shape = phi.shape();
    let mut acc = T::zero();
    for idx in 0..shape.total() {
        let pd = |f: &MatrixField<T>| cholesky(&f.matrix(idx)).map_err(|_| Error::NotPositiveDefiniteAt { point: shape.point(idx) });
        let cphi = pd(phi)?;
        let cpsi = pd(psi)?;
        let psi_inv = cpsi.inverse();
        let tr = (&psi_inv * &phi.matrix(idx)).trace().re;
        acc = acc + cpsi.logdet() - cphi.logdet() + tr - T::of_usize(m);
    }
    Ok(acc / T::of_usize(shape.total()))
}

fn check_compatible<T: Real>(lag_box: &LagBox, m: usize, psi: &Prior<T>) -> Result<()> {
    psi.field.shape().check_radii(lag_box.radii())?;
    if m != psi.channels() {
        return Err(Error::ShapeMismatch(format!("certificate has {m} channels, prior has {}", psi.channels())));
    }
    Ok(())
}

fn check_sigma<T: Real>(lag_box: &LagBox, m: usize, sigma: &CovarianceSet<T>) -> Result<()> {
    if sigma.lag_box() != lag_box || sigma.channels() != m {
        return Err(Error::ShapeMismatch("covariance set does not match the certificate's lag box".into()));
    }
    Ok(())
}

/// `Psi^{-1} + Q` factored at every grid point.
struct Factored<T> {
    /// `(1/|N|) sum_l log det (Psi^{-1} + Q)(zeta_l)`.
    mean_logdet: T,
    /// `Phi = (Psi^{-1} + Q)^{-1}`.
    phi: MatrixField<T>,
}

fn factor_on_grid<T: Real>(q: &DualCertificate<T>, psi: &Prior<T>) -> Result<Factored<T>> {
    let shape = psi.field.shape();
    let mut field = q.evaluate(shape)?;
    let mut logdet = T::zero();
    for idx in 0..shape.total() {
        let x = (&psi.inverse.matrix(idx) + &field.matrix(idx)).hermitian_part();
        let chol = cholesky_unchecked(&x).map_err(|_| Error::Infeasible { point: shape.point(idx) })?;
        logdet = logdet + chol.logdet();
        field.set_matrix(idx, &chol.inverse());
    }
    Ok(Factored { mean_logdet: logdet / T::of_usize(shape.total()), phi: field })
}

/// Whether `Psi^{-1} + Q` is positive definite at every grid point.
pub fn feasible<T: Real>(q: &DualCertificate<T>, psi: &Prior<T>) -> bool {
    check_compatible(q.lag_box(), q.channels(), psi).is_ok() && factor_on_grid(q, psi).is_ok()
}

fn pairing<T: Real>(q: &DualCertificate<T>, sigma: &CovarianceSet<T>) -> T {
    q.coefficients().iter().zip(sigma.matrices()).map(|(a, b)| a.inner(b)).sum()
}

/// `J(Q) = <Q, Sigma> - int log det(Psi^{-1} + Q) dnu_N`.
pub fn dual_value<T: Real>(q: &DualCertificate<T>, psi: &Prior<T>, sigma: &CovarianceSet<T>) -> Result<T> {
    check_compatible(q.lag_box(), q.channels(), psi)?;
    check_sigma(q.lag_box(), q.channels(), sigma)?;
    let f = factor_on_grid(q, psi)?;
    Ok(pairing(q, sigma) - f.mean_logdet)
}

fn moment_gap<T: Real>(sigma: &CovarianceSet<T>, phi: &MatrixField<T>) -> Result<CovarianceSet<T>> {
    let gamma = moment_map(phi, sigma.lag_box())?;
    let diff = sigma.matrices().iter().zip(gamma.matrices()).map(|(s, g)| s - g).collect();
    Ok(CovarianceSet::new_unchecked(sigma.lag_box().clone(), diff))
}

/// Gradient of `J` in the coordinates of [`Parametrization`]: the
/// projection of `Sigma - Gamma((Psi^{-1} + Q)^{-1})`.
pub fn dual_gradient<T: Real>(q: &DualCertificate<T>, psi: &Prior<T>, sigma: &CovarianceSet<T>) -> Result<Vec<T>> {
    check_compatible(q.lag_box(), q.channels(), psi)?;
    check_sigma(q.lag_box(), q.channels(), sigma)?;
    let f = factor_on_grid(q, psi)?;
    let gap = moment_gap(sigma, &f.phi)?;
    Ok(Parametrization::new(q.lag_box(), q.channels()).project(&gap))
}

/// Dense row-major symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> SymmetricMatrix<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }
}

/// Second variation `tr int dQ1 Phi dQ2 Phi dnu_N` in real coordinates.
///
/// Every entry is a cross moment
/// `(1/|N|) sum_l exp(-i <k + k', theta_l>) Phi_bc Phi_da`, so one forward
/// DFT per entry product serves all lag pairs.
fn hessian_from_phi<T: Real>(param: &Parametrization, phi: &MatrixField<T>) -> SymmetricMatrix<T> {
    let m = phi.channels();
    let shape = phi.shape();
    let total = shape.total();
    let m4 = m * m * m * m;
    let mut cross = vec![Complex::new(T::zero(), T::zero()); total * m4];
    for idx in 0..total {
        let e = phi.entries_at(idx);
        let out = &mut cross[idx * m4..(idx + 1) * m4];
        for (i, &x) in e.iter().enumerate() {
            for (j, &y) in e.iter().enumerate() {
                out[i * m * m + j] = x * y;
            }
        }
    }
    dft_in_place(shape, m4, &mut cross, Direction::Forward);
    let inv_n = T::one() / T::of_usize(total);
    let entry = |r: usize, s: usize, u: usize, v: usize, lag: &[i64]| -> Complex<T> {
        cross[wrap_lag_index(lag, shape) * m4 + (r * m + s) * m * m + (u * m + v)] * inv_n
    };
    let n = param.len();
    let mut data = vec![T::zero(); n * n];
    let mut lag_sum = vec![0i64; shape.ndim()];
    for i in 0..n {
        for j in i..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for p in &param.coords[i] {
                for q in &param.coords[j] {
                    for ((s, a), b) in lag_sum.iter_mut().zip(&p.lag).zip(&q.lag) {
                        *s = a + b;
                    }
                    acc = acc + p.coeff::<T>() * q.coeff::<T>() * entry(p.col, q.row, q.col, p.row, &lag_sum);
                }
            }
            data[i * n + j] = acc.re;
            data[j * n + i] = acc.re;
        }
    }
    SymmetricMatrix { n, data }
}

pub fn dual_hessian<T: Real>(q: &DualCertificate<T>, psi: &Prior<T>) -> Result<SymmetricMatrix<T>> {
    check_compatible(q.lag_box(), q.channels(), psi)?;
    let f = factor_on_grid(q, psi)?;
    Ok(hessian_from_phi(&Parametrization::new(q.lag_box(), q.channels()), &f.phi))
}

/// `Phi = (Psi^{-1} + Q)^{-1}` pointwise.
pub fn primal_recover<T: Real>(q: &DualCertificate<T>, psi: &Prior<T>) -> Result<MatrixField<T>> {
    check_compatible(q.lag_box(), q.channels(), psi)?;
    Ok(factor_on_grid(q, psi)?.phi)
}

/// `||Gamma(Phi) - Sigma||_F / ||Sigma||_F`.
pub fn moment_residual<T: Real>(phi: &MatrixField<T>, sigma: &CovarianceSet<T>) -> Result<T> {
    let gap = moment_gap(sigma, phi)?;
    Ok(gap.frobenius_norm() / sigma.frobenius_norm())
}

/// Cholesky solve of a dense symmetric positive definite system.
fn spd_solve<T: Real>(h: &SymmetricMatrix<T>, rhs: &[T]) -> Option<Vec<T>> {
    let n = h.n;
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = h.get(j, j);
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = h.get(i, j);
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    let mut x = rhs.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s = s - l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Value, gradient and primal field at one iterate.
struct Iterate<T> {
    x: Vec<T>,
    value: T,
    gradient: Vec<T>,
    gap_norm: T,
    phi: MatrixField<T>,
}

struct Problem<'a, T> {
    param: Parametrization,
    psi: &'a Prior<T>,
    sigma: &'a CovarianceSet<T>,
}

impl<T: Real> Problem<'_, T> {
    fn at(&self, x: Vec<T>) -> Result<Iterate<T>> {
        let q = self.param.unpack(&x);
        let f = factor_on_grid(&q, self.psi)?;
        let gap = moment_gap(self.sigma, &f.phi)?;
        Ok(Iterate {
            value: pairing(&q, self.sigma) - f.mean_logdet,
            gradient: self.param.project(&gap),
            gap_norm: gap.frobenius_norm(),
            phi: f.phi,
            x,
        })
    }
}

/// Minimizes the dual function from `Q = 0`.
pub fn solve_dual<T: Real>(psi: &Prior<T>, sigma: &CovarianceSet<T>, opts: &SolverOptions) -> Result<(DualCertificate<T>, SolveReport)> {
    let start = DualCertificate::zero(sigma.lag_box().clone(), sigma.channels());
    solve_dual_from(psi, sigma, opts, &start)
}

/// Minimizes the dual function from a feasible starting certificate.
pub fn solve_dual_from<T: Real>(
    psi: &Prior<T>,
    sigma: &CovarianceSet<T>,
    opts: &SolverOptions,
    start: &DualCertificate<T>,
) -> Result<(DualCertificate<T>, SolveReport)> {
    check_compatible(start.lag_box(), start.channels(), psi)?;
    check_sigma(start.lag_box(), start.channels(), sigma)?;
    let problem = Problem { param: Parametrization::new(sigma.lag_box(), sigma.channels()), psi, sigma };
    let n = problem.param.len();
    let sigma_norm = sigma.frobenius_norm();
    let scale = T::one() + sigma_norm;
    let tol = T::lit(opts.tol);
    let residual_tol = T::lit(opts.residual_tol);
    let armijo = T::lit(opts.armijo);
    let backtrack = T::lit(opts.backtrack);
    let noise = T::epsilon() * T::lit(64.0);

    let mut cur = problem.at(problem.param.pack(start))?;
    let mut report = SolveReport { value_history: vec![cur.value.to_f64_lossy()], ..Default::default() };
    // BFGS inverse-Hessian approximation.
    let mut h_inv: Option<Vec<T>> = None;

    let finish = |report: &mut SolveReport, it: &Iterate<T>| {
        let g = norm(&it.gradient);
        report.final_gradient_norm = g.to_f64_lossy();
        report.relative_gradient_norm = (g / scale).to_f64_lossy();
        report.final_dual_value = it.value.to_f64_lossy();
        report.moment_residual = (it.gap_norm / sigma_norm).to_f64_lossy();
    };

    loop {
        let gnorm = norm(&cur.gradient);
        if gnorm / scale <= tol && cur.gap_norm <= residual_tol * sigma_norm {
            report.converged = true;
            finish(&mut report, &cur);
            let q = problem.param.unpack(&cur.x);
            return Ok((q, report));
        }
        if report.iterations >= opts.max_iterations {
            finish(&mut report, &cur);
            return Err(Error::MaxIterationsExceeded(Box::new(report)));
        }

        let neg_g: Vec<T> = cur.gradient.iter().map(|&g| -g).collect();
        let mut direction = match opts.method {
            SolverMethod::Newton => {
                let mut h = hessian_from_phi(&problem.param, &cur.phi);
                spd_solve(&h, &neg_g).or_else(|| {
                    let trace: T = (0..n).map(|i| h.get(i, i)).sum();
                    let ridge = T::lit(1e-12) * trace.abs() / T::of_usize(n);
                    for i in 0..n {
                        h.data[i * n + i] = h.data[i * n + i] + ridge;
                    }
                    spd_solve(&h, &neg_g)
                })
            }
            SolverMethod::QuasiNewton => h_inv.as_ref().map(|hi| {
                (0..n).map(|i| (0..n).map(|j| hi[i * n + j] * neg_g[j]).sum()).collect()
            }),
        };
        if direction.as_ref().is_none_or(|d| dot(d, &cur.gradient) >= T::zero()) {
            report.steepest_descent_steps += 1;
            // Scale the first steepest step so it does not leave the domain at once.
            let s = if h_inv.is_none() && opts.method == SolverMethod::QuasiNewton { T::one() / gnorm.max(T::one()) } else { T::one() };
            direction = Some(neg_g.iter().map(|&g| g * s).collect());
        }
        let direction = direction.unwrap_or_default();
        let slope = dot(&direction, &cur.gradient);

        let mut t = T::one();
        let next = loop {
            let x: Vec<T> = cur.x.iter().zip(&direction).map(|(&a, &d)| a + t * d).collect();
            match problem.at(x) {
                Ok(cand) => {
                    if cand.value <= cur.value + armijo * t * slope {
                        break cand;
                    }
                    // Decrease below rounding: accept on gradient progress.
                    let floor = noise * (T::one() + cur.value.abs());
                    if cand.value <= cur.value + floor && norm(&cand.gradient) < gnorm {
                        break cand;
                    }
                }
                Err(Error::Infeasible { .. }) => {}
                Err(e) => return Err(e),
            }
            report.backtracking_steps += 1;
            t = t * backtrack;
            if t < T::lit(opts.min_step) {
                finish(&mut report, &cur);
                return Err(Error::InfeasibleMoments(Box::new(report)));
            }
        };

        if opts.method == SolverMethod::QuasiNewton {
            let s: Vec<T> = next.x.iter().zip(&cur.x).map(|(&a, &b)| a - b).collect();
            let y: Vec<T> = next.gradient.iter().zip(&cur.gradient).map(|(&a, &b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > T::zero() {
                let mut hi = h_inv.take().unwrap_or_else(|| {
                    let g0 = sy / dot(&y, &y);
                    let mut id = vec![T::zero(); n * n];
                    (0..n).for_each(|i| id[i * n + i] = g0);
                    id
                });
                bfgs_update(&mut hi, n, &s, &y, sy);
                h_inv = Some(hi);
            }
        }

        report.iterations += 1;
        report.value_history.push(next.value.to_f64_lossy());
        cur = next;
    }
}

fn bfgs_update<T: Real>(h: &mut [T], n: usize, s: &[T], y: &[T], sy: T) {
    let rho = T::one() / sy;
    let hy: Vec<T> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = h[i * n + j] - rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
