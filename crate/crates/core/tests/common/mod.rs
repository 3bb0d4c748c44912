//! Random instance generators, naive oracles and reusable property checks
//! shared by the property and acceptance targets. Every check returns
//! `Ok(summary)` or `Err(reason)` so the acceptance target can print a verdict
//! instead of panicking.
#![allow(dead_code)]

use std::f64::consts::TAU;

use m2spec::covariance::{estimate_covariances, oracle::covariance_direct_oracle, CovarianceSet};
use m2spec::grid::{dft_field, eval_trig_polynomial, lambda_box, moment_map, Direction, GridShape, LagBox, MatrixField, VectorField};
use m2spec::hermitian::{cholesky, CMatrix};
use m2spec::isdual::{
    dual_gradient, dual_hessian, dual_value, feasible, is_distance, moment_residual, primal_recover, solve_dual, solve_dual_from, DualCertificate,
    Parametrization, Prior, SolverOptions,
};
use m2spec::models::complex_gaussian;
use m2spec::Complex64 as C;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C {
    C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize) -> CMatrix<f64> {
    CMatrix::from_fn(m, |_, _| random_complex(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, m: usize) -> CMatrix<f64> {
    random_matrix(rng, m).hermitian_part()
}

/// `A A^* + I/2` with a random `A`.
pub fn random_pd(rng: &mut ChaCha8Rng, m: usize) -> CMatrix<f64> {
    let a = random_matrix(rng, m);
    &(&a * &a.adjoint()) + &CMatrix::scaled_identity(m, 0.5)
}

pub fn random_pd_field(rng: &mut ChaCha8Rng, shape: &GridShape, m: usize) -> MatrixField<f64> {
    MatrixField::from_fn(shape.clone(), m, |_| random_pd(rng, m))
}

pub fn random_hermitian_field(rng: &mut ChaCha8Rng, shape: &GridShape, m: usize) -> MatrixField<f64> {
    MatrixField::from_fn(shape.clone(), m, |_| random_hermitian(rng, m))
}

pub fn random_vector_field(rng: &mut ChaCha8Rng, shape: &GridShape, m: usize) -> VectorField<f64> {
    VectorField::from_fn(shape.clone(), m, |_| (0..m).map(|_| complex_gaussian(rng, 1.0)).collect())
}

pub fn random_shape(rng: &mut ChaCha8Rng, d: usize, lo: usize, hi: usize) -> GridShape {
    GridShape::new((0..d).map(|_| rng.random_range(lo..=hi)).collect()).unwrap()
}

pub fn random_certificate(rng: &mut ChaCha8Rng, lag_box: &LagBox, m: usize) -> DualCertificate<f64> {
    let mut half = vec![random_hermitian(rng, m)];
    for _ in 1..lag_box.half().len() {
        half.push(random_matrix(rng, m));
    }
    DualCertificate::from_half(lag_box.clone(), half).unwrap()
}

pub fn scale_certificate(q: &DualCertificate<f64>, s: f64) -> DualCertificate<f64> {
    DualCertificate::from_half(q.lag_box().clone(), q.half().iter().map(|c| c.scale(s)).collect()).unwrap()
}

pub fn add_certificates(a: &DualCertificate<f64>, b: &DualCertificate<f64>) -> DualCertificate<f64> {
    DualCertificate::from_half(a.lag_box().clone(), a.half().iter().zip(b.half()).map(|(x, y)| x + y).collect()).unwrap()
}

/// Largest `t` with `Psi^{-1} + t q` positive definite on the grid, by bisection.
pub fn feasibility_limit(q: &DualCertificate<f64>, psi: &Prior<f64>) -> f64 {
    let mut hi = 1.0;
    while feasible(&scale_certificate(q, hi), psi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(&scale_certificate(q, mid), psi) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

/// A random certificate scaled to `fraction` of its feasibility limit.
pub fn random_feasible(rng: &mut ChaCha8Rng, psi: &Prior<f64>, lag_box: &LagBox, fraction: f64) -> DualCertificate<f64> {
    let q = random_certificate(rng, lag_box, psi.channels());
    let t = feasibility_limit(&q, psi).min(1.0);
    scale_certificate(&q, fraction * t)
}

/// Covariances realized by a certificate: `Gamma((Psi^{-1} + Q)^{-1})`.
pub fn realized_moments(q: &DualCertificate<f64>, psi: &Prior<f64>) -> CovarianceSet<f64> {
    moment_map(&primal_recover(q, psi).unwrap(), q.lag_box()).unwrap()
}

pub struct Instance {
    pub shape: GridShape,
    pub lag_box: LagBox,
    pub psi: Prior<f64>,
    pub q_true: DualCertificate<f64>,
    pub sigma: CovarianceSet<f64>,
}

impl Instance {
    pub fn describe(&self) -> String {
        format!("N={:?} n={:?} m={}", self.shape.dims(), self.lag_box.radii(), self.psi.channels())
    }
}

/// `d in {1,2,3}`, `m in {1,2}`, `n_j in {0,1}`, `N_j in 5..=16`.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let d = rng.random_range(1..=3);
    let m = rng.random_range(1..=2);
    let shape = random_shape(rng, d, 5, 16);
    let radii: Vec<usize> = (0..d).map(|_| rng.random_range(0..=1)).collect();
    let lag_box = lambda_box(&radii, &shape).unwrap();
    let psi = Prior::new(random_pd_field(rng, &shape, m)).unwrap();
    let q_true = random_feasible(rng, &psi, &lag_box, 0.5);
    let sigma = realized_moments(&q_true, &psi);
    Instance { shape, lag_box, psi, q_true, sigma }
}

pub fn tight_options() -> SolverOptions {
    SolverOptions { tol: 1e-13, residual_tol: 1e-12, max_iterations: 400, ..SolverOptions::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    a / b.max(f64::MIN_POSITIVE)
}

// ---- oracles -------------------------------------------------------------

/// `sum_t x(t) exp(-+ i <theta_l, t>)` evaluated point by point.
pub fn naive_dft(field: &MatrixField<f64>, direction: Direction) -> MatrixField<f64> {
    let shape = field.shape();
    let m = field.channels();
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let norm = match direction {
        Direction::Forward => 1.0,
        Direction::Inverse => 1.0 / shape.total() as f64,
    };
    MatrixField::from_fn(shape.clone(), m, |l| {
        let mut acc = CMatrix::zeros(m);
        for t in 0..shape.total() {
            let p = shape.point(t);
            let phase: f64 = (0..shape.ndim()).map(|j| TAU * (l[j] * p[j]) as f64 / shape.dims()[j] as f64).sum();
            acc = &acc + &field.matrix(t).mul_scalar(C::from_polar(norm, sign * phase));
        }
        acc
    })
}

/// `sum_k Q_k exp(-i <k, theta_l>)` summed lag by lag.
pub fn naive_trig(lag_box: &LagBox, coeffs: &[CMatrix<f64>], shape: &GridShape) -> MatrixField<f64> {
    let m = coeffs[0].dim();
    MatrixField::from_fn(shape.clone(), m, |l| {
        let mut acc = CMatrix::zeros(m);
        for (k, c) in lag_box.lags().iter().zip(coeffs) {
            let phase: f64 = (0..shape.ndim()).map(|j| TAU * k.0[j] as f64 * l[j] as f64 / shape.dims()[j] as f64).sum();
            acc = &acc + &c.mul_scalar(C::from_polar(1.0, -phase));
        }
        acc
    })
}

trait MulScalar {
    fn mul_scalar(&self, z: C) -> CMatrix<f64>;
}

impl MulScalar for CMatrix<f64> {
    fn mul_scalar(&self, z: C) -> CMatrix<f64> {
        CMatrix::from_fn(self.dim(), |i, j| self.get(i, j) * z)
    }
}

fn field_max_diff(a: &MatrixField<f64>, b: &MatrixField<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn field_max_abs(a: &MatrixField<f64>) -> f64 {
    a.data().iter().map(|x| x.norm()).fold(0.0, f64::max)
}

// ---- oracle equivalences ---------------------------------------------------

pub fn check_dft_against_naive(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let d = rng.random_range(1..=3);
        let shape = loop {
            let s = random_shape(&mut rng, d, 1, 12);
            if s.total() <= 512 {
                break s;
            }
        };
        let m = rng.random_range(1..=2);
        let f = MatrixField::from_fn(shape.clone(), m, |_| random_matrix(&mut rng, m));
        for dir in [Direction::Forward, Direction::Inverse] {
            let fast = dft_field(&f, dir);
            let slow = naive_dft(&f, dir);
            worst = worst.max(field_max_diff(&fast, &slow) / field_max_abs(&slow).max(1.0));
        }
    }
    verdict(worst <= 1e-10, format!("max relative deviation {worst:.2e} over {cases} shapes"))
}

pub fn check_trig_against_naive(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let d = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let shape = random_shape(&mut rng, d, 3, 9);
        let radii: Vec<usize> = shape.dims().iter().map(|&n| rng.random_range(0..=(n - 1) / 2)).collect();
        let lag_box = lambda_box(&radii, &shape).unwrap();
        let coeffs = random_certificate(&mut rng, &lag_box, m).coefficients();
        let fast = eval_trig_polynomial(&lag_box, &coeffs, &shape).unwrap();
        let slow = naive_trig(&lag_box, &coeffs, &shape);
        worst = worst.max(field_max_diff(&fast, &slow));
    }
    verdict(worst <= 1e-10, format!("max deviation {worst:.2e} over {cases} polynomials"))
}

pub fn check_covariance_against_direct(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let d = rng.random_range(1..=3);
        let shape = loop {
            let s = random_shape(&mut rng, d, 3, 12);
            if s.total() <= 512 {
                break s;
            }
        };
        let m = rng.random_range(1..=3);
        let radii: Vec<usize> = shape.dims().iter().map(|&n| rng.random_range(0..=(n - 1) / 2)).collect();
        let lag_box = lambda_box(&radii, &shape).unwrap();
        let y = random_vector_field(&mut rng, &shape, m);
        let eps = rng.random_range(1e-6..1.0);
        let (_, fast) = estimate_covariances(&y, &lag_box, eps).unwrap();
        let slow = covariance_direct_oracle(&y, &lag_box, eps).unwrap();
        worst = worst.max(fast.distance(&slow));
    }
    verdict(worst <= 1e-10, format!("max deviation {worst:.2e} over {cases} datasets"))
}

// ---- covariance symmetries --------------------------------------------------

pub fn check_covariance_symmetries(seed: u64, cases: usize) -> Check {
    use m2spec::covariance::oracle::circular_lag_covariance;
    use m2spec::grid::Lag;
    let mut rng = rng(seed);
    let mut worst_neg: f64 = 0.0;
    let mut worst_wrap: f64 = 0.0;
    let mut worst_feas: f64 = 0.0;
    for _ in 0..cases {
        let d = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let shape = random_shape(&mut rng, d, 3, 10);
        let radii: Vec<usize> = shape.dims().iter().map(|&n| (n - 1) / 2).map(|r| r.min(2)).collect();
        let lag_box = lambda_box(&radii, &shape).unwrap();
        let y = random_vector_field(&mut rng, &shape, m);
        let (p, sigma) = estimate_covariances(&y, &lag_box, 1e-3).unwrap();
        for (pos, k) in lag_box.lags().iter().enumerate() {
            let a = &sigma.matrices()[pos];
            let b = &sigma.matrices()[lag_box.negated_position(pos)];
            worst_neg = worst_neg.max((&a.adjoint() - b).max_abs());
            let wrapped = Lag(k.0.iter().zip(shape.dims()).map(|(&kj, &n)| n as i64 - kj).collect());
            let direct = circular_lag_covariance(&y, k);
            let at_wrap = circular_lag_covariance(&y, &wrapped);
            worst_wrap = worst_wrap.max((&at_wrap - &direct.adjoint()).max_abs());
        }
        worst_feas = worst_feas.max(moment_map(&p.field, &lag_box).unwrap().distance(&sigma));
        if feasible_witness_fails(&p.field) {
            return Err("periodogram is not positive definite".into());
        }
    }
    let ok = worst_neg == 0.0 && worst_wrap <= 1e-12 && worst_feas <= 1e-12;
    verdict(ok, format!("lag negation {worst_neg:.1e}, wrap {worst_wrap:.1e}, witness {worst_feas:.1e}"))
}

fn feasible_witness_fails(phi: &MatrixField<f64>) -> bool {
    phi.matrices().any(|m| cholesky(&m).is_err())
}

// ---- derivatives ---------------------------------------------------------

pub fn check_derivatives(seed: u64, points: usize) -> Check {
    let mut rng = rng(seed);
    let (mut worst_g, mut worst_h, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..points {
        let inst = random_instance(&mut rng);
        let q = random_feasible(&mut rng, &inst.psi, &inst.lag_box, 0.4);
        let param = Parametrization::new(&inst.lag_box, inst.psi.channels());
        let x = param.pack(&q);
        let n = x.len();
        let g = dual_gradient(&q, &inst.psi, &inst.sigma).unwrap();
        let h = dual_hessian(&q, &inst.psi).unwrap();
        let step = 1e-5;
        let shifted = |i: usize, s: f64| {
            let mut y = x.clone();
            y[i] += s;
            param.unpack(&y)
        };
        let mut g_fd = vec![0.0; n];
        let mut h_fd = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let (qp, qm) = (shifted(i, step), shifted(i, -step));
            g_fd[i] = (dual_value(&qp, &inst.psi, &inst.sigma).unwrap() - dual_value(&qm, &inst.psi, &inst.sigma).unwrap()) / (2.0 * step);
            let gp = dual_gradient(&qp, &inst.psi, &inst.sigma).unwrap();
            let gm = dual_gradient(&qm, &inst.psi, &inst.sigma).unwrap();
            for j in 0..n {
                h_fd[(j, i)] = (gp[j] - gm[j]) / (2.0 * step);
            }
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gd = g.iter().zip(&g_fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_g = worst_g.max(rel(gd, gn.max(1e-3)));
        let h_an = DMatrix::from_fn(n, n, |i, j| h.get(i, j));
        worst_h = worst_h.max(rel((&h_an - &h_fd).norm(), h_an.norm()));
        min_eig = min_eig.min(h_an.symmetric_eigenvalues().min());
    }
    let ok = worst_g <= 1e-6 && worst_h <= 1e-5 && min_eig > 0.0;
    verdict(ok, format!("gradient rel {worst_g:.1e}, Hessian rel {worst_h:.1e}, min eigenvalue {min_eig:.2e} over {points} points"))
}

// ---- solver ----------------------------------------------------------------

pub fn check_roundtrip_recovery(seed: u64, instances: usize) -> Check {
    let mut rng = rng(seed);
    let (mut worst_q, mut worst_r) = (0.0f64, 0.0f64);
    for i in 0..instances {
        let inst = random_instance(&mut rng);
        let (q, report) = solve_dual(&inst.psi, &inst.sigma, &tight_options()).map_err(|e| format!("instance {i} ({}): {e}", inst.describe()))?;
        let err = rel(q.distance(&inst.q_true), inst.q_true.norm().max(1e-12));
        let res = moment_residual(&primal_recover(&q, &inst.psi).unwrap(), &inst.sigma).unwrap();
        if err > 1e-6 || res > 1e-8 {
            return Err(format!("instance {i} ({}): error {err:.2e}, residual {res:.2e}, {} iterations", inst.describe(), report.iterations));
        }
        worst_q = worst_q.max(err);
        worst_r = worst_r.max(res);
    }
    verdict(true, format!("worst Q error {worst_q:.2e}, worst residual {worst_r:.2e} over {instances} instances"))
}

pub fn check_convexity(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        let q1 = random_feasible(&mut rng, &inst.psi, &inst.lag_box, 0.9);
        let q2 = random_feasible(&mut rng, &inst.psi, &inst.lag_box, 0.9);
        let j = |q: &DualCertificate<f64>| dual_value(q, &inst.psi, &inst.sigma).unwrap();
        let (j1, j2) = (j(&q1), j(&q2));
        for t in [0.25, 0.5, 0.75] {
            let mix = add_certificates(&scale_certificate(&q1, t), &scale_certificate(&q2, 1.0 - t));
            worst = worst.max(j(&mix) - (t * j1 + (1.0 - t) * j2));
        }
    }
    verdict(worst <= 1e-10, format!("max chord excess {worst:.2e}"))
}

pub fn check_uniqueness(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        let start = random_feasible(&mut rng, &inst.psi, &inst.lag_box, 0.7);
        let (a, _) = solve_dual(&inst.psi, &inst.sigma, &tight_options()).map_err(|e| e.to_string())?;
        let (b, _) = solve_dual_from(&inst.psi, &inst.sigma, &tight_options(), &start).map_err(|e| e.to_string())?;
        worst = worst.max(a.distance(&b));
    }
    verdict(worst <= 1e-6, format!("max two-start gap {worst:.2e}"))
}

pub fn check_monotone_descent(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let (mut strict, mut total) = (0, 0);
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        let (_, report) = solve_dual(&inst.psi, &inst.sigma, &SolverOptions::default()).map_err(|e| e.to_string())?;
        // Steps taken once the decrease is below the resolution of J may move J by rounding only.
        let floor = |v: f64| 64.0 * f64::EPSILON * (1.0 + v.abs());
        if let Some(w) = report.value_history.windows(2).find(|w| w[1] > w[0] + floor(w[0])) {
            return Err(format!("value rose from {} to {}", w[0], w[1]));
        }
        strict += report.value_history.windows(2).filter(|w| w[1] < w[0]).count();
        total += report.value_history.len() - 1;
    }
    verdict(true, format!("{strict}/{total} accepted steps strictly decreased J, the rest moved it by rounding only"))
}

/// Along `t Q_b` with `Psi^{-1} + Q_b` singular at a grid point, `J` grows without bound.
pub fn check_boundary_blowup(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut summary = String::new();
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        // With Sigma = Gamma(Psi) the minimizer is Q = 0, so J is increasing along every ray.
        let sigma = moment_map(inst.psi.field(), &inst.lag_box).unwrap();
        let q = random_certificate(&mut rng, &inst.lag_box, inst.psi.channels());
        let limit = feasibility_limit(&q, &inst.psi);
        if !limit.is_finite() {
            continue;
        }
        let qb = scale_certificate(&q, limit);
        let ts = [0.9, 0.99, 0.999, 0.999999];
        let vals: Vec<f64> = ts.iter().map(|&t| dual_value(&scale_certificate(&qb, t), &inst.psi, &sigma).unwrap()).collect();
        if !vals.windows(2).all(|w| w[1] > w[0]) {
            return Err(format!("not increasing toward the boundary: {vals:?}"));
        }
        if feasible(&scale_certificate(&qb, 1.0 + 1e-9), &inst.psi) {
            return Err("scaled certificate is not on the boundary".into());
        }
        summary = format!("e.g. J = {:.3} / {:.3} / {:.3} / {:.3} at t = 0.9 / 0.99 / 0.999 / 0.999999", vals[0], vals[1], vals[2], vals[3]);
    }
    verdict(true, summary)
}

fn ratio_spread(ratios: &[f64]) -> f64 {
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// `||Delta Q|| / delta` for `delta in {1e-3, 1e-4, 1e-5}` stays within a factor 2
/// when `Sigma` moves along a random direction.
pub fn check_wellposed_sigma(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = 1.0;
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        let dir = random_certificate(&mut rng, &inst.lag_box, inst.psi.channels());
        let dir = scale_certificate(&dir, 1.0 / dir.norm());
        let e = CovarianceSet::new(inst.lag_box.clone(), dir.coefficients()).unwrap();
        let (q0, _) = solve_dual(&inst.psi, &inst.sigma, &tight_options()).map_err(|e| e.to_string())?;
        let mut ratios = Vec::new();
        for delta in [1e-3, 1e-4, 1e-5] {
            let moved: Vec<CMatrix<f64>> = inst.sigma.matrices().iter().zip(e.matrices()).map(|(s, d)| s + &d.scale(delta)).collect();
            let moved = CovarianceSet::new(inst.lag_box.clone(), moved).unwrap();
            let (q, _) = solve_dual_from(&inst.psi, &moved, &tight_options(), &q0).map_err(|e| e.to_string())?;
            ratios.push(q.distance(&q0) / delta);
        }
        worst = worst.max(ratio_spread(&ratios));
    }
    verdict(worst <= 2.0, format!("worst ratio spread {worst:.4}"))
}

/// Same stability test with the prior moved along a random Hermitian field.
pub fn check_wellposed_psi(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = 1.0;
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        let dir = random_hermitian_field(&mut rng, &inst.shape, inst.psi.channels());
        let dir = dir.scale(1.0 / dir.frobenius_norm_sqr().sqrt());
        let (q0, _) = solve_dual(&inst.psi, &inst.sigma, &tight_options()).map_err(|e| e.to_string())?;
        let mut ratios = Vec::new();
        for delta in [1e-3, 1e-4, 1e-5] {
            let moved = MatrixField::from_data(
                inst.shape.clone(),
                inst.psi.channels(),
                inst.psi.field().data().iter().zip(dir.data()).map(|(a, b)| a + b * delta).collect(),
            )
            .unwrap();
            let psi = Prior::new(moved).map_err(|e| e.to_string())?;
            let (q, _) = solve_dual_from(&psi, &inst.sigma, &tight_options(), &q0).map_err(|e| e.to_string())?;
            ratios.push(q.distance(&q0) / delta);
        }
        worst = worst.max(ratio_spread(&ratios));
    }
    verdict(worst <= 2.0, format!("worst ratio spread {worst:.4}"))
}

/// The solved spectrum is no farther from the prior than any other PD spectrum
/// with the same moments.
pub fn check_primal_optimality(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        let (q, _) = solve_dual(&inst.psi, &inst.sigma, &tight_options()).map_err(|e| e.to_string())?;
        let phi = primal_recover(&q, &inst.psi).unwrap();
        let d_opt = is_distance(&phi, inst.psi.field()).unwrap();
        for _ in 0..3 {
            // Remove the Lambda-moments of a random Hermitian field to land in ker Gamma.
            let g = random_hermitian_field(&mut rng, &inst.shape, inst.psi.channels());
            let gm = moment_map(&g, &inst.lag_box).unwrap();
            let proj = eval_trig_polynomial(&inst.lag_box, gm.matrices(), &inst.shape).unwrap();
            let kernel: Vec<C> = g.data().iter().zip(proj.data()).map(|(a, b)| a - b).collect();
            let mut s = 1.0;
            let other = loop {
                let cand = MatrixField::from_data(inst.shape.clone(), inst.psi.channels(), phi.data().iter().zip(&kernel).map(|(a, b)| a + b * s).collect())
                    .unwrap();
                if !feasible_witness_fails(&cand) {
                    break cand;
                }
                s *= 0.5;
            };
            let gap = moment_map(&other, &inst.lag_box).unwrap().distance(&inst.sigma);
            if gap > 1e-10 {
                return Err(format!("kernel perturbation changed the moments by {gap:.2e}"));
            }
            worst = worst.max(d_opt - is_distance(&other, inst.psi.field()).unwrap());
        }
    }
    verdict(worst <= 1e-8, format!("max D(opt) - D(other) = {worst:.2e}"))
}

pub fn check_distance_nonnegative(seed: u64, cases: usize) -> Check {
    let mut rng = rng(seed);
    let mut min_d = f64::INFINITY;
    for _ in 0..cases {
        let d = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let shape = random_shape(&mut rng, d, 2, 6);
        let a = random_pd_field(&mut rng, &shape, m);
        let b = random_pd_field(&mut rng, &shape, m);
        let self_d = is_distance(&a, &a).unwrap();
        if self_d.abs() > 1e-12 {
            return Err(format!("D(Phi, Phi) = {self_d:.2e}"));
        }
        let dab = is_distance(&a, &b).unwrap();
        if dab <= 0.0 {
            return Err(format!("D(Phi, Psi) = {dab:.2e} for distinct fields"));
        }
        min_d = min_d.min(dab);
    }
    verdict(true, format!("D(Phi, Phi) = 0 and min D over distinct pairs {min_d:.3e}"))
}

pub fn verdict(ok: bool, summary: String) -> Check {
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}
