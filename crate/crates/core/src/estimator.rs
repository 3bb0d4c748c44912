//! End-to-end spectral estimators, peak extraction and the paired
//! Monte-Carlo harness.
//!
//! The IS estimator builds lag estimates from the ridge-regularized
//! periodogram, takes a prior (by default the constant zero-lag estimate) and
//! solves the dual problem from `Q = 0`. The baselines are separable
//! lag-window (Blackman-Tukey) estimates over circular sample covariances.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::covariance::{circular_covariance_field, default_epsilon, estimate_covariances, CovarianceSet};
use crate::error::{invalid, Result};
use crate::grid::{dft_in_place, lambda_box, Direction, GridData, MatrixField, VectorField};
use crate::hermitian::CMatrix;
use crate::isdual::{solve_dual, DualCertificate, Prior, SolveReport, SolverOptions};
use crate::models::{simulate_ar, simulate_sinusoid, true_spectrum, ArConfig, SinusoidConfig, DEFAULT_BURN_IN};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum PriorKind<T> {
    /// `Psi = Sigma_hat_0` at every grid point.
    ZeroLag,
    Identity,
    Field(MatrixField<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSpec<T> {
    pub lag_radii: Vec<usize>,
    pub prior: PriorKind<T>,
    /// Periodogram ridge; `None` selects [`default_epsilon`].
    pub epsilon: Option<T>,
    pub solver: SolverOptions,
}

impl<T: Real> EstimatorSpec<T> {
    pub fn new(lag_radii: Vec<usize>) -> Self {
        Self { lag_radii, prior: PriorKind::ZeroLag, epsilon: None, solver: SolverOptions::default() }
    }
}

/// Output of [`estimate_is`].
#[derive(Clone, Debug)]
pub struct IsEstimate<T> {
    pub spectrum: MatrixField<T>,
    pub report: SolveReport,
    pub covariances: CovarianceSet<T>,
    pub certificate: DualCertificate<T>,
    pub epsilon: T,
}

pub fn estimate_is<T: Real>(y: &VectorField<T>, spec: &EstimatorSpec<T>) -> Result<IsEstimate<T>> {
    let shape = y.shape();
    let lag_box = lambda_box(&spec.lag_radii, shape)?;
    let epsilon = spec.epsilon.unwrap_or_else(|| default_epsilon(y));
    let (_, sigma) = estimate_covariances(y, &lag_box, epsilon)?;
    let m = y.channels();
    let prior = match &spec.prior {
        PriorKind::ZeroLag => Prior::constant(shape.clone(), sigma.zero_lag())?,
        PriorKind::Identity => Prior::constant(shape.clone(), &CMatrix::identity(m))?,
        PriorKind::Field(f) => {
            f.same_layout(&MatrixField::zeros(shape.clone(), m))?;
            Prior::new(f.clone())?
        }
    };
    let (certificate, report) = solve_dual(&prior, &sigma, &spec.solver)?;
    let spectrum = crate::isdual::primal_recover(&certificate, &prior)?;
    Ok(IsEstimate { spectrum, report, covariances: sigma, certificate, epsilon })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    Rectangular,
    Bartlett,
}

/// Separable lag window over `|k_j| < widths[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub widths: Vec<usize>,
}

impl WindowSpec {
    pub fn rectangular(widths: Vec<usize>) -> Self {
        Self { kind: WindowKind::Rectangular, widths }
    }

    pub fn bartlett(widths: Vec<usize>) -> Self {
        Self { kind: WindowKind::Bartlett, widths }
    }

    /// One-axis weight at lag `k`.
    pub fn weight(&self, axis: usize, k: i64) -> f64 {
        let w = self.widths[axis] as i64;
        if k.abs() >= w {
            return 0.0;
        }
        match self.kind {
            WindowKind::Rectangular => 1.0,
            WindowKind::Bartlett => 1.0 - k.abs() as f64 / w as f64,
        }
    }
}

/// Lag-window estimate `sum_{|k_j| < w_j} w(k) Sigma_hat_k exp(-i <k, theta_l>)`
/// with circular sample covariances and no ridge. Hermitian, not necessarily
/// positive definite.
pub fn windowed_periodogram<T: Real>(y: &VectorField<T>, window: &WindowSpec) -> Result<MatrixField<T>> {
    let shape = y.shape();
    if window.widths.len() != shape.ndim() {
        return Err(crate::Error::DimensionMismatch { expected: shape.ndim(), found: window.widths.len() });
    }
    for (axis, (&w, &n)) in window.widths.iter().zip(shape.dims()).enumerate() {
        if w == 0 || w > n {
            return Err(invalid("widths", format!("axis {axis}: width {w} must lie in 1..={n}")));
        }
    }
    // Per-axis weights folded onto wrapped lags: several lags can share a
    // residue when 2 w - 1 > N.
    let folded: Vec<Vec<f64>> = shape
        .dims()
        .iter()
        .enumerate()
        .map(|(axis, &n)| {
            let w = window.widths[axis] as i64;
            let mut f = vec![0.0; n];
            for k in (1 - w)..w {
                f[k.rem_euclid(n as i64) as usize] += window.weight(axis, k);
            }
            f
        })
        .collect();
    let mut cov = circular_covariance_field(y);
    let entries = cov.entries();
    for idx in 0..shape.total() {
        let p = shape.point(idx);
        let wgt: f64 = p.iter().enumerate().map(|(j, &s)| folded[j][s]).product();
        let wgt = T::lit(wgt);
        for z in &mut cov.data_mut()[idx * entries..(idx + 1) * entries] {
            *z = *z * wgt;
        }
    }
    dft_in_place(shape, entries, cov.data_mut(), Direction::Forward);
    // Restore exact Hermitian symmetry lost to rounding.
    let m = y.channels();
    for idx in 0..shape.total() {
        let h = cov.matrix(idx).hermitian_part();
        cov.set_matrix(idx, &h);
    }
    debug_assert_eq!(cov.channels(), m);
    Ok(cov)
}

/// Location of the largest squared Frobenius norm on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Peak {
    /// 0-based grid index.
    pub index: Vec<usize>,
    /// Grid frequencies folded into `(-pi, pi]`.
    pub frequencies: Vec<f64>,
    /// `||Phi||_F^2` at the peak.
    pub value: f64,
}

impl Peak {
    pub fn one_based(&self) -> Vec<usize> {
        self.index.iter().map(|i| i + 1).collect()
    }
}

/// Argmax of `||Phi(zeta_l)||_F^2`; ties go to the lowest row-major index.
pub fn peak_find<T: Real>(phi: &MatrixField<T>) -> Peak {
    let norms = phi.pointwise_frobenius_sqr();
    let mut best = 0;
    for (i, v) in norms.iter().enumerate() {
        if *v > norms[best] {
            best = i;
        }
    }
    let index = phi.shape().point(best);
    Peak { frequencies: phi.shape().centered_frequencies(&index), index, value: norms[best].to_f64_lossy() }
}

/// Squared Frobenius norm along the axis line through `through`.
pub fn cross_section<T: Real>(phi: &MatrixField<T>, axis: usize, through: &[usize]) -> Vec<f64> {
    let norms = phi.pointwise_frobenius_sqr();
    let mut p = through.to_vec();
    (0..phi.shape().dims()[axis])
        .map(|l| {
            p[axis] = l;
            norms[phi.shape().linear_index(&p)].to_f64_lossy()
        })
        .collect()
}

/// Angle difference folded into `(-pi, pi]`.
pub fn wrapped_angle(d: f64) -> f64 {
    let r = (d + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// `||theta_hat - theta||_2` with componentwise differences taken on the circle.
pub fn frequency_error(estimate: &[f64], truth: &[f64]) -> f64 {
    estimate.iter().zip(truth).map(|(a, b)| wrapped_angle(a - b).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Sinusoid,
    Ar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Is,
    Rect,
    Bart,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Is => "IS",
            Method::Rect => "RECT",
            Method::Bart => "BART",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "is" => Some(Method::Is),
            "rect" => Some(Method::Rect),
            "bart" => Some(Method::Bart),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ThetaDraw {
    /// Each component uniform in `[-pi, pi]`, drawn per trial.
    Uniform,
    Fixed([f64; 3]),
}

/// Everything a Monte-Carlo batch needs; defaults reproduce the radar setup.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloConfig {
    pub family: Family,
    pub dims: [usize; 3],
    pub amplitude: f64,
    pub antenna_ratio: i64,
    pub noise_var: f64,
    pub pole_moduli: [f64; 3],
    pub burn_in: [usize; 3],
    pub theta: ThetaDraw,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
    pub lag_radii: Vec<usize>,
    pub epsilon: Option<f64>,
    pub solver: SolverOptions,
    pub rect_widths: Vec<usize>,
    pub bart_widths: Vec<usize>,
}

impl MonteCarloConfig {
    pub fn radar(family: Family, trials: usize, base_seed: u64) -> Self {
        Self {
            family,
            dims: [30, 30, 8],
            amplitude: 1.0,
            antenna_ratio: 20,
            noise_var: 2.0,
            pole_moduli: [0.3; 3],
            burn_in: [DEFAULT_BURN_IN; 3],
            theta: ThetaDraw::Uniform,
            methods: vec![Method::Is, Method::Rect, Method::Bart],
            trials,
            base_seed,
            lag_radii: vec![1, 1, 1],
            epsilon: None,
            solver: SolverOptions::default(),
            rect_widths: vec![8, 8, 2],
            bart_widths: vec![12, 12, 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "at least one trial is required"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method is required"));
        }
        let shape = crate::grid::GridShape::new(self.dims.to_vec())?;
        shape.check_radii(&self.lag_radii)?;
        self.sinusoid(self.base_seed, [0.0; 3]).validate()?;
        if self.family == Family::Ar {
            self.ar(self.base_seed, [0.0; 3]).validate()?;
        }
        Ok(())
    }

    fn sinusoid(&self, seed: u64, freqs: [f64; 3]) -> SinusoidConfig {
        SinusoidConfig {
            dims: self.dims,
            amplitude: self.amplitude,
            freqs,
            antenna_ratio: self.antenna_ratio,
            noise_var: self.noise_var,
            seed,
        }
    }

    fn ar(&self, seed: u64, freqs: [f64; 3]) -> ArConfig {
        ArConfig {
            dims: self.dims,
            pole_moduli: self.pole_moduli,
            freqs,
            antenna_ratio: self.antenna_ratio,
            noise_var: self.noise_var,
            burn_in: self.burn_in,
            seed,
        }
    }

    pub fn estimator_spec(&self) -> EstimatorSpec<f64> {
        EstimatorSpec { lag_radii: self.lag_radii.clone(), prior: PriorKind::ZeroLag, epsilon: self.epsilon, solver: self.solver.clone() }
    }

    pub fn window(&self, method: Method) -> Option<WindowSpec> {
        match method {
            Method::Is => None,
            Method::Rect => Some(WindowSpec::rectangular(self.rect_widths.clone())),
            Method::Bart => Some(WindowSpec::bartlett(self.bart_widths.clone())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub method: Method,
    pub seed: u64,
    pub theta: [f64; 3],
    /// 0-based peak index.
    pub peak_index: Vec<usize>,
    pub peak_error: f64,
    /// Only for the AR family, whose true spectrum is a density.
    pub spectrum_rel_error: Option<f64>,
    /// Newton iterations for the IS method.
    pub iterations: Option<usize>,
}

/// Draws the trial's frequency vector from its own stream of the trial seed.
pub fn trial_theta(cfg: &MonteCarloConfig, seed: u64) -> [f64; 3] {
    match &cfg.theta {
        ThetaDraw::Fixed(t) => *t,
        ThetaDraw::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2);
            std::array::from_fn(|_| rng.random_range(-PI..=PI))
        }
    }
}

/// Runs one method on one realization.
pub fn run_method(cfg: &MonteCarloConfig, method: Method, y: &VectorField<f64>) -> Result<(MatrixField<f64>, Option<SolveReport>)> {
    match cfg.window(method) {
        None => {
            let est = estimate_is(y, &cfg.estimator_spec())?;
            Ok((est.spectrum, Some(est.report)))
        }
        Some(w) => Ok((windowed_periodogram(y, &w)?, None)),
    }
}

fn run_trial(cfg: &MonteCarloConfig, trial: usize) -> Result<Vec<TrialResult>> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let theta = trial_theta(cfg, seed);
    let (y, truth) = match cfg.family {
        Family::Sinusoid => (simulate_sinusoid(&cfg.sinusoid(seed, theta))?, None),
        Family::Ar => {
            let ar = cfg.ar(seed, theta);
            let truth = true_spectrum(&ar.truth(), &ar.shape())?.field;
            (simulate_ar(&ar)?, Some(truth))
        }
    };
    cfg.methods
        .iter()
        .map(|&method| {
            let (phi, report) = run_method(cfg, method, &y)?;
            let peak = peak_find(&phi);
            Ok(TrialResult {
                trial,
                method,
                seed,
                theta,
                peak_error: frequency_error(&peak.frequencies, &theta),
                peak_index: peak.index,
                spectrum_rel_error: truth.as_ref().map(|t| phi.relative_error(t)),
                iterations: report.map(|r| r.iterations),
            })
        })
        .collect()
}

/// Paired Monte-Carlo batch: trial `i` uses seed `base_seed + i` and every
/// method sees the same realization. Trials run in parallel; results are
/// ordered by trial, then by the configured method order.
pub fn monte_carlo(cfg: &MonteCarloConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let per_trial: Vec<Result<Vec<TrialResult>>> = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect();
    let mut out = Vec::with_capacity(cfg.trials * cfg.methods.len());
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}
