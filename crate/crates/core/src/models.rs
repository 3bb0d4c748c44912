//! Seeded generators for the two-receiver radar scene: a 3-d complex
//! sinusoid in noise and a 3-d autoregressive field in noise, together with
//! their true spectra.
//!
//! Complex noise is circular Gaussian with real and imaginary parts i.i.d.
//! `N(0, var/2)`, so that `E|w|^2 = var`.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::grid::{GridShape, MatrixField, VectorField};
use crate::hermitian::CMatrix;

type C64 = Complex<f64>;

/// Default per-axis burn-in for the AR recursion.
pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct SinusoidConfig {
    /// Samples per pulse, pulses, antennas.
    pub dims: [usize; 3],
    pub amplitude: f64,
    pub freqs: [f64; 3],
    /// Ratio of the receiver spacing to the antenna spacing.
    pub antenna_ratio: i64,
    pub noise_var: f64,
    pub seed: u64,
}

impl SinusoidConfig {
    /// The single-target radar scene: `N = [30, 30, 8]`, `a = 1`, `M = 20`,
    /// `sigma^2 = 2`, `theta = [0.8101, -0.5872, 2.1798]`.
    pub fn radar_reference(seed: u64) -> Self {
        Self { dims: [30, 30, 8], amplitude: 1.0, freqs: [0.8101, -0.5872, 2.1798], antenna_ratio: 20, noise_var: 2.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(&self.dims)?;
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid("amplitude", format!("must be finite and nonnegative, got {}", self.amplitude)));
        }
        check_noise(self.noise_var)?;
        check_freqs(&self.freqs)
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(self.dims.to_vec()).expect("validated dims")
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth::IdealSinusoid {
            freqs: self.freqs,
            amplitude: self.amplitude,
            antenna_ratio: self.antenna_ratio,
            noise_var: self.noise_var,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArConfig {
    pub dims: [usize; 3],
    /// Pole moduli `rho_j`; their sum must stay below one.
    pub pole_moduli: [f64; 3],
    pub freqs: [f64; 3],
    pub antenna_ratio: i64,
    pub noise_var: f64,
    /// Extra samples per axis discarded before the retained block.
    pub burn_in: [usize; 3],
    pub seed: u64,
}

impl ArConfig {
    /// `rho_j = 0.3`, `sigma^2 = 2` on the radar grid.
    pub fn reference(freqs: [f64; 3], seed: u64) -> Self {
        Self {
            dims: [30, 30, 8],
            pole_moduli: [0.3; 3],
            freqs,
            antenna_ratio: 20,
            noise_var: 2.0,
            burn_in: [DEFAULT_BURN_IN; 3],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(&self.dims)?;
        check_noise(self.noise_var)?;
        check_freqs(&self.freqs)?;
        if let Some(r) = self.pole_moduli.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
            return Err(invalid("pole_moduli", format!("each modulus must lie in [0, 1), got {r}")));
        }
        let sum: f64 = self.pole_moduli.iter().sum();
        if sum >= 1.0 {
            return Err(invalid("pole_moduli", format!("sum {sum} must be below 1 for a stable recursion")));
        }
        Ok(())
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(self.dims.to_vec()).expect("validated dims")
    }

    pub fn coefficients(&self) -> [C64; 3] {
        std::array::from_fn(|j| C64::from_polar(self.pole_moduli[j], self.freqs[j]))
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth::RationalAr {
            pole_moduli: self.pole_moduli,
            freqs: self.freqs,
            antenna_ratio: self.antenna_ratio,
            noise_var: self.noise_var,
            innovation_var: 1.0,
        }
    }
}

fn check_dims(dims: &[usize; 3]) -> Result<()> {
    if dims.contains(&0) {
        return Err(invalid("dims", "every axis needs at least one sample"));
    }
    Ok(())
}

fn check_noise(var: f64) -> Result<()> {
    if !(var >= 0.0 && var.is_finite()) {
        return Err(invalid("noise_var", format!("must be finite and nonnegative, got {var}")));
    }
    Ok(())
}

fn check_freqs(freqs: &[f64; 3]) -> Result<()> {
    if let Some(f) = freqs.iter().find(|f| !(f.abs() <= PI)) {
        return Err(invalid("freqs", format!("frequencies must lie in [-pi, pi], got {f}")));
    }
    Ok(())
}

/// Circular complex Gaussian sample with `E|w|^2 = var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `R = [[1, e^{-i M theta_3}], [e^{i M theta_3}, 1]]`, the cross-receiver
/// phase structure.
pub fn steering_matrix(antenna_ratio: i64, theta3: f64) -> CMatrix<f64> {
    let p = C64::from_polar(1.0, antenna_ratio as f64 * theta3);
    CMatrix::from_row_major(2, vec![C64::new(1.0, 0.0), p.conj(), p, C64::new(1.0, 0.0)])
}

/// `y_1 = a e^{i(<theta,t> + phi)} + w_1`, `y_2 = a e^{i(<theta,t> + M theta_3 + phi)} + w_2`
/// with one uniform phase `phi` per realization.
pub fn simulate_sinusoid(cfg: &SinusoidConfig) -> Result<VectorField<f64>> {
    cfg.validate()?;
    let shape = cfg.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phase: f64 = rng.random_range(-PI..=PI);
    let rot = C64::from_polar(1.0, cfg.antenna_ratio as f64 * cfg.freqs[2]);
    Ok(VectorField::from_fn(shape, 2, |t| {
        let arg: f64 = t.iter().zip(&cfg.freqs).map(|(&tj, &f)| tj as f64 * f).sum::<f64>() + phase;
        let s = C64::from_polar(cfg.amplitude, arg);
        let w1 = complex_gaussian(&mut rng, cfg.noise_var);
        let w2 = complex_gaussian(&mut rng, cfg.noise_var);
        vec![s + w1, s * rot + w2]
    }))
}

/// The AR field `x(t) = sum_j alpha_j x(t - e_j) + w(t)` with unit-variance
/// innovations, run from a zero boundary on a grid enlarged by the burn-in
/// and cropped to its trailing block. Returns `y_1 = x + w_1`,
/// `y_2 = x e^{i M theta_3} + w_2`.
pub fn simulate_ar(cfg: &ArConfig) -> Result<VectorField<f64>> {
    cfg.validate()?;
    let x = simulate_ar_latent(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let rot = C64::from_polar(1.0, cfg.antenna_ratio as f64 * cfg.freqs[2]);
    let mut out = VectorField::zeros(cfg.shape(), 2);
    for (idx, &xv) in x.iter().enumerate() {
        let w1 = complex_gaussian(&mut rng, cfg.noise_var);
        let w2 = complex_gaussian(&mut rng, cfg.noise_var);
        out.at_mut(idx).copy_from_slice(&[xv + w1, xv * rot + w2]);
    }
    Ok(out)
}

/// The latent AR field on the retained block, row-major.
pub fn simulate_ar_latent(cfg: &ArConfig) -> Vec<C64> {
    let [a0, a1, a2] = cfg.coefficients();
    let ext: [usize; 3] = std::array::from_fn(|j| cfg.dims[j] + cfg.burn_in[j]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zero = C64::new(0.0, 0.0);
    // Two planes along the first axis suffice for the recursion.
    let plane = ext[1] * ext[2];
    let mut prev = vec![zero; plane];
    let mut cur = vec![zero; plane];
    let mut out = Vec::with_capacity(cfg.dims.iter().product());
    for t0 in 0..ext[0] {
        for t1 in 0..ext[1] {
            for t2 in 0..ext[2] {
                let i = t1 * ext[2] + t2;
                let mut v = a0 * prev[i] + complex_gaussian(&mut rng, 1.0);
                if t1 > 0 {
                    v += a1 * cur[i - ext[2]];
                }
                if t2 > 0 {
                    v += a2 * cur[i - 1];
                }
                cur[i] = v;
                if t0 >= cfg.burn_in[0] && t1 >= cfg.burn_in[1] && t2 >= cfg.burn_in[2] {
                    out.push(v);
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    /// Line spectrum `2 pi a^2 delta(w - theta) R + sigma^2 I`.
    IdealSinusoid { freqs: [f64; 3], amplitude: f64, antenna_ratio: i64, noise_var: f64 },
    /// `Phi_x(w) R + sigma^2 I` with `Phi_x = Var(w) / |1 - <alpha, e^{-iw}>|^2`.
    RationalAr { pole_moduli: [f64; 3], freqs: [f64; 3], antenna_ratio: i64, noise_var: f64, innovation_var: f64 },
}

impl GroundTruth {
    pub fn freqs(&self) -> [f64; 3] {
        match self {
            GroundTruth::IdealSinusoid { freqs, .. } | GroundTruth::RationalAr { freqs, .. } => *freqs,
        }
    }

    pub fn steering(&self) -> CMatrix<f64> {
        match self {
            GroundTruth::IdealSinusoid { freqs, antenna_ratio, .. } | GroundTruth::RationalAr { freqs, antenna_ratio, .. } => {
                steering_matrix(*antenna_ratio, freqs[2])
            }
        }
    }
}

/// Singular part of a line spectrum: `weight * delta(w - freqs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralAtom {
    pub freqs: [f64; 3],
    pub weight: CMatrix<f64>,
}

/// A true spectrum on the grid: the absolutely continuous part evaluated
/// pointwise plus, for line spectra, the atom it carries.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueSpectrum {
    pub field: MatrixField<f64>,
    pub atom: Option<SpectralAtom>,
}

/// AR spectral density `Var(w) / |1 - sum_j alpha_j e^{-i w_j}|^2`.
pub fn ar_density(pole_moduli: &[f64; 3], freqs: &[f64; 3], innovation_var: f64, w: &[f64]) -> f64 {
    let mut d = C64::new(1.0, 0.0);
    for j in 0..3 {
        d -= C64::from_polar(pole_moduli[j], freqs[j] - w[j]);
    }
    innovation_var / d.norm_sqr()
}

pub fn true_spectrum(truth: &GroundTruth, shape: &GridShape) -> Result<TrueSpectrum> {
    if shape.ndim() != 3 {
        return Err(crate::Error::DimensionMismatch { expected: 3, found: shape.ndim() });
    }
    let r = truth.steering();
    match truth {
        GroundTruth::IdealSinusoid { freqs, amplitude, noise_var, .. } => Ok(TrueSpectrum {
            field: MatrixField::constant(shape.clone(), &CMatrix::scaled_identity(2, *noise_var)),
            atom: Some(SpectralAtom { freqs: *freqs, weight: r.scale(2.0 * PI * amplitude * amplitude) }),
        }),
        GroundTruth::RationalAr { pole_moduli, freqs, noise_var, innovation_var, .. } => {
            let noise = CMatrix::scaled_identity(2, *noise_var);
            let field = MatrixField::from_fn(shape.clone(), 2, |p| {
                let w: Vec<f64> = (0..3).map(|j| shape.frequency::<f64>(j, p[j])).collect();
                &r.scale(ar_density(pole_moduli, freqs, *innovation_var, &w)) + &noise
            });
            Ok(TrueSpectrum { field, atom: None })
        }
    }
}
