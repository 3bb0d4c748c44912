//! Matrix-valued spectral estimation for multidimensional random fields.
//!
//! The estimator matches a box of covariance lags with the spectrum closest
//! to a prior in the Itakura-Saito sense, computed on the discrete torus via
//! a Newton solver on the convex dual. The numerical core is generic over
//! [`Real`] (`f32` or `f64`); the aliases below fix the common `f64` case.

pub mod covariance;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod hermitian;
pub mod isdual;
pub mod models;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub use num_complex::Complex;

pub type Complex64 = Complex<f64>;
pub type CMatrix64 = hermitian::CMatrix<f64>;
pub type MatrixField64 = grid::MatrixField<f64>;
pub type VectorField64 = grid::VectorField<f64>;
pub type CovarianceSet64 = covariance::CovarianceSet<f64>;
pub type Periodogram64 = covariance::Periodogram<f64>;
pub type Prior64 = isdual::Prior<f64>;
pub type DualCertificate64 = isdual::DualCertificate<f64>;

pub type CMatrix32 = hermitian::CMatrix<f32>;
pub type MatrixField32 = grid::MatrixField<f32>;
pub type VectorField32 = grid::VectorField<f32>;
pub type CovarianceSet32 = covariance::CovarianceSet<f32>;
pub type Prior32 = isdual::Prior<f32>;
pub type DualCertificate32 = isdual::DualCertificate<f32>;
