//! Spectral calibration: white-noise spectral processes, tail and Hölder
//! checks, the eigenvalue floor `λ_V`, and the distinguished-logarithm
//! estimator `ψ̃`.

mod noise;
mod psi;
mod spectral;

pub use noise::{holder_bound_check, holder_exponent, HolderCheck, NoiseFamily, NoiseLevel};
pub use psi::{
    distinguished_log, fourier_o, log_trace, psi_batch, psi_estimator, psi_from_noise, LogOptions, LogTrace,
    OptionModel, OptionShape, PsiBatch, PsiEstimate, PsiVerdict,
};
pub use spectral::{
    ito_covariance, lambda_min_on_iv, simulate_spectral_noise, FrequencyGrid, LambdaReport, SpectralPaths,
    SpectralSampler,
};

use thiserror::Error;

use crate::field::FieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("tail integral diverges: needs 2a − p > 1, got a = {a}, p = {p}")]
    TailDivergent { a: f64, p: f64 },
    #[error("tail exponent p = {0} must exceed 1")]
    PNotAboveOne(f64),
    #[error("invalid noise level: {0}")]
    InvalidNoise(String),
    #[error("invalid option model: {0}")]
    InvalidOption(String),
    #[error("maturity T = {0} must be positive")]
    BadMaturity(f64),
    #[error("noise scale {0} must be finite and ≥ 0")]
    BadNoiseScale(f64),
    #[error("invalid frequency grid: {0}")]
    BadGrid(String),
    #[error("quadrature for {what} did not converge (error estimate {error:e})")]
    Quadrature { what: &'static str, error: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("path is empty or the anchor is out of range")]
    EmptyPath,
    #[error("anchor value must be 1, got {0} + {1}i")]
    AnchorNotOne(f64, f64),
    #[error("path hits zero at index {index} (modulus {modulus:e})")]
    ZeroHit { index: usize, modulus: f64 },
    #[error("phase increment {increment} at index {index} exceeds the unwrapping limit; refine the grid")]
    PhaseJumpTooLarge { index: usize, increment: f64 },
}
