//! Simulation and verification toolkit for anisotropic Gaussian random fields.
//!
//! * [`metric`]: the anisotropic metric ρ, covers, covering numbers, chaining
//!   arithmetic and the entropy integral.
//! * [`field`]: exact-covariance sampling of product-exponential field models
//!   with certified canonical-metric and eigenvalue bounds.
//! * [`hitting`]: Monte Carlo hitting probabilities, polarity scans and
//!   log-log scaling fits.
//! * [`calibration`]: the white-noise spectral process, the distinguished
//!   logarithm and the spectral calibration estimator.
//! * [`experiment`]: configuration-driven runs with reproducible artifacts.

pub mod calibration;
pub mod experiment;
pub mod field;
pub mod hitting;
pub mod metric;
pub mod quad;
pub mod seed;
pub mod stats;
