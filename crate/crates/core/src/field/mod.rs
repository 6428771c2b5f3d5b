//! Product-exponential Gaussian field models and their exact sampling.
//!
//! A model is `X(t) = A·Z(t)` where `Z` has `m` independent scalar components
//! with covariance `k(s, t) = ∏_j exp(−|s_j − t_j|^{2H_j})` and `A` is a constant
//! `d × m` mixing matrix. Then `Cov(X(s), X(t)) = k(s, t)·AAᵀ`, so
//! `E‖X(s) − X(t)‖² = 2·tr(AAᵀ)·(1 − k(s, t)) ≤ 2·tr(AAᵀ)·ρ(s, t)²` and the
//! eigenvalues of the pointwise covariance are those of `AAᵀ`.

mod grid;
mod modulus;
mod sample;

pub use grid::Grid;
pub use modulus::{modulus_statistic, ModulusTable};
pub use sample::{sample_paths, FieldSampler, SamplePathSet};

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{HurstVector, MetricError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("mixing matrix must be a non-empty rectangular d×m array")]
    BadMixing,
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid needs at least {need} points, has {have}")]
    TooFewPoints { need: usize, have: usize },
    #[error("grid contains duplicate point {0:?}")]
    DuplicatePoint(Vec<f64>),
    #[error("grid step must be positive, got {0}")]
    BadStep(f64),
    #[error("grid would have {0} rows or points; the limit is {1}")]
    GridTooLarge(usize, usize),
    #[error("covariance factorization failed even with relative jitter {0:e}")]
    Factorization(f64),
    #[error("covariance eigenvalue floor violated: smallest eigenvalue of AAᵀ is {0:e}")]
    Degenerate(f64),
    #[error("modulus scale eps = {0} must lie in (0, 1)")]
    ModulusScale(f64),
}

/// Dense factorization is refused beyond this many (point, component) rows.
pub const MAX_DENSE_ROWS: usize = 6000;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// `(N, d)` Gaussian field with product-exponential kernel and constant mixing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    pub hurst: HurstVector,
    /// Rows of the `d × m` mixing matrix.
    pub mixing: Vec<Vec<f64>>,
}

impl FieldModel {
    pub fn new(hurst: HurstVector, mixing: Vec<Vec<f64>>) -> Result<Self, FieldError> {
        let m = mixing.first().map_or(0, Vec::len);
        if m == 0
            || mixing
                .iter()
                .any(|row| row.len() != m || row.iter().any(|x| !x.is_finite()))
        {
            return Err(FieldError::BadMixing);
        }
        Ok(Self { hurst, mixing })
    }

    /// Output dimension `d`.
    pub fn dim(&self) -> usize {
        self.mixing.len()
    }

    /// Number of independent scalar fields `m`.
    pub fn sources(&self) -> usize {
        self.mixing[0].len()
    }

    pub fn index_dim(&self) -> usize {
        self.hurst.dim()
    }

    pub fn mixing_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.sources(), |i, j| self.mixing[i][j])
    }

    /// `AAᵀ`, the pointwise covariance matrix.
    pub fn pointwise_covariance(&self) -> DMatrix<f64> {
        let a = self.mixing_matrix();
        &a * a.transpose()
    }

    /// `k(s, t) = exp(−Σ_j |s_j − t_j|^{2H_j})`.
    pub fn kernel(&self, s: &[f64], t: &[f64]) -> f64 {
        let e: f64 = s
            .iter()
            .zip(t)
            .zip(self.hurst.as_slice())
            .map(|((a, b), h)| {
                let d = (a - b).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d.powf(2.0 * h)
                }
            })
            .sum();
        (-e).exp()
    }

    /// `√(2·tr(AAᵀ))`, the explicit canonical-metric constant.
    pub fn condition1_constant(&self) -> f64 {
        let tr: f64 = self.mixing.iter().flatten().map(|x| x * x).sum();
        (2.0 * tr).sqrt()
    }

    /// Full covariance of `(X(p_0), …, X(p_{n−1}))`, row `i·d + a` for component `a` at point `i`.
    pub fn build_covariance(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>, FieldError> {
        if points.is_empty() {
            return Err(FieldError::EmptyGrid);
        }
        for p in points {
            self.hurst.check_dim(p.len())?;
        }
        let d = self.dim();
        let rows = points.len() * d;
        if rows > MAX_DENSE_ROWS {
            return Err(FieldError::GridTooLarge(rows, MAX_DENSE_ROWS));
        }
        let aat = self.pointwise_covariance();
        let mut cov = DMatrix::zeros(rows, rows);
        for i in 0..points.len() {
            for j in 0..=i {
                let k = self.kernel(&points[i], &points[j]);
                for a in 0..d {
                    for b in 0..d {
                        let v = k * aat[(a, b)];
                        cov[(i * d + a, j * d + b)] = v;
                        cov[(j * d + b, i * d + a)] = v;
                    }
                }
            }
        }
        Ok(cov)
    }

    /// Scalar kernel matrix on the points.
    pub fn kernel_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = 1.0;
            for j in 0..i {
                let v = self.kernel(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// Tries the matrix as given, then adds `τ·max_diag` to the diagonal for
/// `τ = 1e−10, 2e−10, …` up to `1e−6`. Returns the factor and the relative
/// jitter that was needed.
pub fn factor_with_jitter(mat: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64), FieldError> {
    if let Some(c) = Cholesky::new(mat.clone()) {
        return Ok((c, 0.0));
    }
    let max_diag = mat
        .diagonal()
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut tau = JITTER_START;
    while tau <= JITTER_MAX * (1.0 + 1e-12) {
        let mut m = mat.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += tau * max_diag;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, tau));
        }
        tau *= 2.0;
    }
    Err(FieldError::Factorization(JITTER_MAX))
}

/// Canonical-metric certificate: the largest ratio
/// `√E‖X(s)−X(t)‖² / ρ(s, t)` over grid pairs, against `√(2·tr(AAᵀ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition1Report {
    pub max_ratio: f64,
    pub c_analytic: f64,
    pub ok: bool,
}

pub fn verify_condition1(model: &FieldModel, grid: &Grid) -> Result<Condition1Report, FieldError> {
    let pts = grid.points();
    if pts.len() < 2 {
        return Err(FieldError::TooFewPoints {
            need: 2,
            have: pts.len(),
        });
    }
    let aat = model.pointwise_covariance();
    let d = model.dim();
    let mut max_ratio: f64 = 0.0;
    for i in 0..pts.len() {
        for j in 0..i {
            let rho = model.hurst.distance(&pts[i], &pts[j])?;
            if rho == 0.0 {
                continue;
            }
            // E‖X(s)−X(t)‖² from the covariance: Σ_a C_aa(s,s) + C_aa(t,t) − 2 C_aa(s,t)
            let k_st = model.kernel(&pts[i], &pts[j]);
            let k_ss = model.kernel(&pts[i], &pts[i]);
            let k_tt = model.kernel(&pts[j], &pts[j]);
            let msq: f64 = (0..d).map(|a| aat[(a, a)] * (k_ss + k_tt - 2.0 * k_st)).sum();
            max_ratio = max_ratio.max(msq.max(0.0).sqrt() / rho);
        }
    }
    let c_analytic = model.condition1_constant();
    Ok(Condition1Report {
        max_ratio,
        c_analytic,
        ok: max_ratio <= c_analytic * (1.0 + 1e-12),
    })
}

/// Smallest eigenvalue of `AAᵀ`; a degenerate matrix is rejected.
pub fn verify_condition2(model: &FieldModel) -> Result<f64, FieldError> {
    let aat = model.pointwise_covariance();
    let eig = aat.symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if min.is_nan() || min <= 1e-12 * max.max(f64::MIN_POSITIVE) || max == 0.0 {
        return Err(FieldError::Degenerate(min.max(0.0)));
    }
    Ok(min)
}
