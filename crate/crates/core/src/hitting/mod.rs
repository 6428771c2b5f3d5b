//! Monte Carlo hitting probabilities and polarity scans.
//!
//! Hit events are evaluated on a lattice; the grid minimum overstates the
//! continuum infimum, so every estimate also carries a margin-corrected
//! count based on the empirical modulus of continuity.

mod drift;
mod scan;

pub use drift::{lipschitz_check_values, lipschitz_verify, LipschitzCheck, LipschitzDrift};
pub use scan::{
    hitting_probability, hitting_scan, polarity_scan, target_hitting_probability, HittingScan, McOptions,
    MIN_POINTS_PER_AXIS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldError;
use crate::metric::MetricError;
use crate::stats::{least_squares, wilson_interval, Z95};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HittingError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("n_mc must be positive")]
    ZeroReplicates,
    #[error("ball of radius {0} around the target point does not meet the index set")]
    EmptyBall(f64),
    #[error("grid under-resolves radius {radius}: axis {axis} has {points} points, need at least {need}")]
    UnderResolved {
        radius: f64,
        axis: usize,
        points: usize,
        need: usize,
    },
    #[error("range hitting bound requires Q < d; got Q = {q}, d = {d}")]
    QNotBelowD { q: f64, d: usize },
    #[error("radii must be positive and strictly decreasing")]
    BadRadii,
    #[error("grid step must lie in (0, 1), got {0}")]
    BadStep(f64),
    #[error("invalid drift: {0}")]
    BadDrift(String),
}

/// Margin-corrected companion of a hit count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginEstimate {
    /// Threshold enlargement `m(h)`.
    pub margin: f64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimated hitting probability at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub r: f64,
    pub n_mc: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub margin: Option<MarginEstimate>,
    /// Grid points entering the event.
    pub grid_points: usize,
    pub grid_step: f64,
    pub seed: u64,
}

impl HittingEstimate {
    pub fn from_counts(r: f64, hits: u64, n_mc: u64, grid_points: usize, grid_step: f64, seed: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, n_mc, Z95);
        Self {
            r,
            n_mc,
            hits,
            p_hat: if n_mc == 0 { 0.0 } else { hits as f64 / n_mc as f64 },
            ci_low,
            ci_high,
            margin: None,
            grid_points,
            grid_step,
            seed,
        }
    }

    pub fn with_margin(mut self, margin: f64, hits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, self.n_mc, Z95);
        self.margin = Some(MarginEstimate {
            margin,
            hits,
            p_hat: hits as f64 / self.n_mc as f64,
            ci_low,
            ci_high,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Fitted,
    /// Fewer than three radii with a positive estimate.
    InsufficientHits,
}

/// Log-log slope of estimated probabilities against radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub radii: Vec<f64>,
    pub estimates: Vec<HittingEstimate>,
    pub status: FitStatus,
    pub fitted_slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Monte Carlo standard error of the slope (delta method on `log p̂`).
    pub slope_se: Option<f64>,
    /// Residual standard error of the slope.
    pub residual_se: Option<f64>,
    /// Radii used by the fit (those with `p̂ > 0`).
    pub fitted_points: usize,
}

/// Default slack between a fitted slope and its predicted exponent.
pub const SLOPE_TOLERANCE: f64 = 0.3;

impl ScalingReport {
    /// Tolerance for comparing the slope to a predicted exponent: the default
    /// 0.3, narrowed to `max(0.1, 4·se)` once the Monte Carlo error drops
    /// below 0.05.
    pub fn tolerance(&self) -> f64 {
        match self.slope_se {
            Some(se) if se < 0.05 => SLOPE_TOLERANCE.min((4.0 * se).max(0.1)),
            _ => SLOPE_TOLERANCE,
        }
    }

    /// `p̂(r) / r^exponent` per radius; the constant in an `r^exponent` bound.
    pub fn normalized(&self, exponent: f64) -> Vec<f64> {
        self.estimates.iter().map(|e| e.p_hat / e.r.powf(exponent)).collect()
    }
}

/// Fits `log p̂ = a + slope·log r` over estimates with `p̂ > 0`.
pub fn scaling_exponent(estimates: &[HittingEstimate]) -> Result<ScalingReport, HittingError> {
    let radii: Vec<f64> = estimates.iter().map(|e| e.r).collect();
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HittingError::BadRadii);
    }
    let used: Vec<&HittingEstimate> = estimates.iter().filter(|e| e.p_hat > 0.0).collect();
    let mut report = ScalingReport {
        radii,
        estimates: estimates.to_vec(),
        status: FitStatus::InsufficientHits,
        fitted_slope: None,
        intercept: None,
        slope_se: None,
        residual_se: None,
        fitted_points: used.len(),
    };
    if used.len() < 3 {
        return Ok(report);
    }
    let x: Vec<f64> = used.iter().map(|e| e.r.ln()).collect();
    let y: Vec<f64> = used.iter().map(|e| e.p_hat.ln()).collect();
    let Some(fit) = least_squares(&x, &y) else {
        return Ok(report);
    };
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    // Var(log p̂) ≈ (1 − p) / (n p)
    let var: f64 = used
        .iter()
        .zip(&x)
        .map(|(e, xi)| {
            let w = (xi - mx) / sxx;
            w * w * (1.0 - e.p_hat) / (e.n_mc as f64 * e.p_hat)
        })
        .sum();
    report.status = FitStatus::Fitted;
    report.fitted_slope = Some(fit.slope);
    report.intercept = Some(fit.intercept);
    report.slope_se = Some(var.sqrt());
    report.residual_se = Some(fit.residual_se);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(radii: &[f64], p: impl Fn(f64) -> f64) -> Vec<HittingEstimate> {
        radii
            .iter()
            .map(|&r| {
                let mut e = HittingEstimate::from_counts(r, 0, 1_000_000, 10, 0.01, 0);
                e.p_hat = p(r);
                e
            })
            .collect()
    }

    #[test]
    fn exact_power_law_recovers_exponent() {
        let radii = [0.2, 0.1, 0.05, 0.025];
        let rep = scaling_exponent(&synthetic(&radii, |r| r * r)).unwrap();
        assert_eq!(rep.status, FitStatus::Fitted);
        assert!((rep.fitted_slope.unwrap() - 2.0).abs() < 1e-12);
        assert!(rep.residual_se.unwrap() < 1e-12);
        let n = rep.normalized(2.0);
        assert!(n.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zeros_give_explicit_status() {
        let radii = [0.2, 0.1, 0.05, 0.025];
        let rep = scaling_exponent(&synthetic(&radii, |_| 0.0)).unwrap();
        assert_eq!(rep.status, FitStatus::InsufficientHits);
        assert_eq!(rep.fitted_slope, None);
        // two positive estimates are still not enough
        let rep = scaling_exponent(&synthetic(&radii, |r| if r > 0.07 { r } else { 0.0 })).unwrap();
        assert_eq!(rep.status, FitStatus::InsufficientHits);
        assert_eq!(rep.fitted_points, 2);
        // zeros are dropped from the fit, not logged
        let rep = scaling_exponent(&synthetic(&[0.4, 0.2, 0.1, 0.05, 0.025], |r| {
            if r > 0.03 {
                r.powi(3)
            } else {
                0.0
            }
        }))
        .unwrap();
        assert!((rep.fitted_slope.unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn radii_must_decrease() {
        let e = synthetic(&[0.1, 0.2, 0.05], |r| r);
        assert_eq!(scaling_exponent(&e), Err(HittingError::BadRadii));
        let e = synthetic(&[0.1, 0.1, 0.05], |r| r);
        assert_eq!(scaling_exponent(&e), Err(HittingError::BadRadii));
    }

    #[test]
    fn tolerance_tightens_with_precision() {
        let radii = [0.2, 0.1, 0.05];
        let mut rep = scaling_exponent(&synthetic(&radii, |r| r)).unwrap();
        rep.slope_se = Some(0.2);
        assert_eq!(rep.tolerance(), 0.3);
        rep.slope_se = Some(0.04);
        assert!((rep.tolerance() - 0.16).abs() < 1e-15);
        rep.slope_se = Some(0.001);
        assert_eq!(rep.tolerance(), 0.1);
    }

    #[test]
    fn estimate_carries_wilson_interval() {
        let e = HittingEstimate::from_counts(0.1, 8, 10, 5, 0.01, 1).with_margin(0.02, 9);
        assert!((e.ci_low - 0.490_162).abs() < 1e-6);
        assert!((e.ci_high - 0.943_317).abs() < 1e-6);
        assert_eq!(e.margin.unwrap().hits, 9);
    }

    proptest! {
        #[test]
        fn constant_factor_only_moves_intercept(c in 1e-3f64..1e3, k in 0.5f64..3.0) {
            let radii = [0.3, 0.15, 0.07, 0.02];
            let a = scaling_exponent(&synthetic(&radii, |r| r.powf(k))).unwrap();
            let b = scaling_exponent(&synthetic(&radii, |r| c * r.powf(k))).unwrap();
            prop_assert!((a.fitted_slope.unwrap() - b.fitted_slope.unwrap()).abs() < 1e-10);
            prop_assert!((b.intercept.unwrap() - a.intercept.unwrap() - c.ln()).abs() < 1e-10);
        }

        #[test]
        fn wilson_brackets_p_hat(hits in 0u64..=500, extra in 0u64..500) {
            let n = hits + extra;
            prop_assume!(n > 0);
            let e = HittingEstimate::from_counts(0.1, hits, n, 1, 0.1, 0);
            prop_assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
        }
    }
}
