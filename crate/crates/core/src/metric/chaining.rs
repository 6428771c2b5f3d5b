use serde::{Deserialize, Serialize};

use super::MetricError;

/// Truncation floor for the series behind `c2` and the chaining bound.
const SERIES_FLOOR: f64 = 1e-16;

/// Largest level whose scale `r·exp(−2^{n+1})` is still a normal double for r ~ 1.
const MAX_LEVEL: usize = 8;

/// Dyadic chaining scales `ε_n = r·exp(−2^{n+1})`, radii
/// `r_n = β·ε_n·2^{(n+1)/2}` and the constant
/// `c2 = 1 + β Σ_{l≥1} 2^{(l+1)/2} exp(−2^{l+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingSchedule {
    pub r: f64,
    pub beta: f64,
    /// `ε_1, …, ε_{n_max}`.
    pub epsilons: Vec<f64>,
    /// `r_1, …, r_{n_max}`.
    pub radii: Vec<f64>,
    pub c2: f64,
}

impl ChainingSchedule {
    pub fn new(r: f64, beta: f64, n_max: usize) -> Result<Self, MetricError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(MetricError::NonPositive { name: "r", value: r });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(MetricError::NonPositive {
                name: "beta",
                value: beta,
            });
        }
        if n_max == 0 || n_max > MAX_LEVEL {
            return Err(MetricError::NonPositive {
                name: "n_max (1..=8)",
                value: n_max as f64,
            });
        }
        let epsilons: Vec<f64> = (1..=n_max).map(|n| r * (-(2f64.powi(n as i32 + 1))).exp()).collect();
        let radii = epsilons
            .iter()
            .enumerate()
            .map(|(i, e)| beta * e * 2f64.powf((i as f64 + 2.0) / 2.0))
            .collect();
        let mut sum = 0.0;
        for l in 1.. {
            let term = 2f64.powf((l as f64 + 1.0) / 2.0) * (-(2f64.powi(l + 1))).exp();
            if term < SERIES_FLOOR {
                break;
            }
            sum += term;
        }
        Ok(Self {
            r,
            beta,
            epsilons,
            radii,
            c2: 1.0 + beta * sum,
        })
    }
}

/// Partial sums of `Σ_{k=2}^{k_max} exp(Q·2^{k+1} − (β·2^{k/2} − L)² / (16 d (d+1)² c²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBound {
    pub partial_sum: f64,
    /// Running sums for k = 2..=k_max.
    pub partial_sums: Vec<f64>,
    /// `β² / (16 d (d+1)² c²) > 2Q` and `β > L/2`.
    pub converges: bool,
    /// Some term exceeded the double range; the sum is reported as infinite.
    pub overflowed: bool,
    /// `√(32 Q d (d+1)² c²)`, the exact flip point of `converges` when `L = 0`.
    pub threshold_beta: f64,
}

pub fn chaining_series_bound(
    beta: f64,
    lipschitz: f64,
    c: f64,
    d: u32,
    q: f64,
    k_max: u32,
) -> Result<SeriesBound, MetricError> {
    for (name, value) in [("beta", beta), ("c", c), ("Q", q), ("d", d as f64)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(MetricError::NonPositive { name, value });
        }
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(MetricError::NonPositive {
            name: "L",
            value: lipschitz,
        });
    }
    let d = d as f64;
    let denom = 16.0 * d * (d + 1.0).powi(2) * c * c;
    let converges = beta * beta / denom > 2.0 * q && beta > 0.5 * lipschitz;
    let mut partial_sum = 0.0;
    let mut partial_sums = Vec::new();
    let mut overflowed = false;
    for k in 2..=k_max.max(1) {
        if k < 2 {
            break;
        }
        let kf = k as f64;
        let gap = beta * 2f64.powf(kf / 2.0) - lipschitz;
        let exponent = q * 2f64.powf(kf + 1.0) - gap * gap / denom;
        let term = exponent.exp();
        if !term.is_finite() {
            overflowed = true;
            partial_sum = f64::INFINITY;
        } else {
            partial_sum += term;
        }
        partial_sums.push(partial_sum);
    }
    Ok(SeriesBound {
        partial_sum,
        partial_sums,
        converges,
        overflowed,
        threshold_beta: (2.0 * q * denom).sqrt(),
    })
}
