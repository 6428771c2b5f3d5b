use serde::{Deserialize, Serialize};

use super::MetricError;

/// Closed Euclidean ball in `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl EuclideanBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.distance_to_center(p) <= self.radius
    }

    pub fn distance_to_center(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cover sum `Σ_l (2 r_l)^α`, an upper bound for the α-dimensional Hausdorff
/// premeasure of any set the balls cover.
pub fn hausdorff_premeasure(cover: &[EuclideanBall], alpha: f64) -> Result<f64, MetricError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(MetricError::NonPositive {
            name: "alpha",
            value: alpha,
        });
    }
    cover
        .iter()
        .map(|b| {
            if b.radius < 0.0 || b.radius.is_nan() {
                Err(MetricError::NegativeRadius(b.radius))
            } else {
                Ok((2.0 * b.radius).powf(alpha))
            }
        })
        .sum()
}
