//! Geometry of the anisotropic metric `ρ(s, t) = Σ_j |s_j − t_j|^{H_j}`.
//!
//! Distances, ρ-balls and their bounding boxes, grid covers of bounded index
//! sets, covering-number and chaining arithmetic, cover-based Hausdorff sums
//! and the closed-form entropy integral.

mod chaining;
mod cover;
mod entropy;
mod hausdorff;

pub use chaining::{chaining_series_bound, ChainingSchedule, SeriesBound};
pub use cover::{covering_number_upper, grid_cover, BallCover, CoverCheck, LatticeBlock};
pub use entropy::entropy_integral_closed_form;
pub use hausdorff::{hausdorff_premeasure, EuclideanBall};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("Hurst vector must be non-empty")]
    EmptyHurst,
    #[error("Hurst exponent H[{index}] = {value} is outside (0, 1]")]
    HurstOutOfRange { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("box is empty or unbounded: lo={lo:?} hi={hi:?}")]
    InvalidBox { lo: Vec<f64>, hi: Vec<f64> },
    #[error("index set has no boxes")]
    EmptyIndexSet,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("covering radius eps = {eps} must satisfy 0 < eps <= r = {r}")]
    BadCoverRadius { eps: f64, r: f64 },
    #[error("ball radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("entropy integral argument x = {0} is outside (0, 1]")]
    EntropyDomain(f64),
}

/// Per-axis Hurst exponents `H ∈ (0, 1]^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HurstVector(Vec<f64>);

impl HurstVector {
    pub fn new(h: Vec<f64>) -> Result<Self, MetricError> {
        if h.is_empty() {
            return Err(MetricError::EmptyHurst);
        }
        for (index, &value) in h.iter().enumerate() {
            if !(value > 0.0 && value <= 1.0) {
                return Err(MetricError::HurstOutOfRange { index, value });
            }
        }
        Ok(Self(h))
    }

    pub fn isotropic(n: usize, h: f64) -> Result<Self, MetricError> {
        Self::new(vec![h; n])
    }

    /// Index dimension `N`.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Anisotropy index `Q = Σ_j 1/H_j`; always `≥ N`, with equality iff every `H_j = 1`.
    pub fn anisotropy_index(&self) -> f64 {
        self.0.iter().map(|h| 1.0 / h).sum()
    }

    /// ρ-distance between two points of `ℝ^N`.
    pub fn distance(&self, s: &[f64], t: &[f64]) -> Result<f64, MetricError> {
        self.check_dim(s.len())?;
        self.check_dim(t.len())?;
        Ok(self.distance_unchecked(s, t))
    }

    pub(crate) fn distance_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        s.iter()
            .zip(t)
            .zip(&self.0)
            .map(|((a, b), h)| axis_term((a - b).abs(), *h))
            .sum()
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<(), MetricError> {
        if got != self.dim() {
            return Err(MetricError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

#[inline]
fn axis_term(delta: f64, h: f64) -> f64 {
    if h == 1.0 {
        delta
    } else if delta == 0.0 {
        0.0
    } else {
        delta.powf(h)
    }
}

impl TryFrom<Vec<f64>> for HurstVector {
    type Error = MetricError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<HurstVector> for Vec<f64> {
    fn from(h: HurstVector) -> Self {
        h.0
    }
}

/// `ρ(s, t)`; see [`HurstVector::distance`].
pub fn rho_distance(s: &[f64], t: &[f64], h: &HurstVector) -> Result<f64, MetricError> {
    h.distance(s, t)
}

/// `Q(H) = Σ 1/H_j`.
pub fn anisotropy_index(h: &HurstVector) -> f64 {
    h.anisotropy_index()
}

/// Closed axis-aligned box `∏ [lo_j, hi_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, MetricError> {
        let ok = !lo.is_empty()
            && lo.len() == hi.len()
            && lo
                .iter()
                .zip(&hi)
                .all(|(a, b)| a.is_finite() && b.is_finite() && a <= b);
        if !ok {
            return Err(MetricError::InvalidBox { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(n: usize) -> Self {
        Self {
            lo: vec![0.0; n],
            hi: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Intersection with another box, `None` when disjoint.
    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
            Some(AxisBox { lo, hi })
        } else {
            None
        }
    }
}

/// Finite union of closed boxes; the bounded index set `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub boxes: Vec<AxisBox>,
}

impl IndexSet {
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self, MetricError> {
        let first = boxes.first().ok_or(MetricError::EmptyIndexSet)?;
        let n = first.dim();
        for b in &boxes {
            if b.dim() != n {
                return Err(MetricError::DimensionMismatch {
                    expected: n,
                    got: b.dim(),
                });
            }
            AxisBox::new(b.lo.clone(), b.hi.clone())?;
        }
        Ok(Self { boxes })
    }

    pub fn single(b: AxisBox) -> Self {
        Self { boxes: vec![b] }
    }

    pub fn unit_cube(n: usize) -> Self {
        Self::single(AxisBox::unit(n))
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }
}

/// Axis-aligned box containing the closed ball `B_ρ(t, r)`:
/// `∏_j [t_j − r^{1/H_j}, t_j + r^{1/H_j}]`.
pub fn ball_bounding_box(t: &[f64], r: f64, h: &HurstVector) -> Result<AxisBox, MetricError> {
    h.check_dim(t.len())?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(MetricError::NonPositive { name: "r", value: r });
    }
    let half: Vec<f64> = h.as_slice().iter().map(|hj| r.powf(1.0 / hj)).collect();
    Ok(AxisBox {
        lo: t.iter().zip(&half).map(|(c, w)| c - w).collect(),
        hi: t.iter().zip(&half).map(|(c, w)| c + w).collect(),
    })
}
