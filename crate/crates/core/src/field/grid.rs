use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::FieldError;
use crate::metric::{AxisBox, HurstVector, IndexSet};
use crate::seed::sha256_hex;

/// Upper limit on lattice enumeration.
const MAX_LATTICE_POINTS: usize = 1_000_000;

/// Finite set of distinct index points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<Vec<f64>>,
    /// Per-axis lattice step, when the grid is a lattice.
    spacing: Option<Vec<f64>>,
}

impl Grid {
    /// Arbitrary points; duplicates are rejected.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self, FieldError> {
        let first = points.first().ok_or(FieldError::EmptyGrid)?;
        let n = first.len();
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if p.len() != n {
                return Err(crate::metric::MetricError::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                }
                .into());
            }
            let key: Vec<u64> = p.iter().map(|x| (x + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(FieldError::DuplicatePoint(p.clone()));
            }
        }
        Ok(Self { points, spacing: None })
    }

    /// Lattice `lo + k·step` inside a single box.
    pub fn regular(b: &AxisBox, step: &[f64]) -> Result<Self, FieldError> {
        Self::lattice(&IndexSet::single(b.clone()), step, None)
    }

    /// Lattice points `origin + k·step` lying in `set` (and in `window`, when
    /// given). The origin is the componentwise minimum corner of `set`, so two
    /// lattices built over the same set with the same step share coordinates
    /// bit for bit.
    pub fn lattice(set: &IndexSet, step: &[f64], window: Option<&AxisBox>) -> Result<Self, FieldError> {
        let n = set.dim();
        if step.len() != n {
            return Err(crate::metric::MetricError::DimensionMismatch {
                expected: n,
                got: step.len(),
            }
            .into());
        }
        if let Some(&s) = step.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(FieldError::BadStep(s));
        }
        let origin: Vec<f64> = (0..n)
            .map(|j| set.boxes.iter().map(|b| b.lo[j]).fold(f64::INFINITY, f64::min))
            .collect();
        let upper: Vec<f64> = (0..n)
            .map(|j| set.boxes.iter().map(|b| b.hi[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let (lo, hi) = match window {
            Some(w) => (
                origin.iter().zip(&w.lo).map(|(a, b)| a.max(*b)).collect::<Vec<_>>(),
                upper.iter().zip(&w.hi).map(|(a, b)| a.min(*b)).collect::<Vec<_>>(),
            ),
            None => (origin.clone(), upper.clone()),
        };
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(FieldError::EmptyGrid);
        }
        let k_range: Vec<(i64, i64)> = (0..n)
            .map(|j| {
                let k0 = ((lo[j] - origin[j]) / step[j] - 1e-9).ceil() as i64;
                let k1 = ((hi[j] - origin[j]) / step[j] + 1e-9).floor() as i64;
                (k0.max(0), k1)
            })
            .collect();
        let total: usize = k_range
            .iter()
            .map(|(a, b)| (b - a + 1).max(0) as usize)
            .try_fold(1usize, |acc, c| acc.checked_mul(c))
            .unwrap_or(usize::MAX);
        if total > MAX_LATTICE_POINTS {
            return Err(FieldError::GridTooLarge(total, MAX_LATTICE_POINTS));
        }
        let mut points = Vec::new();
        let mut idx: Vec<i64> = k_range.iter().map(|r| r.0).collect();
        if total > 0 {
            'outer: loop {
                let p: Vec<f64> = (0..n).map(|j| origin[j] + idx[j] as f64 * step[j]).collect();
                let in_window = window.is_none_or(|w| within(w, &p));
                if in_window && set.boxes.iter().any(|b| within(b, &p)) {
                    points.push(p);
                }
                for j in 0..n {
                    if idx[j] < k_range[j].1 {
                        idx[j] += 1;
                        continue 'outer;
                    }
                    idx[j] = k_range[j].0;
                }
                break;
            }
        }
        if points.is_empty() {
            return Err(FieldError::EmptyGrid);
        }
        Ok(Self {
            points,
            spacing: Some(step.to_vec()),
        })
    }

    /// `n` equally spaced points on `[a, b]` (endpoints included).
    pub fn uniform_1d(a: f64, b: f64, n: usize) -> Result<Self, FieldError> {
        if n < 2 || a.is_nan() || b.is_nan() || b <= a {
            return Err(FieldError::TooFewPoints { need: 2, have: n });
        }
        let step = (b - a) / (n - 1) as f64;
        let points = (0..n).map(|i| vec![a + step * i as f64]).collect();
        Ok(Self {
            points,
            spacing: Some(vec![step]),
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn spacing(&self) -> Option<&[f64]> {
        self.spacing.as_deref()
    }

    /// Smallest positive ρ-distance between grid points.
    pub fn min_rho_spacing(&self, h: &HurstVector) -> f64 {
        if let Some(step) = &self.spacing {
            return step
                .iter()
                .zip(h.as_slice())
                .map(|(s, hj)| s.powf(*hj))
                .fold(f64::INFINITY, f64::min);
        }
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in 0..i {
                let d = h.distance_unchecked(&self.points[i], &self.points[j]);
                if d > 0.0 {
                    best = best.min(d);
                }
            }
        }
        best
    }

    /// SHA-256 of the little-endian coordinate bytes.
    pub fn hash(&self) -> String {
        let mut bytes = Vec::with_capacity(self.points.len() * self.dim() * 8);
        for p in &self.points {
            for x in p {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        sha256_hex(&bytes)
    }
}

fn within(b: &AxisBox, p: &[f64]) -> bool {
    p.iter()
        .zip(b.lo.iter().zip(&b.hi))
        .all(|(x, (lo, hi))| *x >= lo - 1e-12 && *x <= hi + 1e-12)
}
