use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FieldError, Grid, SamplePathSet};
use crate::metric::HurstVector;
use crate::stats::quantile;

/// Per-sample grid statistic
/// `M(ε) = max_{ρ(s,t) ≤ ε} ‖X(s) − X(t)‖ / (ε √log ε⁻¹)`.
///
/// Grid maxima are lower bounds of the continuum supremum; the grid's
/// ρ-resolution is reported with every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub eps: Vec<f64>,
    /// Number of admissible grid pairs per scale.
    pub pairs: Vec<usize>,
    /// `values[k][sample]`; `None` where the scale has no admissible pair or
    /// is below twice the grid's ρ-spacing.
    pub values: Vec<Vec<Option<f64>>>,
    pub rho_spacing: f64,
}

impl ModulusTable {
    /// Quantile of `M(eps[k])` across samples, `None` if the scale is missing.
    pub fn quantile(&self, k: usize, q: f64) -> Option<f64> {
        let v: Vec<f64> = self.values[k].iter().flatten().copied().collect();
        if v.len() != self.values[k].len() {
            return None;
        }
        quantile(&v, q)
    }

    pub fn is_missing(&self, k: usize) -> bool {
        self.values[k].iter().any(Option::is_none)
    }
}

pub fn modulus_statistic(
    paths: &SamplePathSet,
    grid: &Grid,
    h: &HurstVector,
    eps_list: &[f64],
) -> Result<ModulusTable, FieldError> {
    if let Some(&e) = eps_list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(FieldError::ModulusScale(e));
    }
    if grid.len() != paths.n_points {
        return Err(crate::metric::MetricError::DimensionMismatch {
            expected: paths.n_points,
            got: grid.len(),
        }
        .into());
    }
    let pts = grid.points();
    let rho_spacing = grid.min_rho_spacing(h);
    let eps_max = eps_list.iter().copied().fold(0.0, f64::max);
    // (i, j, ρ) for all pairs within the largest scale
    let mut close: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..pts.len() {
        for j in 0..i {
            let rho = h.distance(&pts[i], &pts[j])?;
            if rho > 0.0 && rho <= eps_max {
                close.push((i, j, rho));
            }
        }
    }
    let d = paths.dim;
    let mut pairs = Vec::with_capacity(eps_list.len());
    let mut values = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let admissible: Vec<(usize, usize)> = close
            .iter()
            .filter(|(_, _, r)| *r <= eps)
            .map(|(i, j, _)| (*i, *j))
            .collect();
        pairs.push(admissible.len());
        if admissible.is_empty() || eps < 2.0 * rho_spacing {
            values.push(vec![None; paths.n_samples]);
            continue;
        }
        let norm = eps * (-eps.ln()).sqrt();
        let col: Vec<Option<f64>> = (0..paths.n_samples)
            .into_par_iter()
            .map(|r| {
                let x = paths.path(r);
                let mut best: f64 = 0.0;
                for &(i, j) in &admissible {
                    let mut sq = 0.0;
                    for a in 0..d {
                        let diff = x[i * d + a] - x[j * d + a];
                        sq += diff * diff;
                    }
                    best = best.max(sq);
                }
                Some(best.sqrt() / norm)
            })
            .collect();
        values.push(col);
    }
    Ok(ModulusTable {
        eps: eps_list.to_vec(),
        pairs,
        values,
        rho_spacing,
    })
}
