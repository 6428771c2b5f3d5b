use serde::{Deserialize, Serialize};

use super::{AxisBox, HurstVector, IndexSet, MetricError};

/// Regular lattice of ball centers covering one box of the index set.
///
/// Centers sit at `origin_j + k_j * step_j` for `k_j < counts_j`, the
/// midpoints of the pieces obtained by cutting the box orthogonally to each
/// axis into slabs of width at most `(r/N)^{1/H_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeBlock {
    pub domain: AxisBox,
    pub origin: Vec<f64>,
    pub step: Vec<f64>,
    pub counts: Vec<u64>,
}

impl LatticeBlock {
    pub fn count(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).product()
    }

    fn center(&self, idx: &[u64]) -> Vec<f64> {
        idx.iter()
            .zip(self.origin.iter().zip(&self.step))
            .map(|(&k, (o, s))| o + k as f64 * s)
            .collect()
    }

    /// ρ-distance from `p` to the closest center of this block. ρ is a sum of
    /// per-axis terms, so the closest center lies in the cell containing `p`
    /// or an immediate neighbour.
    fn local_nearest(&self, p: &[f64], h: &HurstVector) -> f64 {
        let n = p.len();
        let base: Vec<i64> = (0..n)
            .map(|j| {
                let piece = self.step[j];
                let k = if piece > 0.0 {
                    ((p[j] - self.domain.lo[j]) / piece).floor() as i64
                } else {
                    0
                };
                k.clamp(0, self.counts[j] as i64 - 1)
            })
            .collect();
        let mut best = f64::INFINITY;
        let mut offset = vec![-1i64; n];
        'outer: loop {
            let idx: Option<Vec<u64>> = (0..n)
                .map(|j| {
                    let k = base[j] + offset[j];
                    (k >= 0 && k < self.counts[j] as i64).then_some(k as u64)
                })
                .collect();
            if let Some(idx) = idx {
                best = best.min(h.distance_unchecked(p, &self.center(&idx)));
            }
            for o in offset.iter_mut() {
                if *o < 1 {
                    *o += 1;
                    continue 'outer;
                }
                *o = -1;
            }
            break;
        }
        best
    }
}

/// Finite family of closed ρ-balls of a common radius, stored as lattices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallCover {
    pub radius: f64,
    pub hurst: HurstVector,
    pub blocks: Vec<LatticeBlock>,
    /// Constructive constant with `count() <= c8 * radius^{-Q}`.
    pub c8: f64,
}

/// Outcome of checking a cover on a finite test grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub test_points: usize,
    pub max_distance: f64,
    pub ok: bool,
}

impl BallCover {
    /// Total number of balls.
    pub fn count(&self) -> f64 {
        self.blocks.iter().map(LatticeBlock::count).sum()
    }

    /// Enumerates every center. Only sensible for small covers.
    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.blocks.iter().flat_map(|b| {
            let total = b.counts.iter().product::<u64>();
            (0..total).map(move |mut flat| {
                let idx: Vec<u64> = b
                    .counts
                    .iter()
                    .map(|&c| {
                        let k = flat % c;
                        flat /= c;
                        k
                    })
                    .collect();
                b.center(&idx)
            })
        })
    }

    /// Smallest ρ-distance from `p` to a center, using the lattice structure.
    pub fn nearest_center_distance(&self, p: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.local_nearest(p, &self.hurst))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks that every point of a regular test grid with about
    /// `points_per_box` points in each box lies within the cover radius of
    /// some center.
    pub fn verify(&self, set: &IndexSet, points_per_box: usize) -> CoverCheck {
        let mut max_distance: f64 = 0.0;
        let mut test_points = 0;
        for b in &set.boxes {
            for p in test_grid(b, points_per_box) {
                max_distance = max_distance.max(self.nearest_center_distance(&p));
                test_points += 1;
            }
        }
        CoverCheck {
            test_points,
            max_distance,
            ok: max_distance <= self.radius * (1.0 + 1e-12),
        }
    }
}

/// Regular grid with `ceil(points^{1/N})` nodes per axis, endpoints included.
pub(crate) fn test_grid(b: &AxisBox, points: usize) -> Vec<Vec<f64>> {
    let n = b.dim();
    let per_axis = ((points.max(1) as f64).powf(1.0 / n as f64).ceil() as usize).max(2);
    let axis: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..per_axis)
                .map(|i| b.lo[j] + b.side(j) * i as f64 / (per_axis - 1) as f64)
                .collect()
        })
        .collect();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut flat| {
            (0..n)
                .map(|j| {
                    let k = flat % per_axis;
                    flat /= per_axis;
                    axis[j][k]
                })
                .collect()
        })
        .collect()
}

/// Covers `I` by ρ-balls of radius `r`: each box is cut orthogonally to axis
/// `j` into slabs of width at most `(r/N)^{1/H_j}`, and every resulting piece
/// gets one ball centered at its midpoint.
///
/// The reported `c8` is `Σ_boxes ∏_j (L_j N^{1/H_j} + max(r,1)^{1/H_j})`,
/// which bounds the center count by `c8 r^{-Q}`.
pub fn grid_cover(set: &IndexSet, r: f64, h: &HurstVector) -> Result<BallCover, MetricError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(MetricError::NonPositive { name: "r", value: r });
    }
    h.check_dim(set.dim())?;
    let n = h.dim() as f64;
    let hs = h.as_slice();
    let mut blocks = Vec::with_capacity(set.boxes.len());
    let mut c8 = 0.0;
    for b in &set.boxes {
        let mut origin = Vec::with_capacity(hs.len());
        let mut step = Vec::with_capacity(hs.len());
        let mut counts = Vec::with_capacity(hs.len());
        let mut block_c8 = 1.0;
        for (j, &hj) in hs.iter().enumerate() {
            let width = (r / n).powf(1.0 / hj);
            let side = b.side(j);
            let k = ((side / width) * (1.0 - 1e-12)).ceil().max(1.0);
            let piece = side / k;
            counts.push(k as u64);
            step.push(piece);
            origin.push(b.lo[j] + 0.5 * piece);
            block_c8 *= side * n.powf(1.0 / hj) + r.max(1.0).powf(1.0 / hj);
        }
        c8 += block_c8;
        blocks.push(LatticeBlock {
            domain: b.clone(),
            origin,
            step,
            counts,
        });
    }
    Ok(BallCover {
        radius: r,
        hurst: h.clone(),
        blocks,
        c8,
    })
}

/// Upper bound `∏_j ((2 r N / ε)^{1/H_j} + 1)` on the number of ρ-balls of
/// radius `ε` needed to cover the bounding box of a ρ-ball of radius `r`.
pub fn covering_number_upper(r: f64, eps: f64, h: &HurstVector) -> Result<f64, MetricError> {
    if !(eps > 0.0 && eps <= r && r.is_finite()) {
        return Err(MetricError::BadCoverRadius { eps, r });
    }
    let n = h.dim() as f64;
    Ok(h.as_slice()
        .iter()
        .map(|hj| (2.0 * r * n / eps).powf(1.0 / hj) + 1.0)
        .product())
}

impl AxisBox {
    /// Smallest `R` such that the bounding box of `B_ρ(center, R)` contains this box.
    pub fn enclosing_rho_radius(&self, h: &HurstVector) -> f64 {
        h.as_slice()
            .iter()
            .enumerate()
            .map(|(j, hj)| (0.5 * self.side(j)).powf(*hj))
            .fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}
