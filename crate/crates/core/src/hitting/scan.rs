use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{scaling_exponent, HittingError, HittingEstimate, LipschitzDrift, ScalingReport};
use crate::field::{FieldError, FieldModel, FieldSampler, Grid};
use crate::metric::{ball_bounding_box, EuclideanBall, HurstVector, IndexSet};
use crate::stats::quantile;

/// Smallest number of distinct lattice coordinates per axis inside a ball.
pub const MIN_POINTS_PER_AXIS: usize = 8;

/// Replicates feeding the empirical modulus constant.
const MODULUS_REPLICATES: usize = 200;

/// Monte Carlo settings shared by the scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McOptions {
    pub n_mc: usize,
    pub seed: u64,
    /// Lattice step, the same on every axis.
    pub grid_step: f64,
    /// Constant `c̃` of the margin `m(h) = c̃ h^{H_min} √log(1/h)`; estimated
    /// from the draws themselves when absent.
    #[serde(default)]
    pub modulus_constant: Option<f64>,
}

impl McOptions {
    pub fn new(n_mc: usize, seed: u64, grid_step: f64) -> Self {
        Self {
            n_mc,
            seed,
            grid_step,
            modulus_constant: None,
        }
    }

    fn check(&self) -> Result<(), HittingError> {
        if self.n_mc == 0 {
            return Err(HittingError::ZeroReplicates);
        }
        if !(self.grid_step > 0.0 && self.grid_step < 1.0) {
            return Err(HittingError::BadStep(self.grid_step));
        }
        Ok(())
    }
}

/// Scan over decreasing radii with the per-replicate statistics behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingScan {
    pub report: ScalingReport,
    /// Exponent the slope is compared with.
    pub reference_exponent: f64,
    pub modulus_constant: Option<f64>,
    pub margin: Option<f64>,
    /// `distance[replicate][k]`: distance from the path to the target at
    /// radius `k`; a hit is `distance ≤ radii[k]`.
    #[serde(skip)]
    pub distance: Vec<Vec<f64>>,
}

impl HittingScan {
    pub fn hit(&self, replicate: usize, k: usize) -> bool {
        self.distance[replicate][k] <= self.report.radii[k]
    }

    /// Whether every replicate that hits at a radius also hits at all larger radii.
    pub fn hits_are_nested(&self) -> bool {
        let k = self.report.radii.len();
        (0..self.distance.len()).all(|rep| (1..k).all(|j| !self.hit(rep, j) || self.hit(rep, j - 1)))
    }
}

struct Runner {
    sampler: FieldSampler,
    points: Vec<Vec<f64>>,
    hurst: HurstVector,
    dim: usize,
    drift: LipschitzDrift,
    fixed_drift: Option<Vec<f64>>,
    /// Pairs within `eps0` for the modulus statistic.
    pairs: Vec<(usize, usize)>,
    eps0: f64,
    opts: McOptions,
}

impl Runner {
    fn new(
        model: &FieldModel,
        points: Vec<Vec<f64>>,
        rho_spacing: f64,
        drift: &LipschitzDrift,
        opts: McOptions,
    ) -> Result<Self, HittingError> {
        let h = model.hurst.clone();
        drift.validate(model.dim(), h.dim())?;
        let fixed_drift = if drift.is_random() {
            None
        } else {
            Some(drift.realize(&points, &h, model.dim(), opts.seed, 0)?)
        };
        let eps0 = 2.0 * rho_spacing;
        let mut pairs = Vec::new();
        if opts.modulus_constant.is_none() && eps0 < 1.0 {
            for i in 0..points.len() {
                for j in 0..i {
                    let rho = h.distance_unchecked(&points[i], &points[j]);
                    if rho > 0.0 && rho <= eps0 {
                        pairs.push((i, j));
                    }
                }
            }
        }
        let sampler = FieldSampler::new(model, &points)?;
        Ok(Self {
            sampler,
            points,
            hurst: h,
            dim: model.dim(),
            drift: drift.clone(),
            fixed_drift,
            pairs,
            eps0,
            opts,
        })
    }

    /// Evaluates `stat(X + sign·f)` for every replicate; also returns the
    /// empirical modulus statistic of `X` on the first replicates.
    fn run<T, F>(&self, sign: f64, stat: F) -> Result<(Vec<T>, Vec<f64>), HittingError>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        let d = self.dim;
        let norm = self.eps0 * (-self.eps0.ln()).sqrt();
        let out = self.sampler.map_replicates(self.opts.seed, self.opts.n_mc, |rep, x| {
            let modulus = if rep < MODULUS_REPLICATES && !self.pairs.is_empty() {
                let mut best: f64 = 0.0;
                for &(i, j) in &self.pairs {
                    let sq: f64 = (0..d).map(|a| (x[i * d + a] - x[j * d + a]).powi(2)).sum();
                    best = best.max(sq);
                }
                Some(best.sqrt() / norm)
            } else {
                None
            };
            let random;
            let f = match &self.fixed_drift {
                Some(v) => v,
                None => {
                    random = self
                        .drift
                        .realize(&self.points, &self.hurst, d, self.opts.seed, rep as u64)?;
                    &random
                }
            };
            let z: Vec<f64> = x.iter().zip(f).map(|(a, b)| a + sign * b).collect();
            Ok::<_, HittingError>((stat(&z), modulus))
        });
        let mut stats = Vec::with_capacity(out.len());
        let mut moduli = Vec::new();
        for r in out {
            let (s, m) = r?;
            stats.push(s);
            moduli.extend(m);
        }
        Ok((stats, moduli))
    }

    /// `(c̃, m(h))`, or `None` when the margin is undefined at this resolution.
    fn margin(&self, moduli: &[f64]) -> Option<(f64, f64)> {
        let c = match self.opts.modulus_constant {
            Some(c) => c,
            None => quantile(moduli, 0.95)?,
        };
        let h = self.opts.grid_step;
        Some((c, c * h.powf(self.hurst.min()) * (-h.ln()).sqrt()))
    }
}

fn check_radii(radii: &[f64]) -> Result<(), HittingError> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || radii.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(HittingError::BadRadii);
    }
    Ok(())
}

/// Fewest distinct lattice coordinates over the axes, and the axis attaining it.
fn points_per_axis(points: &[&Vec<f64>], step: f64) -> (usize, usize) {
    let n = points.first().map_or(0, |p| p.len());
    (0..n)
        .map(|j| {
            let distinct: HashSet<i64> = points.iter().map(|p| (p[j] / step).round() as i64).collect();
            (distinct.len(), j)
        })
        .min()
        .unwrap_or((0, 0))
}

fn estimates_from(
    distance: &[Vec<f64>],
    radii: &[f64],
    margin: Option<f64>,
    grid_points: &[usize],
    opts: &McOptions,
) -> Vec<HittingEstimate> {
    radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let hits = distance.iter().filter(|d| d[k] <= r).count() as u64;
            let e = HittingEstimate::from_counts(r, hits, opts.n_mc as u64, grid_points[k], opts.grid_step, opts.seed);
            match margin {
                Some(m) => {
                    let mh = distance.iter().filter(|d| d[k] <= r + m).count() as u64;
                    e.with_margin(m, mh)
                }
                None => e,
            }
        })
        .collect()
}

/// Hitting probabilities `P(min_{s ∈ B_ρ(t,r) ∩ I} ‖X(s) − f(s)‖ ≤ r)` for
/// strictly decreasing radii, with the field drawn once per replicate on the
/// lattice points of the largest ball and reused for every radius.
pub fn hitting_scan(
    model: &FieldModel,
    set: &IndexSet,
    t: &[f64],
    radii: &[f64],
    drift: &LipschitzDrift,
    opts: McOptions,
) -> Result<HittingScan, HittingError> {
    opts.check()?;
    check_radii(radii)?;
    let h = &model.hurst;
    h.check_dim(t.len())?;
    h.check_dim(set.dim())?;
    let n = h.dim();
    let step = vec![opts.grid_step; n];
    let bbox = ball_bounding_box(t, radii[0], h)?;
    let lattice = match Grid::lattice(set, &step, Some(&bbox)) {
        Err(FieldError::EmptyGrid) => return Err(HittingError::EmptyBall(radii[0])),
        other => other?,
    };
    let rho_spacing = lattice.min_rho_spacing(h);
    let mut ranked: Vec<(f64, &Vec<f64>)> = lattice
        .points()
        .iter()
        .map(|p| (h.distance_unchecked(t, p), p))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut counts = Vec::with_capacity(radii.len());
    for &r in radii {
        let inside = ranked.partition_point(|(rho, _)| *rho <= r * (1.0 + 1e-12));
        if inside == 0 {
            return Err(HittingError::EmptyBall(r));
        }
        let pts: Vec<&Vec<f64>> = ranked[..inside].iter().map(|(_, p)| *p).collect();
        let (have, axis) = points_per_axis(&pts, opts.grid_step);
        if have < MIN_POINTS_PER_AXIS {
            return Err(HittingError::UnderResolved {
                radius: r,
                axis,
                points: have,
                need: MIN_POINTS_PER_AXIS,
            });
        }
        counts.push(inside);
    }
    let points: Vec<Vec<f64>> = ranked[..counts[0]].iter().map(|(_, p)| (*p).clone()).collect();
    let runner = Runner::new(model, points, rho_spacing, drift, opts)?;
    let d = model.dim();
    let (distance, moduli) = runner.run(-1.0, |z| {
        // running minimum over points ordered by distance from t
        let mut out = vec![f64::INFINITY; counts.len()];
        let mut best = f64::INFINITY;
        let mut k = counts.len();
        for i in 0..counts[0] {
            let norm = z[i * d..(i + 1) * d].iter().map(|v| v * v).sum::<f64>().sqrt();
            best = best.min(norm);
            while k > 0 && counts[k - 1] == i + 1 {
                out[k - 1] = best;
                k -= 1;
            }
        }
        out
    })?;
    let margin = runner.margin(&moduli);
    let estimates = estimates_from(&distance, radii, margin.map(|m| m.1), &counts, &opts);
    Ok(HittingScan {
        report: scaling_exponent(&estimates)?,
        reference_exponent: d as f64,
        modulus_constant: margin.map(|m| m.0),
        margin: margin.map(|m| m.1),
        distance,
    })
}

/// Single-radius version of [`hitting_scan`].
pub fn hitting_probability(
    model: &FieldModel,
    set: &IndexSet,
    t: &[f64],
    r: f64,
    drift: &LipschitzDrift,
    opts: McOptions,
) -> Result<HittingEstimate, HittingError> {
    let scan = hitting_scan(model, set, t, &[r], drift, opts)?;
    Ok(scan.report.estimates[0].clone())
}

fn full_lattice(model: &FieldModel, set: &IndexSet, opts: &McOptions) -> Result<Grid, HittingError> {
    let h = &model.hurst;
    h.check_dim(set.dim())?;
    let grid = Grid::lattice(set, &vec![opts.grid_step; h.dim()], None)?;
    let pts: Vec<&Vec<f64>> = grid.points().iter().collect();
    let (have, axis) = points_per_axis(&pts, opts.grid_step);
    if have < MIN_POINTS_PER_AXIS {
        return Err(HittingError::UnderResolved {
            radius: f64::INFINITY,
            axis,
            points: have,
            need: MIN_POINTS_PER_AXIS,
        });
    }
    Ok(grid)
}

/// `P(∃ s ∈ I : X(s) + Y(s) ∈ B(center, δ))` on the lattice of `I`, for
/// strictly decreasing `deltas`. Refused unless `Q < d`.
pub fn polarity_scan(
    model: &FieldModel,
    set: &IndexSet,
    drift: &LipschitzDrift,
    center: &[f64],
    deltas: &[f64],
    opts: McOptions,
) -> Result<HittingScan, HittingError> {
    let q = model.hurst.anisotropy_index();
    let d = model.dim();
    if q >= d as f64 {
        return Err(HittingError::QNotBelowD { q, d });
    }
    opts.check()?;
    check_radii(deltas)?;
    if center.len() != d {
        return Err(crate::metric::MetricError::DimensionMismatch {
            expected: d,
            got: center.len(),
        }
        .into());
    }
    let grid = full_lattice(model, set, &opts)?;
    let rho_spacing = grid.min_rho_spacing(&model.hurst);
    let g = grid.len();
    let runner = Runner::new(model, grid.points().to_vec(), rho_spacing, drift, opts)?;
    let (distance, moduli) = runner.run(1.0, |z| {
        let best = (0..g)
            .map(|i| (0..d).map(|a| (z[i * d + a] - center[a]).powi(2)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        vec![best; deltas.len()]
    })?;
    let margin = runner.margin(&moduli);
    let estimates = estimates_from(&distance, deltas, margin.map(|m| m.1), &vec![g; deltas.len()], &opts);
    Ok(HittingScan {
        report: scaling_exponent(&estimates)?,
        reference_exponent: d as f64 - q,
        modulus_constant: margin.map(|m| m.0),
        margin: margin.map(|m| m.1),
        distance,
    })
}

/// `P(∃ s ∈ I : X(s) + Y(s) ∈ ∪ targets)`; exactly 0 for an empty target list.
/// The estimate's `r` is the largest target radius.
pub fn target_hitting_probability(
    model: &FieldModel,
    set: &IndexSet,
    drift: &LipschitzDrift,
    targets: &[EuclideanBall],
    opts: McOptions,
) -> Result<HittingEstimate, HittingError> {
    opts.check()?;
    let d = model.dim();
    if let Some(b) = targets.iter().find(|b| b.center.len() != d) {
        return Err(crate::metric::MetricError::DimensionMismatch {
            expected: d,
            got: b.center.len(),
        }
        .into());
    }
    if targets.iter().any(|b| !(b.radius >= 0.0 && b.radius.is_finite())) {
        return Err(HittingError::BadRadii);
    }
    let grid = full_lattice(model, set, &opts)?;
    let g = grid.len();
    let r = targets.iter().map(|b| b.radius).fold(0.0, f64::max);
    if targets.is_empty() {
        return Ok(HittingEstimate::from_counts(
            0.0,
            0,
            opts.n_mc as u64,
            g,
            opts.grid_step,
            opts.seed,
        ));
    }
    let runner = Runner::new(
        model,
        grid.points().to_vec(),
        grid.min_rho_spacing(&model.hurst),
        drift,
        opts,
    )?;
    // signed gap: ≤ 0 on a hit
    let (gaps, moduli) = runner.run(1.0, |z| {
        let mut best = f64::INFINITY;
        for i in 0..g {
            let p = &z[i * d..(i + 1) * d];
            for b in targets {
                best = best.min(b.distance_to_center(p) - b.radius);
            }
        }
        best
    })?;
    let hits = gaps.iter().filter(|x| **x <= 0.0).count() as u64;
    let e = HittingEstimate::from_counts(r, hits, opts.n_mc as u64, g, opts.grid_step, opts.seed);
    Ok(match runner.margin(&moduli) {
        Some((_, m)) => {
            let mh = gaps.iter().filter(|x| **x <= m).count() as u64;
            e.with_margin(m, mh)
        }
        None => e,
    })
}
