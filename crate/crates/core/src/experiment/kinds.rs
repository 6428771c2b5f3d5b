//! Per-kind parameter schemas and runners.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::table::Table;
use super::ExperimentError;
use crate::calibration::{
    holder_bound_check, lambda_min_on_iv, psi_batch, psi_from_noise, FrequencyGrid, LogOptions, NoiseLevel,
    OptionModel, OptionShape,
};
use crate::field::{
    modulus_statistic, verify_condition1, verify_condition2, FieldModel, FieldSampler, Grid, SamplePathSet,
};
use crate::hitting::{hitting_scan, polarity_scan, HittingScan, LipschitzDrift, McOptions, SLOPE_TOLERANCE};
use crate::metric::{
    chaining_series_bound, covering_number_upper, entropy_integral_closed_form, grid_cover, AxisBox, ChainingSchedule,
    HurstVector, IndexSet, MetricError,
};
use crate::quad::{integrate, QuadOptions};
use crate::seed::{DRIFT_STREAM, FIELD_STREAM, NOISE_STREAM};

/// Closed box `∏ [lo_j, hi_j]` as written in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    fn to_box(&self) -> Result<AxisBox, MetricError> {
        AxisBox::new(self.lo.clone(), self.hi.clone())
    }
}

/// The unit cube of dimension `n` when no boxes are given.
fn index_set(boxes: &Option<Vec<BoxSpec>>, n: usize) -> Result<IndexSet, MetricError> {
    match boxes {
        None => Ok(IndexSet::unit_cube(n)),
        Some(b) => IndexSet::new(b.iter().map(BoxSpec::to_box).collect::<Result<_, _>>()?),
    }
}

pub(crate) struct Ctx<'a> {
    pub seed: u64,
    pub digest: &'a str,
}

pub(crate) struct KindOutput {
    pub table: Table,
    pub report: Value,
    /// Random streams consumed, with their replicate counts.
    pub streams: Vec<(&'static str, usize)>,
}

fn default_mixing() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![1.0, 1.0]]
}

// ---------------------------------------------------------------- metric-check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricCheckParams {
    pub hurst: Vec<f64>,
    pub index_set: Option<Vec<BoxSpec>>,
    pub radii: Vec<f64>,
    /// Test points per box for the cover check.
    pub test_points: usize,
    pub entropy_x: Vec<f64>,
}

impl Default for MetricCheckParams {
    fn default() -> Self {
        Self {
            hurst: vec![0.75, 0.75],
            index_set: None,
            radii: (1..=6).map(|k| 0.5f64.powi(k)).collect(),
            test_points: 10_000,
            entropy_x: vec![0.01, 0.05, 0.1, 0.25, 0.45, 0.9, 1.0],
        }
    }
}

impl MetricCheckParams {
    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let h = HurstVector::new(self.hurst.clone())?;
        let set = index_set(&self.index_set, h.dim())?;
        let q = h.anisotropy_index();
        let mut table = Table::new(&[
            "r",
            "cover_count",
            "covering_upper",
            "c8",
            "c8_bound",
            "within_upper",
            "within_c8_bound",
            "test_points",
            "max_distance",
            "valid",
            "config_digest",
        ]);
        let mut all_ok = true;
        for &r in &self.radii {
            let cover = grid_cover(&set, r, &h)?;
            let check = cover.verify(&set, self.test_points);
            // ε-balls with ε ≤ R also cover when r exceeds a box's enclosing radius R
            let mut upper = 0.0;
            for b in &set.boxes {
                let big = b.enclosing_rho_radius(&h);
                upper += if big > 0.0 {
                    covering_number_upper(big, r.min(big), &h)?
                } else {
                    1.0
                };
            }
            let count = cover.count();
            let c8_bound = cover.c8 * r.powf(-q);
            let within_upper = count <= upper;
            let within_c8 = count <= c8_bound;
            all_ok &= within_upper && within_c8 && check.ok;
            table.push(vec![
                r.into(),
                count.into(),
                upper.into(),
                cover.c8.into(),
                c8_bound.into(),
                within_upper.into(),
                within_c8.into(),
                check.test_points.into(),
                check.max_distance.into(),
                check.ok.into(),
                ctx.digest.into(),
            ]);
        }
        let opts = QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 0.0,
            max_intervals: 20_000,
        };
        let mut entropy = Vec::new();
        let mut max_diff: f64 = 0.0;
        for &x in &self.entropy_x {
            let cf = entropy_integral_closed_form(x)?;
            let quad = integrate(|y: f64| (-y.ln()).max(0.0).sqrt(), 0.0, x, opts);
            let diff = (cf - quad.value).abs();
            max_diff = max_diff.max(diff);
            entropy.push(json!({
                "x": x,
                "closed_form": cf,
                "quadrature": quad.value,
                "quadrature_error": quad.error,
                "converged": quad.converged,
                "abs_diff": diff,
            }));
        }
        Ok(KindOutput {
            table,
            report: json!({
                "hurst": self.hurst,
                "q": q,
                "all_covers_ok": all_ok,
                "entropy": entropy,
                "entropy_max_abs_diff": max_diff,
                "entropy_at_one_reference": 0.5 * std::f64::consts::PI.sqrt(),
            }),
            streams: vec![],
        })
    }
}

// ---------------------------------------------------------------- field-sim

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSimParams {
    pub hurst: Vec<f64>,
    pub mixing: Vec<Vec<f64>>,
    /// Explicit sample points; `n_points` points on the diagonal of the unit cube otherwise.
    pub points: Option<Vec<Vec<f64>>>,
    pub n_points: usize,
    pub n_samples: usize,
}

impl Default for FieldSimParams {
    fn default() -> Self {
        Self {
            hurst: vec![0.5],
            mixing: default_mixing(),
            points: None,
            n_points: 10,
            n_samples: 20_000,
        }
    }
}

impl FieldSimParams {
    fn grid(&self, n: usize) -> Result<Grid, ExperimentError> {
        let pts = match &self.points {
            Some(p) => p.clone(),
            None => {
                let k = self.n_points;
                (0..k)
                    .map(|i| vec![if k > 1 { i as f64 / (k - 1) as f64 } else { 0.0 }; n])
                    .collect()
            }
        };
        Ok(Grid::from_points(pts)?)
    }

    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let h = HurstVector::new(self.hurst.clone())?;
        let model = FieldModel::new(h, self.mixing.clone())?;
        let grid = self.grid(model.index_dim())?;
        if self.n_samples == 0 {
            return Err(ExperimentError::Schema("field-sim: n_samples must be positive".into()));
        }
        let c1 = verify_condition1(&model, &grid)?;
        let c2 = verify_condition2(&model)?;
        let sampler = FieldSampler::new(&model, grid.points())?;
        let paths = sampler.map_replicates(ctx.seed, self.n_samples, |_, v| v.to_vec());
        let d = model.dim();
        let m = grid.len() * d;
        // second moments, accumulated in replicate order
        let mut sums = vec![0.0; m * m];
        for v in &paths {
            for i in 0..m {
                for j in i..m {
                    sums[i * m + j] += v[i] * v[j];
                }
            }
        }
        let n = self.n_samples as f64;
        let aat = model.pointwise_covariance();
        let pts = grid.points();
        let analytic = |i: usize, j: usize| model.kernel(&pts[i / d], &pts[j / d]) * aat[(i % d, j % d)];
        let mut table = Table::new(&[
            "point_i",
            "component_a",
            "point_j",
            "component_b",
            "analytic",
            "empirical",
            "se",
            "z",
            "seed",
            "config_digest",
        ]);
        let mut max_z: f64 = 0.0;
        for i in 0..m {
            for j in i..m {
                let c = analytic(i, j);
                let emp = sums[i * m + j] / n;
                // Var(XY) = C_xx C_yy + C_xy² for centred Gaussians
                let se = ((analytic(i, i) * analytic(j, j) + c * c) / n).sqrt();
                let z = if se > 0.0 { (emp - c) / se } else { 0.0 };
                max_z = max_z.max(z.abs());
                table.push(vec![
                    (i / d).into(),
                    (i % d).into(),
                    (j / d).into(),
                    (j % d).into(),
                    c.into(),
                    emp.into(),
                    se.into(),
                    z.into(),
                    ctx.seed.into(),
                    ctx.digest.into(),
                ]);
            }
        }
        Ok(KindOutput {
            table,
            report: json!({
                "grid_hash": grid.hash(),
                "n_points": grid.len(),
                "n_samples": self.n_samples,
                "jitter": sampler.jitter(),
                "condition1": c1,
                "condition2_lambda_min": c2,
                "max_abs_z": max_z,
                "within_5_se": max_z <= 5.0,
            }),
            streams: vec![(FIELD_STREAM, self.n_samples)],
        })
    }
}

// ---------------------------------------------------------------- hitting-scan / polarity-scan

fn default_radii() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HittingScanParams {
    pub hurst: Vec<f64>,
    pub mixing: Vec<Vec<f64>>,
    pub index_set: Option<Vec<BoxSpec>>,
    /// Center of the ρ-balls.
    pub t: Vec<f64>,
    pub radii: Vec<f64>,
    pub drift: LipschitzDrift,
    pub n_mc: usize,
    pub grid_step: f64,
    pub modulus_constant: Option<f64>,
}

impl Default for HittingScanParams {
    fn default() -> Self {
        Self {
            hurst: vec![0.75],
            mixing: default_mixing(),
            index_set: None,
            t: vec![0.5],
            radii: default_radii(),
            drift: LipschitzDrift::Zero {},
            n_mc: 10_000,
            grid_step: 1e-3,
            modulus_constant: None,
        }
    }
}

impl HittingScanParams {
    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let model = FieldModel::new(HurstVector::new(self.hurst.clone())?, self.mixing.clone())?;
        let set = index_set(&self.index_set, model.index_dim())?;
        let opts = McOptions {
            n_mc: self.n_mc,
            seed: ctx.seed,
            grid_step: self.grid_step,
            modulus_constant: self.modulus_constant,
        };
        let scan = hitting_scan(&model, &set, &self.t, &self.radii, &self.drift, opts)?;
        Ok(scan_output(&scan, "r", &self.drift, ctx))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarityScanParams {
    pub hurst: Vec<f64>,
    pub mixing: Vec<Vec<f64>>,
    pub index_set: Option<Vec<BoxSpec>>,
    /// Center of the target balls in the state space.
    pub center: Vec<f64>,
    pub deltas: Vec<f64>,
    pub drift: LipschitzDrift,
    pub n_mc: usize,
    pub grid_step: f64,
    pub modulus_constant: Option<f64>,
}

impl Default for PolarityScanParams {
    fn default() -> Self {
        Self {
            hurst: vec![0.75],
            mixing: default_mixing(),
            index_set: None,
            center: vec![0.0, 0.0],
            deltas: default_radii(),
            drift: LipschitzDrift::Zero {},
            n_mc: 10_000,
            grid_step: 1e-3,
            modulus_constant: None,
        }
    }
}

impl PolarityScanParams {
    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let model = FieldModel::new(HurstVector::new(self.hurst.clone())?, self.mixing.clone())?;
        let set = index_set(&self.index_set, model.index_dim())?;
        let opts = McOptions {
            n_mc: self.n_mc,
            seed: ctx.seed,
            grid_step: self.grid_step,
            modulus_constant: self.modulus_constant,
        };
        let scan = polarity_scan(&model, &set, &self.drift, &self.center, &self.deltas, opts)?;
        Ok(scan_output(&scan, "delta", &self.drift, ctx))
    }
}

fn scan_output(scan: &HittingScan, radius: &str, drift: &LipschitzDrift, ctx: &Ctx) -> KindOutput {
    let mut table = Table::new(&[
        radius,
        "n_mc",
        "hits",
        "p_hat",
        "ci_low",
        "ci_high",
        "margin",
        "margin_hits",
        "margin_p_hat",
        "margin_ci_low",
        "margin_ci_high",
        "grid_points",
        "grid_step",
        "seed",
        "config_digest",
    ]);
    for e in &scan.report.estimates {
        let m = e.margin;
        table.push(vec![
            e.r.into(),
            e.n_mc.into(),
            e.hits.into(),
            e.p_hat.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            m.map(|m| m.margin).into(),
            m.map(|m| m.hits).into(),
            m.map(|m| m.p_hat).into(),
            m.map(|m| m.ci_low).into(),
            m.map(|m| m.ci_high).into(),
            e.grid_points.into(),
            e.grid_step.into(),
            e.seed.into(),
            ctx.digest.into(),
        ]);
    }
    let r = &scan.report;
    let n = r.estimates.first().map_or(0, |e| e.n_mc as usize);
    let mut streams = vec![(FIELD_STREAM, n)];
    if drift.is_random() {
        streams.push((DRIFT_STREAM, n));
    }
    KindOutput {
        table,
        report: json!({
            "status": r.status,
            "fitted_slope": r.fitted_slope,
            "intercept": r.intercept,
            "slope_se": r.slope_se,
            "residual_se": r.residual_se,
            "fitted_points": r.fitted_points,
            "reference_exponent": scan.reference_exponent,
            "tolerance": SLOPE_TOLERANCE,
            "adaptive_tolerance": r.tolerance(),
            "slope_within_tolerance": r.fitted_slope.map(|s| s >= scan.reference_exponent - SLOPE_TOLERANCE),
            "normalized_p_hat": r.normalized(scan.reference_exponent),
            "modulus_constant": scan.modulus_constant,
            "margin": scan.margin,
            "hits_nested": scan.hits_are_nested(),
        }),
        streams,
    }
}

// ---------------------------------------------------------------- modulus-scan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulusScanParams {
    pub hurst: Vec<f64>,
    pub mixing: Vec<Vec<f64>>,
    pub domain: BoxSpec,
    /// Lattice step, the same on every axis.
    pub step: f64,
    pub eps: Vec<f64>,
    pub n_samples: usize,
}

impl Default for ModulusScanParams {
    fn default() -> Self {
        Self {
            hurst: vec![0.5],
            mixing: default_mixing(),
            domain: BoxSpec {
                lo: vec![0.0],
                hi: vec![0.25],
            },
            step: 1.25e-4,
            eps: default_radii(),
            n_samples: 2000,
        }
    }
}

impl ModulusScanParams {
    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let h = HurstVector::new(self.hurst.clone())?;
        let model = FieldModel::new(h.clone(), self.mixing.clone())?;
        let domain = self.domain.to_box()?;
        let grid = Grid::regular(&domain, &vec![self.step; domain.dim()])?;
        let sampler = FieldSampler::new(&model, grid.points())?;
        let values: Vec<f64> = sampler
            .map_replicates(ctx.seed, self.n_samples, |_, v| v.to_vec())
            .into_iter()
            .flatten()
            .collect();
        let paths = SamplePathSet {
            model: model.clone(),
            grid_hash: grid.hash(),
            seed: ctx.seed,
            n_samples: self.n_samples,
            n_points: grid.len(),
            dim: model.dim(),
            values,
        };
        let tab = modulus_statistic(&paths, &grid, &h, &self.eps)?;
        let mut table = Table::new(&["eps", "pairs", "missing", "q50", "q95", "seed", "config_digest"]);
        let mut q95 = Vec::new();
        for (k, &e) in tab.eps.iter().enumerate() {
            let hi = tab.quantile(k, 0.95);
            if let Some(v) = hi {
                q95.push(v);
            }
            table.push(vec![
                e.into(),
                tab.pairs[k].into(),
                tab.is_missing(k).into(),
                tab.quantile(k, 0.5).into(),
                hi.into(),
                ctx.seed.into(),
                ctx.digest.into(),
            ]);
        }
        let lo = q95.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q95.iter().copied().fold(0.0, f64::max);
        let ratio = (q95.len() == tab.eps.len() && lo > 0.0).then(|| hi / lo);
        Ok(KindOutput {
            table,
            report: json!({
                "grid_points": grid.len(),
                "grid_hash": paths.grid_hash,
                "rho_spacing": tab.rho_spacing,
                "q95_ratio": ratio,
                "q95_ratio_below_3": ratio.map(|r| r < 3.0),
            }),
            streams: vec![(FIELD_STREAM, self.n_samples)],
        })
    }
}

// ---------------------------------------------------------------- chaining-check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainingCheckParams {
    pub betas: Vec<f64>,
    pub lipschitz: f64,
    pub c: f64,
    pub d: u32,
    pub q: f64,
    pub k_max: u32,
    /// Radius and depth of the reported dyadic schedule.
    pub r: f64,
    pub levels: usize,
}

impl Default for ChainingCheckParams {
    fn default() -> Self {
        Self {
            betas: vec![20.0, 27.0, 27.7, 27.72, 28.0, 40.0],
            lipschitz: 0.0,
            c: 1.0,
            d: 2,
            q: 4.0 / 3.0,
            k_max: 12,
            r: 1.0,
            levels: 6,
        }
    }
}

impl ChainingCheckParams {
    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let mut table = Table::new(&[
            "beta",
            "converges",
            "overflowed",
            "threshold_beta",
            "partial_sum",
            "terms",
            "monotone",
            "config_digest",
        ]);
        let mut details = Vec::new();
        for &beta in &self.betas {
            let s = chaining_series_bound(beta, self.lipschitz, self.c, self.d, self.q, self.k_max)?;
            let monotone = s.partial_sums.windows(2).all(|w| w[1] >= w[0]);
            let sched = ChainingSchedule::new(self.r, beta, self.levels)?;
            table.push(vec![
                beta.into(),
                s.converges.into(),
                s.overflowed.into(),
                s.threshold_beta.into(),
                s.partial_sum.into(),
                s.partial_sums.len().into(),
                monotone.into(),
                ctx.digest.into(),
            ]);
            details.push(json!({
                "beta": beta,
                "partial_sums": s.partial_sums,
                "epsilons": sched.epsilons,
                "radii": sched.radii,
                "c2": sched.c2,
            }));
        }
        let d = self.d as f64;
        Ok(KindOutput {
            table,
            report: json!({
                "threshold_beta": (32.0 * self.q * d * (d + 1.0).powi(2) * self.c * self.c).sqrt(),
                "series": details,
            }),
            streams: vec![],
        })
    }
}

// ---------------------------------------------------------------- calib-noiseless

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibNoiselessParams {
    pub option: OptionModel,
    pub v_max: f64,
    pub step: f64,
}

impl Default for CalibNoiselessParams {
    fn default() -> Self {
        Self {
            option: OptionModel::exp_abs(),
            v_max: 10.0,
            step: 0.01,
        }
    }
}

impl CalibNoiselessParams {
    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let grid = FrequencyGrid::new(self.v_max, self.step)?;
        let est = psi_from_noise(&self.option, &grid, None, 0.0, ctx.seed, LogOptions::default())?;
        let exact = matches!(self.option.shape, OptionShape::ExpAbs);
        let t = self.option.maturity;
        let mut table = Table::new(&[
            "v",
            "re_psi",
            "im_psi",
            "abs_arg",
            "re_reference",
            "im_reference",
            "abs_error",
            "config_digest",
        ]);
        let mut max_err: f64 = 0.0;
        let mut max_mod: f64 = 0.0;
        for ((&v, psi), &a) in est.v.iter().zip(&est.values).zip(&est.abs_arg) {
            // for O = e^{−|x|}: A = (1 + iv)/(1 − iv), log A = 2i·atan(v)
            let reference = exact.then(|| Complex64::new(0.0, 2.0 * v.atan() / t));
            let err = reference.map(|r| (psi - r).norm());
            if let Some(e) = err {
                max_err = max_err.max(e);
                max_mod = max_mod.max((a - 1.0).abs());
            }
            table.push(vec![
                v.into(),
                psi.re.into(),
                psi.im.into(),
                a.into(),
                reference.map(|r| r.re).into(),
                reference.map(|r| r.im).into(),
                err.into(),
                ctx.digest.into(),
            ]);
        }
        let zero = est.values[grid.anchor()];
        Ok(KindOutput {
            table,
            report: json!({
                "well_defined": est.well_defined,
                "resolved": est.resolved,
                "min_arg_modulus": est.min_arg_modulus,
                "max_phase_increment": est.max_phase_increment,
                "has_reference": exact,
                "max_abs_error": exact.then_some(max_err),
                "max_abs_arg_deviation": exact.then_some(max_mod),
                "psi_at_zero": [zero.re, zero.im],
                "psi_at_zero_is_zero": zero == Complex64::new(0.0, 0.0),
            }),
            streams: vec![],
        })
    }
}

// ---------------------------------------------------------------- calib-sim

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibSimParams {
    pub noise: NoiseLevel,
    pub option: OptionModel,
    pub v_max: f64,
    pub step: f64,
    pub scales: Vec<f64>,
    pub n_replicates: usize,
    /// Cut-offs at which `λ_V` is reported.
    pub lambda_v: Vec<f64>,
    pub n_v: usize,
    pub n_phi: usize,
    /// Side of the `(u, v)` grid on `[−V, V]²` for the Hölder bound.
    pub holder_grid: usize,
}

impl Default for CalibSimParams {
    fn default() -> Self {
        Self {
            noise: NoiseLevel::power_law(1.5, 1.5).expect("valid default noise"),
            option: OptionModel::exp_abs(),
            v_max: 10.0,
            step: 0.01,
            scales: vec![1e-3, 1e-2, 1e-1],
            n_replicates: 200,
            lambda_v: vec![2.0, 5.0, 10.0],
            n_v: 400,
            n_phi: 200,
            holder_grid: 50,
        }
    }
}

impl CalibSimParams {
    fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        let noise = &self.noise;
        let grid = FrequencyGrid::new(self.v_max, self.step)?;
        let total_mass = noise.total_mass()?;
        let tail = noise.tail_integral(noise.p())?;
        let mut lambdas = Vec::new();
        for &v in &self.lambda_v {
            lambdas.push(lambda_min_on_iv(noise, v, self.n_v, self.n_phi)?);
        }
        let mut by_v: Vec<_> = lambdas.iter().collect();
        by_v.sort_by(|a, b| a.v_max.total_cmp(&b.v_max));
        let nonincreasing = by_v.windows(2).all(|w| w[1].lambda <= w[0].lambda);
        let g = self.holder_grid;
        let us: Vec<f64> = (0..g)
            .map(|i| {
                if g > 1 {
                    -self.v_max + 2.0 * self.v_max * i as f64 / (g - 1) as f64
                } else {
                    0.0
                }
            })
            .collect();
        let pairs: Vec<(f64, f64)> = us.iter().flat_map(|&u| us.iter().map(move |&v| (u, v))).collect();
        let holder = holder_bound_check(noise, &pairs)?;
        let batch = psi_batch(
            &self.option,
            noise,
            &grid,
            &self.scales,
            self.n_replicates,
            ctx.seed,
            LogOptions::default(),
        )?;
        let mut table = Table::new(&[
            "scale",
            "replicate",
            "noise_seed",
            "well_defined",
            "resolved",
            "certified",
            "min_arg_modulus",
            "max_phase_increment",
            "config_digest",
        ]);
        for row in &batch.verdicts {
            for v in row {
                table.push(vec![
                    v.noise_scale.into(),
                    v.replicate.into(),
                    v.noise_seed.into(),
                    v.well_defined.into(),
                    v.resolved.into(),
                    v.certified.into(),
                    v.min_arg_modulus.into(),
                    v.max_phase_increment.into(),
                    ctx.digest.into(),
                ]);
            }
        }
        let per_scale: Vec<Value> = (0..batch.scales.len())
            .map(|k| {
                let v = &batch.verdicts[k];
                json!({
                    "scale": batch.scales[k],
                    "all_well_defined": batch.all_well_defined(k),
                    "resolved": v.iter().filter(|x| x.resolved).count(),
                    "certified": v.iter().filter(|x| x.certified).count(),
                })
            })
            .collect();
        Ok(KindOutput {
            table,
            report: json!({
                "total_mass": total_mass,
                "tail_integral": tail,
                "lambda": lambdas,
                "lambda_nonincreasing": nonincreasing,
                "holder": holder,
                "scales": per_scale,
                "well_definedness_monotone": batch.well_definedness_is_monotone(),
            }),
            streams: vec![(NOISE_STREAM, self.n_replicates)],
        })
    }
}

// ---------------------------------------------------------------- dispatch

/// Validated parameters of one experiment kind.
#[derive(Debug, Clone, PartialEq)]
pub enum KindParams {
    MetricCheck(MetricCheckParams),
    FieldSim(FieldSimParams),
    HittingScan(HittingScanParams),
    PolarityScan(PolarityScanParams),
    ModulusScan(ModulusScanParams),
    ChainingCheck(ChainingCheckParams),
    CalibNoiseless(CalibNoiselessParams),
    CalibSim(CalibSimParams),
}

impl KindParams {
    pub fn to_value(&self) -> Value {
        let v = match self {
            KindParams::MetricCheck(p) => serde_json::to_value(p),
            KindParams::FieldSim(p) => serde_json::to_value(p),
            KindParams::HittingScan(p) => serde_json::to_value(p),
            KindParams::PolarityScan(p) => serde_json::to_value(p),
            KindParams::ModulusScan(p) => serde_json::to_value(p),
            KindParams::ChainingCheck(p) => serde_json::to_value(p),
            KindParams::CalibNoiseless(p) => serde_json::to_value(p),
            KindParams::CalibSim(p) => serde_json::to_value(p),
        };
        v.expect("parameter structs serialize")
    }

    pub(crate) fn run(&self, ctx: &Ctx) -> Result<KindOutput, ExperimentError> {
        match self {
            KindParams::MetricCheck(p) => p.run(ctx),
            KindParams::FieldSim(p) => p.run(ctx),
            KindParams::HittingScan(p) => p.run(ctx),
            KindParams::PolarityScan(p) => p.run(ctx),
            KindParams::ModulusScan(p) => p.run(ctx),
            KindParams::ChainingCheck(p) => p.run(ctx),
            KindParams::CalibNoiseless(p) => p.run(ctx),
            KindParams::CalibSim(p) => p.run(ctx),
        }
    }
}
