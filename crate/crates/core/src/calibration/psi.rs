use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CalibrationError, FrequencyGrid, NoiseLevel, SpectralSampler};
use crate::quad::{integrate, QuadOptions};
use crate::seed::derive_seed;

/// Even or two-sided exponential function `O`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum OptionShape {
    /// `O(x) = e^{−|x|}`.
    ExpAbs,
    /// `O(x) = e^{−right·x}` for `x ≥ 0`, `e^{left·x}` for `x < 0`.
    TwoSidedExp { right: f64, left: f64 },
}

/// Function `O` and maturity `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionModel {
    #[serde(flatten)]
    pub shape: OptionShape,
    #[serde(default = "default_maturity")]
    pub maturity: f64,
}

fn default_maturity() -> f64 {
    1.0
}

impl OptionModel {
    pub fn new(shape: OptionShape, maturity: f64) -> Result<Self, CalibrationError> {
        let m = Self { shape, maturity };
        m.validate()?;
        Ok(m)
    }

    pub fn exp_abs() -> Self {
        Self {
            shape: OptionShape::ExpAbs,
            maturity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(CalibrationError::BadMaturity(self.maturity));
        }
        if let OptionShape::TwoSidedExp { right, left } = self.shape {
            if !(right > 0.0 && left > 0.0 && right.is_finite() && left.is_finite()) {
                return Err(CalibrationError::InvalidOption(format!(
                    "decay rates must be positive, got right = {right}, left = {left}"
                )));
            }
        }
        Ok(())
    }

    fn rates(&self) -> (f64, f64) {
        match self.shape {
            OptionShape::ExpAbs => (1.0, 1.0),
            OptionShape::TwoSidedExp { right, left } => (right, left),
        }
    }

    pub fn o(&self, x: f64) -> f64 {
        let (r, l) = self.rates();
        if x >= 0.0 {
            (-r * x).exp()
        } else {
            (l * x).exp()
        }
    }

    /// `FO(v) = ∫ e^{ivx} O(x) dx` in closed form.
    pub fn fourier(&self, v: f64) -> Complex64 {
        match self.shape {
            OptionShape::ExpAbs => Complex64::new(2.0 / (1.0 + v * v), 0.0),
            OptionShape::TwoSidedExp { right, left } => {
                let one = Complex64::new(1.0, 0.0);
                one / Complex64::new(right, -v) + one / Complex64::new(left, v)
            }
        }
    }

    /// `FO(v)` by quadrature over the region where `O > 1e−18`.
    pub fn fourier_quadrature(&self, v: f64) -> Result<Complex64, CalibrationError> {
        let (r, l) = self.rates();
        let cut = 18.0 * 10f64.ln();
        let opts = QuadOptions {
            max_intervals: 20_000,
            ..QuadOptions::abs(1e-12)
        };
        let mut re = 0.0;
        let mut im = 0.0;
        for (a, b) in [(-cut / l, 0.0), (0.0, cut / r)] {
            let c = integrate(|x: f64| (v * x).cos() * self.o(x), a, b, opts);
            let s = integrate(|x: f64| (v * x).sin() * self.o(x), a, b, opts);
            if !(c.converged && s.converged) {
                return Err(CalibrationError::Quadrature {
                    what: "Fourier transform of O",
                    error: c.error.max(s.error),
                });
            }
            re += c.value;
            im += s.value;
        }
        Ok(Complex64::new(re, im))
    }

    /// `∫|x| O(x) dx`, a Lipschitz constant of `FO`.
    pub fn fourier_lipschitz(&self) -> f64 {
        let (r, l) = self.rates();
        1.0 / (r * r) + 1.0 / (l * l)
    }
}

/// `FO(v)` for the model's closed form.
pub fn fourier_o(model: &OptionModel, v: f64) -> Complex64 {
    model.fourier(v)
}

/// Thresholds for the distinguished logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogOptions {
    /// Moduli below this count as hitting zero.
    pub tol_zero: f64,
    /// Phase increments must stay below `π − margin`.
    pub margin: f64,
}

impl Default for LogOptions {
    fn default() -> Self {
        Self {
            tol_zero: 1e-12,
            margin: PI / 2.0,
        }
    }
}

/// Unwrapped logarithm with the diagnostics needed to judge it.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTrace {
    pub log: Vec<Complex64>,
    /// First index (from the anchor outwards) with modulus below `tol_zero`.
    pub zero_hit: Option<usize>,
    pub min_modulus: f64,
    /// Largest absolute phase increment and where it ends.
    pub max_increment: f64,
    pub max_increment_at: usize,
}

/// Unwraps from the anchor in both directions; each increment is the
/// representative of the principal-argument difference in `(−π, π]`.
pub fn log_trace(path: &[Complex64], anchor: usize, tol_zero: f64) -> Result<LogTrace, CalibrationError> {
    let z0 = *path.get(anchor).ok_or(CalibrationError::EmptyPath)?;
    if (z0 - 1.0).norm() > 1e-12 {
        return Err(CalibrationError::AnchorNotOne(z0.re, z0.im));
    }
    let n = path.len();
    let mut phase = vec![0.0; n];
    phase[anchor] = z0.arg();
    let mut max_increment: f64 = 0.0;
    let mut max_increment_at = anchor;
    let mut step = |i: usize, prev: usize, phase: &mut Vec<f64>| {
        let a = path[i].arg();
        // nearest representative to the previous phase; avoids accumulating differences
        let p = a + 2.0 * PI * ((phase[prev] - a) / (2.0 * PI)).round();
        phase[i] = p;
        let inc = (p - phase[prev]).abs();
        if inc > max_increment {
            max_increment = inc;
            max_increment_at = i;
        }
    };
    for i in anchor + 1..n {
        step(i, i - 1, &mut phase);
    }
    for i in (0..anchor).rev() {
        step(i, i + 1, &mut phase);
    }
    let mut zero_hit = None;
    let mut min_modulus = f64::INFINITY;
    let order = (anchor..n).chain((0..anchor).rev());
    for i in order {
        let m = path[i].norm();
        min_modulus = min_modulus.min(m);
        if m < tol_zero && zero_hit.is_none() {
            zero_hit = Some(i);
        }
    }
    let log = path
        .iter()
        .zip(&phase)
        .map(|(z, p)| Complex64::new(z.norm().ln(), *p))
        .collect();
    Ok(LogTrace {
        log,
        zero_hit,
        min_modulus,
        max_increment,
        max_increment_at,
    })
}

/// Continuous logarithm of a path with value 1 at `anchor`.
pub fn distinguished_log(
    path: &[Complex64],
    anchor: usize,
    opts: LogOptions,
) -> Result<Vec<Complex64>, CalibrationError> {
    let t = log_trace(path, anchor, opts.tol_zero)?;
    if let Some(i) = t.zero_hit {
        return Err(CalibrationError::ZeroHit {
            index: i,
            modulus: path[i].norm(),
        });
    }
    if t.max_increment >= PI - opts.margin {
        return Err(CalibrationError::PhaseJumpTooLarge {
            index: t.max_increment_at,
            increment: t.max_increment,
        });
    }
    Ok(t.log)
}

/// Estimate `ψ̃(v) = log(1 + iv(1 + iv)(FO(v) + σX(v))) / T` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub v: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `|A(v)|` for the argument `A` of the logarithm.
    pub abs_arg: Vec<f64>,
    /// No zero of `A` on the grid.
    pub well_defined: bool,
    /// Every phase increment below `π − margin`.
    pub resolved: bool,
    pub min_arg_modulus: f64,
    pub max_phase_increment: f64,
    pub unwrap_margin: f64,
    /// `σ|v(1 + iv)X(v)| < |A₀(v)|` everywhere, with `A₀` the noiseless
    /// argument: a certificate that `A` cannot vanish on the segment from `A₀`.
    pub certified: bool,
    pub noise_scale: f64,
    pub seed: u64,
}

/// ψ̃ for one noise path `x` on `grid` (no noise when `x` is `None`).
pub fn psi_from_noise(
    model: &OptionModel,
    grid: &FrequencyGrid,
    x: Option<&[Complex64]>,
    noise_scale: f64,
    seed: u64,
    opts: LogOptions,
) -> Result<PsiEstimate, CalibrationError> {
    model.validate()?;
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(CalibrationError::BadNoiseScale(noise_scale));
    }
    let v = grid.points();
    if let Some(x) = x {
        if x.len() != v.len() {
            return Err(CalibrationError::BadGrid(format!(
                "noise path has {} values, grid has {}",
                x.len(),
                v.len()
            )));
        }
    }
    let i = Complex64::new(0.0, 1.0);
    let mut args = Vec::with_capacity(v.len());
    let mut certified = true;
    for (k, &vk) in v.iter().enumerate() {
        let factor = i * vk * (1.0 + i * vk);
        let a0 = 1.0 + factor * model.fourier(vk);
        let a = match x {
            Some(x) => {
                let pert = factor * noise_scale * x[k];
                if pert.norm() >= a0.norm() {
                    certified = false;
                }
                a0 + pert
            }
            None => a0,
        };
        args.push(a);
    }
    let anchor = grid.anchor();
    let t = log_trace(&args, anchor, opts.tol_zero)?;
    let values = t.log.iter().map(|l| l / model.maturity).collect();
    Ok(PsiEstimate {
        v,
        values,
        abs_arg: args.iter().map(|a| a.norm()).collect(),
        well_defined: t.zero_hit.is_none(),
        resolved: t.max_increment < PI - opts.margin,
        min_arg_modulus: t.min_modulus,
        max_phase_increment: t.max_increment,
        unwrap_margin: opts.margin,
        certified,
        noise_scale,
        seed,
    })
}

/// ψ̃ from replicate 0 of the noise stream keyed on `seed`.
pub fn psi_estimator(
    model: &OptionModel,
    noise: &NoiseLevel,
    grid: &FrequencyGrid,
    noise_scale: f64,
    seed: u64,
) -> Result<PsiEstimate, CalibrationError> {
    if noise_scale == 0.0 {
        return psi_from_noise(model, grid, None, 0.0, seed, LogOptions::default());
    }
    let sampler = SpectralSampler::new(noise, grid)?;
    let mut out = sampler.map_replicates(seed, 1, |_, x| {
        psi_from_noise(model, grid, Some(x), noise_scale, seed, LogOptions::default())
    });
    out.pop().unwrap_or(Err(CalibrationError::EmptyPath))
}

/// Verdict of one replicate at one noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiVerdict {
    pub replicate: usize,
    pub noise_seed: u64,
    pub noise_scale: f64,
    pub well_defined: bool,
    pub resolved: bool,
    pub certified: bool,
    pub min_arg_modulus: f64,
    pub max_phase_increment: f64,
}

/// Replicates of ψ̃ across noise scales, sharing each replicate's noise draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiBatch {
    pub scales: Vec<f64>,
    pub n_replicates: usize,
    pub seed: u64,
    /// `verdicts[scale][replicate]`.
    pub verdicts: Vec<Vec<PsiVerdict>>,
}

impl PsiBatch {
    pub fn all_well_defined(&self, scale_index: usize) -> bool {
        self.verdicts[scale_index].iter().all(|v| v.well_defined)
    }

    /// Per replicate: well-defined at a scale implies well-defined at every
    /// smaller scale.
    pub fn well_definedness_is_monotone(&self) -> bool {
        let mut order: Vec<usize> = (0..self.scales.len()).collect();
        order.sort_by(|a, b| self.scales[*a].total_cmp(&self.scales[*b]));
        (0..self.n_replicates).all(|r| {
            order
                .windows(2)
                .all(|w| !self.verdicts[w[1]][r].well_defined || self.verdicts[w[0]][r].well_defined)
        })
    }
}

pub fn psi_batch(
    model: &OptionModel,
    noise: &NoiseLevel,
    grid: &FrequencyGrid,
    scales: &[f64],
    n_replicates: usize,
    seed: u64,
    opts: LogOptions,
) -> Result<PsiBatch, CalibrationError> {
    model.validate()?;
    if let Some(s) = scales.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(CalibrationError::BadNoiseScale(*s));
    }
    let sampler = SpectralSampler::new(noise, grid)?;
    let rows = sampler.map_replicates(seed, n_replicates, |rep, x| {
        scales
            .iter()
            .map(|&s| {
                let e = psi_from_noise(model, grid, Some(x), s, seed, opts)?;
                Ok(PsiVerdict {
                    replicate: rep,
                    noise_seed: derive_seed(seed, rep as u64, crate::seed::NOISE_STREAM),
                    noise_scale: s,
                    well_defined: e.well_defined,
                    resolved: e.resolved,
                    certified: e.certified,
                    min_arg_modulus: e.min_arg_modulus,
                    max_phase_increment: e.max_phase_increment,
                })
            })
            .collect::<Result<Vec<_>, CalibrationError>>()
    });
    let mut verdicts = vec![Vec::with_capacity(n_replicates); scales.len()];
    for row in rows {
        for (k, v) in row?.into_iter().enumerate() {
            verdicts[k].push(v);
        }
    }
    Ok(PsiBatch {
        scales: scales.to_vec(),
        n_replicates,
        seed,
        verdicts,
    })
}
