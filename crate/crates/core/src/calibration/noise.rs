use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::quad::{integrate, QuadOptions};

/// Tight tolerance for the spectral transforms; callers compare at 1e−8.
const TRANSFORM_TOL: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-13,
    max_intervals: 20_000,
};

/// Shape of the noise level `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// `ε(x) = (1 + |x|)^{−a}`.
    PowerLaw { a: f64 },
    /// `ε(x) = exp(−1 / (1 − (x/width)²))` on `|x| < width`, zero outside.
    Bump { width: f64 },
}

/// Noise level together with the declared tail exponent `p > 1` for which
/// `∫(1 + |x|)^p ε(x)² dx` is finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoise", into = "RawNoise")]
pub struct NoiseLevel {
    family: NoiseFamily,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNoise {
    #[serde(flatten)]
    family: NoiseFamily,
    p: f64,
}

impl TryFrom<RawNoise> for NoiseLevel {
    type Error = CalibrationError;
    fn try_from(r: RawNoise) -> Result<Self, Self::Error> {
        NoiseLevel::new(r.family, r.p)
    }
}

impl From<NoiseLevel> for RawNoise {
    fn from(n: NoiseLevel) -> Self {
        RawNoise {
            family: n.family,
            p: n.p,
        }
    }
}

impl NoiseLevel {
    /// Certifies the tail condition before any numerics: `p > 1`, and
    /// `2a − p > 1` for the power law.
    pub fn new(family: NoiseFamily, p: f64) -> Result<Self, CalibrationError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(CalibrationError::PNotAboveOne(p));
        }
        match family {
            NoiseFamily::PowerLaw { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(CalibrationError::InvalidNoise(format!(
                        "power-law exponent a = {a} must be positive"
                    )));
                }
                if 2.0 * a - p <= 1.0 {
                    return Err(CalibrationError::TailDivergent { a, p });
                }
            }
            NoiseFamily::Bump { width } => {
                if !(width > 0.0 && width.is_finite()) {
                    return Err(CalibrationError::InvalidNoise(format!(
                        "bump width {width} must be positive"
                    )));
                }
            }
        }
        Ok(Self { family, p })
    }

    pub fn power_law(a: f64, p: f64) -> Result<Self, CalibrationError> {
        Self::new(NoiseFamily::PowerLaw { a }, p)
    }

    pub fn bump(width: f64, p: f64) -> Result<Self, CalibrationError> {
        Self::new(NoiseFamily::Bump { width }, p)
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self, x: f64) -> f64 {
        match self.family {
            NoiseFamily::PowerLaw { a } => (1.0 + x.abs()).powf(-a),
            NoiseFamily::Bump { width } => {
                let s = x / width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }

    pub fn eps2(&self, x: f64) -> f64 {
        let e = self.eps(x);
        e * e
    }

    /// `∫ε²`.
    pub fn total_mass(&self) -> Result<f64, CalibrationError> {
        self.cos_transform(0.0)
    }

    /// `C(ω) = ∫ cos(ωx) ε(x)² dx`.
    pub fn cos_transform(&self, omega: f64) -> Result<f64, CalibrationError> {
        let w = omega.abs();
        match self.family {
            NoiseFamily::PowerLaw { a } => {
                let nu = 2.0 * a;
                if w == 0.0 {
                    return Ok(2.0 / (nu - 1.0));
                }
                let cut = power_law_cut(nu, w);
                let head = checked(
                    integrate(|x: f64| (w * x).cos() * (1.0 + x).powf(-nu), 0.0, cut, TRANSFORM_TOL),
                    "cosine transform",
                )?;
                Ok(2.0 * (head + power_law_cos_tail(nu, w, cut)))
            }
            NoiseFamily::Bump { width } => {
                let v = checked(
                    integrate(|x: f64| (w * x).cos() * self.eps2(x), 0.0, width, TRANSFORM_TOL),
                    "cosine transform",
                )?;
                Ok(2.0 * v)
            }
        }
    }

    /// `S(ω) = ∫ sin(ωx) ε(x)² dx`, identically zero because every family
    /// has an even `ε`.
    pub fn sin_transform(&self, _omega: f64) -> Result<f64, CalibrationError> {
        Ok(0.0)
    }

    /// `∫(1 − cos(ωx)) ε(x)² dx`, without the cancellation of `C(0) − C(ω)`.
    pub fn versine_transform(&self, omega: f64) -> Result<f64, CalibrationError> {
        let w = omega.abs();
        if w == 0.0 {
            return Ok(0.0);
        }
        let f = |x: f64| 2.0 * (0.5 * w * x).sin().powi(2) * self.eps2(x);
        match self.family {
            NoiseFamily::PowerLaw { a } => {
                let nu = 2.0 * a;
                let cut = power_law_cut(nu, w);
                let head = checked(integrate(f, 0.0, cut, TRANSFORM_TOL), "versine transform")?;
                let tail0 = (1.0 + cut).powf(1.0 - nu) / (nu - 1.0);
                Ok(2.0 * (head + tail0 - power_law_cos_tail(nu, w, cut)))
            }
            NoiseFamily::Bump { width } => {
                Ok(2.0 * checked(integrate(f, 0.0, width, TRANSFORM_TOL), "versine transform")?)
            }
        }
    }

    /// `∫(1 + |x|)^p ε(x)² dx`; analytic tail beyond `x = 20` for the power law.
    pub fn tail_integral(&self, p: f64) -> Result<f64, CalibrationError> {
        let opts = QuadOptions {
            rel_tol: 1e-13,
            ..QuadOptions::abs(1e-12)
        };
        match self.family {
            NoiseFamily::PowerLaw { a } => {
                if 2.0 * a - p <= 1.0 {
                    return Err(CalibrationError::TailDivergent { a, p });
                }
                let mu = 2.0 * a - p;
                let cut = 20.0;
                let head = checked(integrate(|x: f64| (1.0 + x).powf(-mu), 0.0, cut, opts), "tail integral")?;
                Ok(2.0 * (head + (1.0 + cut).powf(1.0 - mu) / (mu - 1.0)))
            }
            NoiseFamily::Bump { width } => {
                let v = checked(
                    integrate(|x: f64| (1.0 + x).powf(p) * self.eps2(x), 0.0, width, opts),
                    "tail integral",
                )?;
                Ok(2.0 * v)
            }
        }
    }

    /// `∫|x|^q ε(x)² dx` (Beta function for the power law).
    pub fn abs_moment(&self, q: f64) -> Result<f64, CalibrationError> {
        match self.family {
            NoiseFamily::PowerLaw { a } => {
                let b = 2.0 * a - q - 1.0;
                if !(q > -1.0 && b > 0.0) {
                    return Err(CalibrationError::TailDivergent { a, p: q });
                }
                let ln_beta = libm::lgamma(q + 1.0) + libm::lgamma(b) - libm::lgamma(2.0 * a);
                Ok(2.0 * ln_beta.exp())
            }
            NoiseFamily::Bump { width } => {
                let v = checked(
                    integrate(|x: f64| x.powf(q) * self.eps2(x), 0.0, width, TRANSFORM_TOL),
                    "absolute moment",
                )?;
                Ok(2.0 * v)
            }
        }
    }

    /// `∫ min(4, δ²x²) ε(x)² dx`.
    pub fn clipped_quadratic(&self, delta: f64) -> Result<f64, CalibrationError> {
        let d = delta.abs();
        if d == 0.0 {
            return Ok(0.0);
        }
        let knee = 2.0 / d;
        let quad = |x: f64| d * d * x * x * self.eps2(x);
        match self.family {
            NoiseFamily::PowerLaw { a } => {
                let nu = 2.0 * a;
                let head = checked(integrate(quad, 0.0, knee, TRANSFORM_TOL), "clipped integral")?;
                Ok(2.0 * (head + 4.0 * (1.0 + knee).powf(1.0 - nu) / (nu - 1.0)))
            }
            NoiseFamily::Bump { width } => {
                let head = checked(integrate(quad, 0.0, knee.min(width), TRANSFORM_TOL), "clipped integral")?;
                let rest = if knee < width {
                    checked(
                        integrate(|x: f64| 4.0 * self.eps2(x), knee, width, TRANSFORM_TOL),
                        "clipped integral",
                    )?
                } else {
                    0.0
                };
                Ok(2.0 * (head + rest))
            }
        }
    }
}

fn checked(r: crate::quad::QuadResult, what: &'static str) -> Result<f64, CalibrationError> {
    if !r.value.is_finite() || r.error > 1e-9 * r.value.abs().max(1.0) {
        return Err(CalibrationError::Quadrature { what, error: r.error });
    }
    Ok(r.value)
}

/// Split point past which the asymptotic tail series is accurate.
fn power_law_cut(nu: f64, w: f64) -> f64 {
    (20.0f64).max((30.0 + nu) / w - 1.0)
}

/// `∫_X^∞ cos(ωx)(1 + x)^{−ν} dx` from the asymptotic expansion
/// `∫_Y^∞ e^{iωy} y^{−ν} dy = −e^{iωY} Σ_k (ν)_k / ((iω)^{k+1} Y^{ν+k})`, `Y = 1 + X`,
/// truncated at its smallest term.
fn power_law_cos_tail(nu: f64, w: f64, cut: f64) -> f64 {
    let y = 1.0 + cut;
    let iw = Complex64::new(0.0, w);
    let mut term = 1.0 / (iw * y.powf(nu));
    let mut sum = term;
    let mut k = 0.0;
    loop {
        let next = term * (nu + k) / (iw * y);
        if next.norm() >= term.norm() || next.norm() < 1e-18 * sum.norm() || k > 200.0 {
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    let phase = Complex64::new(0.0, w * y).exp() * Complex64::new(0.0, -w).exp();
    (-phase * sum).re
}

/// `min(p/2, 1)`, the Hölder exponent of the spectral process.
pub fn holder_exponent(p: f64) -> Result<f64, CalibrationError> {
    if p.is_nan() || p <= 1.0 {
        return Err(CalibrationError::PNotAboveOne(p));
    }
    Ok((p / 2.0).min(1.0))
}

/// Outcome of the increment-variance bound on a list of `(u, v)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    /// `q = min(p, 2)`.
    pub q: f64,
    /// `∫|x|^q ε²`.
    pub moment: f64,
    /// Smallest `bound − E|X(u) − X(v)|²`.
    pub min_slack: f64,
    /// Largest amount by which either inequality of the chain fails (≤ 0 when both hold).
    pub max_violation: f64,
    pub pairs: usize,
    pub ok: bool,
}

/// Checks `E|X(u) − X(v)|² ≤ ∫min(4, (u−v)²x²) ε² ≤ 2^{2−q}|u−v|^q ∫|x|^q ε²`.
pub fn holder_bound_check(noise: &NoiseLevel, pairs: &[(f64, f64)]) -> Result<HolderCheck, CalibrationError> {
    let q = noise.p().min(2.0);
    let moment = noise.abs_moment(q)?;
    let factor = 2f64.powf(2.0 - q);
    // the three sides depend on |u − v| only
    let mut deltas: Vec<f64> = pairs.iter().map(|(u, v)| (u - v).abs()).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let mut min_slack = f64::INFINITY;
    let mut max_violation = f64::NEG_INFINITY;
    for d in deltas {
        let lhs = 2.0 * noise.versine_transform(d)?;
        let mid = noise.clipped_quadratic(d)?;
        let rhs = factor * d.powf(q) * moment;
        min_slack = min_slack.min(rhs - lhs);
        max_violation = max_violation.max(lhs - mid).max(mid - rhs);
    }
    if pairs.is_empty() {
        min_slack = 0.0;
        max_violation = 0.0;
    }
    Ok(HolderCheck {
        q,
        moment,
        min_slack,
        max_violation,
        pairs: pairs.len(),
        ok: max_violation <= 1e-8,
    })
}
