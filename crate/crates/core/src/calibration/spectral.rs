use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CalibrationError, NoiseLevel};
use crate::field::{factor_with_jitter, MAX_DENSE_ROWS};
use crate::seed::{replicate_rng, NOISE_STREAM};

const CHUNK: usize = 64;

/// Lattice `k·step` on `[−V, −1/V] ∪ [1/V, V]` plus the anchor `v = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub v_max: f64,
    pub step: f64,
    /// Smallest and largest positive lattice index.
    k_min: i64,
    k_max: i64,
}

impl FrequencyGrid {
    pub fn new(v_max: f64, step: f64) -> Result<Self, CalibrationError> {
        if !(v_max > 1.0 && v_max.is_finite()) {
            return Err(CalibrationError::BadGrid(format!("V = {v_max} must exceed 1")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(CalibrationError::BadGrid(format!("step {step} must be positive")));
        }
        let k_min = ((1.0 / (v_max * step)) - 1e-9).ceil().max(1.0) as i64;
        let k_max = (v_max / step + 1e-9).floor() as i64;
        if k_max < k_min {
            return Err(CalibrationError::BadGrid(format!(
                "step {step} leaves no point in [1/V, V]"
            )));
        }
        let rows = 1 + 2 * (k_max - k_min + 1) as usize;
        if rows > MAX_DENSE_ROWS {
            return Err(CalibrationError::BadGrid(format!(
                "{rows} covariance rows exceed the dense limit {MAX_DENSE_ROWS}"
            )));
        }
        Ok(Self {
            v_max,
            step,
            k_min,
            k_max,
        })
    }

    /// Lattice indices in increasing order.
    pub fn indices(&self) -> Vec<i64> {
        let neg = (self.k_min..=self.k_max).rev().map(|k| -k);
        neg.chain(std::iter::once(0)).chain(self.k_min..=self.k_max).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        self.indices().into_iter().map(|k| k as f64 * self.step).collect()
    }

    pub fn len(&self) -> usize {
        1 + 2 * self.positive_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn positive_len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    /// Position of `v = 0` in [`points`](Self::points).
    pub fn anchor(&self) -> usize {
        self.positive_len()
    }
}

/// Covariances of `(X₁(u), X₂(u))` with `(X₁(v), X₂(v))`, where
/// `X = X₁ + iX₂ = ∫ e^{ivx} ε(x) dW(x)`. Row index is the component at `u`.
pub fn ito_covariance(noise: &NoiseLevel, u: f64, v: f64) -> Result<[[f64; 2]; 2], CalibrationError> {
    let cm = noise.cos_transform(u - v)?;
    let cp = noise.cos_transform(u + v)?;
    let s_sum = noise.sin_transform(u + v)?;
    let s_diff = noise.sin_transform(u - v)?;
    // cos·cos, sin·sin and cos·sin through product-to-sum identities
    Ok([
        [0.5 * (cm + cp), 0.5 * (s_sum - s_diff)],
        [0.5 * (s_sum + s_diff), 0.5 * (cm - cp)],
    ])
}

/// Minimum of `g(v, φ) = ∫ sin²(φ + vx) ε(x)² dx` over `I_V × [0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub v_max: f64,
    /// Grid search over `(v, φ)` plus coordinate refinement.
    pub lambda: f64,
    pub v_star: f64,
    pub phi_star: f64,
    /// Smallest eigenvalue of the 2×2 covariance at `v`, minimized over `v`.
    pub lambda_eigen: f64,
    pub v_star_eigen: f64,
    /// Both minima agree to 1e−8.
    pub agree: bool,
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `λ_V` by a `n_v × n_phi` grid search with refinement, cross-checked
/// against the eigenvalue route. By `g(−v, φ) = g(v, −φ)` and π-periodicity
/// in φ, searching `v ∈ [1/V, V]`, `φ ∈ [0, π)` covers the whole domain.
pub fn lambda_min_on_iv(
    noise: &NoiseLevel,
    v_max: f64,
    n_v: usize,
    n_phi: usize,
) -> Result<LambdaReport, CalibrationError> {
    if !(v_max > 1.0 && v_max.is_finite()) {
        return Err(CalibrationError::BadGrid(format!("V = {v_max} must exceed 1")));
    }
    if n_v < 2 || n_phi < 2 {
        return Err(CalibrationError::BadGrid(
            "grid search needs at least 2×2 points".into(),
        ));
    }
    let c0 = noise.total_mass()?;
    let lo = 1.0 / v_max;
    let hv = (v_max - lo) / (n_v - 1) as f64;
    let vs: Vec<f64> = (0..n_v).map(|i| lo + hv * i as f64).collect();
    let cs: Vec<(f64, f64)> = vs
        .par_iter()
        .map(|v| Ok((noise.cos_transform(2.0 * v)?, noise.sin_transform(2.0 * v)?)))
        .collect::<Result<_, CalibrationError>>()?;
    let g_of = |c: f64, s: f64, phi: f64| 0.5 * (c0 - (2.0 * phi).cos() * c + (2.0 * phi).sin() * s);
    let eig_of = |c: f64, s: f64| 0.5 * (c0 - c.hypot(s));
    // failures inside the refinement closures surface as NaN and are reported below
    let cs_at = |v: f64| match (noise.cos_transform(2.0 * v), noise.sin_transform(2.0 * v)) {
        (Ok(c), Ok(s)) => (c, s),
        _ => (f64::NAN, f64::NAN),
    };

    let hphi = PI / n_phi as f64;
    let (mut bi, mut bj, mut best) = (0, 0, f64::INFINITY);
    for (i, &(c, s)) in cs.iter().enumerate() {
        for j in 0..n_phi {
            let g = g_of(c, s, hphi * j as f64);
            if g < best {
                (bi, bj, best) = (i, j, g);
            }
        }
    }
    let mut v = vs[bi];
    let mut phi = hphi * bj as f64;
    for _ in 0..3 {
        let (c, s) = cs_at(v);
        phi = golden_min(|p| g_of(c, s, p), phi - hphi, phi + hphi, 60).0;
        let (a, b) = ((v - hv).max(lo), (v + hv).min(v_max));
        v = golden_min(
            |x| {
                let (c, s) = cs_at(x);
                g_of(c, s, phi)
            },
            a,
            b,
            60,
        )
        .0;
    }
    let (c, s) = cs_at(v);
    let mut lambda = g_of(c, s, phi);
    let mut v_star = v;
    // golden search never evaluates the bracket ends; keep the grid optimum if better
    if best < lambda {
        lambda = best;
        v_star = vs[bi];
        phi = hphi * bj as f64;
    }

    let (ei, _) = cs
        .iter()
        .enumerate()
        .map(|(i, &(c, s))| (i, eig_of(c, s)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let (a, b) = ((vs[ei] - hv).max(lo), (vs[ei] + hv).min(v_max));
    let (mut v_eig, mut lambda_eigen) = golden_min(
        |x| {
            let (c, s) = cs_at(x);
            eig_of(c, s)
        },
        a,
        b,
        80,
    );
    let grid_eig = eig_of(cs[ei].0, cs[ei].1);
    if grid_eig < lambda_eigen {
        lambda_eigen = grid_eig;
        v_eig = vs[ei];
    }
    if !(lambda.is_finite() && lambda_eigen.is_finite()) {
        return Err(CalibrationError::Quadrature {
            what: "eigenvalue refinement",
            error: f64::NAN,
        });
    }
    Ok(LambdaReport {
        v_max,
        lambda,
        v_star,
        phi_star: phi.rem_euclid(PI),
        lambda_eigen,
        v_star_eigen: v_eig,
        agree: (lambda - lambda_eigen).abs() <= 1e-8,
    })
}

/// Exact sampler of `X(v)` on a frequency grid.
///
/// Only `v ≥ 0` is simulated: `X₁(0)` and `(X₁(v), X₂(v))` for `v > 0`
/// (`X₂(0) ≡ 0`); negative frequencies follow from `X(−v) = conj(X(v))`,
/// which holds because `W` is real.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    grid: FrequencyGrid,
    chol_l: DMatrix<f64>,
    jitter: f64,
}

impl SpectralSampler {
    pub fn new(noise: &NoiseLevel, grid: &FrequencyGrid) -> Result<Self, CalibrationError> {
        let cov = half_covariance(noise, grid)?;
        let (chol, jitter) = factor_with_jitter(&cov)?;
        Ok(Self {
            grid: grid.clone(),
            chol_l: chol.l(),
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Applies `f(replicate, path)` to `n` replicates in order; the path is on
    /// [`FrequencyGrid::points`]. The result is independent of the worker count.
    pub fn map_replicates<T, F>(&self, master: u64, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[Complex64]) -> T + Sync,
    {
        let dim = self.chol_l.nrows();
        let kp = self.grid.positive_len();
        let anchor = self.grid.anchor();
        let chunks: Vec<usize> = (0..n.div_ceil(CHUNK)).collect();
        let nested: Vec<Vec<T>> = chunks
            .par_iter()
            .map(|&ci| {
                let start = ci * CHUNK;
                let count = CHUNK.min(n - start);
                let mut z = DMatrix::<f64>::zeros(dim, count);
                for r in 0..count {
                    let mut rng = replicate_rng(master, (start + r) as u64, NOISE_STREAM);
                    for i in 0..dim {
                        z[(i, r)] = rng.sample(StandardNormal);
                    }
                }
                let y = &self.chol_l * z;
                let mut path = vec![Complex64::new(0.0, 0.0); 1 + 2 * kp];
                (0..count)
                    .map(|r| {
                        path[anchor] = Complex64::new(y[(0, r)], 0.0);
                        for j in 0..kp {
                            let x = Complex64::new(y[(1 + 2 * j, r)], y[(2 + 2 * j, r)]);
                            path[anchor + 1 + j] = x;
                            path[anchor - 1 - j] = x.conj();
                        }
                        f(start + r, &path)
                    })
                    .collect()
            })
            .collect();
        nested.into_iter().flatten().collect()
    }
}

/// Covariance of `(X₁(0), X₁(v₁), X₂(v₁), X₁(v₂), …)` over the positive half.
fn half_covariance(noise: &NoiseLevel, grid: &FrequencyGrid) -> Result<DMatrix<f64>, CalibrationError> {
    // every u ± v is a lattice multiple, so C and S are tabulated once
    let m_max = 2 * grid.k_max as usize;
    let table: Vec<(f64, f64)> = (0..=m_max)
        .into_par_iter()
        .map(|m| {
            let w = m as f64 * grid.step;
            Ok((noise.cos_transform(w)?, noise.sin_transform(w)?))
        })
        .collect::<Result<_, CalibrationError>>()?;
    let c = |m: i64| table[m.unsigned_abs() as usize].0;
    let s = |m: i64| m.signum() as f64 * table[m.unsigned_abs() as usize].1;
    // (lattice index, component) per row
    let mut rows = vec![(0i64, 0u8)];
    for k in grid.k_min..=grid.k_max {
        rows.push((k, 0));
        rows.push((k, 1));
    }
    let n = rows.len();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for (i, &(ku, cu)) in rows.iter().enumerate() {
        for (j, &(kv, cv)) in rows.iter().enumerate().take(i + 1) {
            let val = match (cu, cv) {
                (0, 0) => 0.5 * (c(ku - kv) + c(ku + kv)),
                (1, 1) => 0.5 * (c(ku - kv) - c(ku + kv)),
                // Cov(X₁(u), X₂(v)) = ½[S(v+u) + S(v−u)]
                (0, 1) => 0.5 * (s(kv + ku) + s(kv - ku)),
                _ => 0.5 * (s(ku + kv) + s(ku - kv)),
            };
            cov[(i, j)] = val;
            cov[(j, i)] = val;
        }
    }
    Ok(cov)
}

/// Seeded draws of `X(v)` on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPaths {
    pub v: Vec<f64>,
    pub seed: u64,
    pub n_samples: usize,
    /// Layout `[replicate][grid point]`.
    pub values: Vec<Complex64>,
}

impl SpectralPaths {
    pub fn path(&self, replicate: usize) -> &[Complex64] {
        let g = self.v.len();
        &self.values[replicate * g..(replicate + 1) * g]
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }
}

pub fn simulate_spectral_noise(
    noise: &NoiseLevel,
    grid: &FrequencyGrid,
    n_samples: usize,
    seed: u64,
) -> Result<SpectralPaths, CalibrationError> {
    let sampler = SpectralSampler::new(noise, grid)?;
    let values = sampler
        .map_replicates(seed, n_samples, |_, p| p.to_vec())
        .into_iter()
        .flatten()
        .collect();
    Ok(SpectralPaths {
        v: grid.points(),
        seed,
        n_samples,
        values,
    })
}
