use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::HittingError;
use crate::field::{FieldError, Grid};
use crate::metric::HurstVector;
use crate::seed::{replicate_rng, DRIFT_STREAM};

/// Drift functions `f : I → ℝ^d` that are `L`-Lipschitz for ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LipschitzDrift {
    Zero {},
    /// `f(s) = offset + L·ρ(anchor, s)·direction`, `direction` a unit vector.
    AffineRho {
        lipschitz: f64,
        anchor: Vec<f64>,
        direction: Vec<f64>,
        offset: Vec<f64>,
    },
    /// Per replicate, `f(s) = b + L Σ_k λ_k ρ(s, p_k) e_k` with `Σ λ_k = 1`,
    /// anchors `p_k` uniform on the grid's bounding box, unit vectors `e_k`
    /// and offset `b` uniform on `[-offset_scale, offset_scale]^d`. Drawn from
    /// the drift stream, hence independent of the field.
    RandomField {
        lipschitz: f64,
        terms: usize,
        offset_scale: f64,
    },
}

impl LipschitzDrift {
    /// `f(s) = L·ρ(anchor, s)·e` with `e` normalized here.
    pub fn affine_rho(lipschitz: f64, anchor: Vec<f64>, direction: Vec<f64>) -> Self {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        let offset = vec![0.0; direction.len()];
        LipschitzDrift::AffineRho {
            lipschitz,
            anchor,
            direction: direction.iter().map(|x| x / norm).collect(),
            offset,
        }
    }

    /// Claimed Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            LipschitzDrift::Zero {} => 0.0,
            LipschitzDrift::AffineRho { lipschitz, .. } | LipschitzDrift::RandomField { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, LipschitzDrift::RandomField { .. })
    }

    /// Checks parameters against output dimension `d` and index dimension `n`.
    pub fn validate(&self, d: usize, n: usize) -> Result<(), HittingError> {
        let bad = |msg: String| Err(HittingError::BadDrift(msg));
        let l = self.lipschitz();
        if !(l >= 0.0 && l.is_finite()) {
            return bad(format!("Lipschitz constant must be finite and ≥ 0, got {l}"));
        }
        match self {
            LipschitzDrift::Zero {} => Ok(()),
            LipschitzDrift::AffineRho {
                anchor,
                direction,
                offset,
                ..
            } => {
                if anchor.len() != n {
                    return bad(format!(
                        "anchor has {} coordinates, index dimension is {n}",
                        anchor.len()
                    ));
                }
                if direction.len() != d || offset.len() != d {
                    return bad(format!("direction and offset need {d} components"));
                }
                let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return bad(format!("direction must be a unit vector, norm is {norm}"));
                }
                Ok(())
            }
            LipschitzDrift::RandomField {
                terms, offset_scale, ..
            } => {
                if *terms == 0 {
                    return bad("random drift needs at least one term".into());
                }
                if !(*offset_scale >= 0.0 && offset_scale.is_finite()) {
                    return bad(format!("offset_scale must be finite and ≥ 0, got {offset_scale}"));
                }
                Ok(())
            }
        }
    }

    /// Values on `points`, layout `[point][component]`. Deterministic drifts
    /// ignore `(master, replicate)`.
    pub fn realize(
        &self,
        points: &[Vec<f64>],
        h: &HurstVector,
        d: usize,
        master: u64,
        replicate: u64,
    ) -> Result<Vec<f64>, HittingError> {
        let n = h.dim();
        self.validate(d, n)?;
        for p in points {
            h.check_dim(p.len())?;
        }
        let mut out = vec![0.0; points.len() * d];
        match self {
            LipschitzDrift::Zero {} => {}
            LipschitzDrift::AffineRho {
                lipschitz,
                anchor,
                direction,
                offset,
            } => {
                for (i, p) in points.iter().enumerate() {
                    let rho = h.distance_unchecked(anchor, p);
                    for a in 0..d {
                        out[i * d + a] = offset[a] + lipschitz * rho * direction[a];
                    }
                }
            }
            LipschitzDrift::RandomField {
                lipschitz,
                terms,
                offset_scale,
            } => {
                if points.is_empty() {
                    return Ok(out);
                }
                let lo: Vec<f64> = (0..n)
                    .map(|j| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min))
                    .collect();
                let hi: Vec<f64> = (0..n)
                    .map(|j| points.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                let mut rng = replicate_rng(master, replicate, DRIFT_STREAM);
                let offset: Vec<f64> = (0..d)
                    .map(|_| offset_scale * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                let raw: Vec<f64> = (0..*terms).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = raw.iter().sum();
                let mut anchors = Vec::with_capacity(*terms);
                let mut dirs = Vec::with_capacity(*terms);
                for _ in 0..*terms {
                    anchors.push(
                        (0..n)
                            .map(|j| lo[j] + (hi[j] - lo[j]) * rng.random::<f64>())
                            .collect::<Vec<_>>(),
                    );
                    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                    dirs.push(g.into_iter().map(|x| x / norm).collect::<Vec<_>>());
                }
                for (i, p) in points.iter().enumerate() {
                    out[i * d..(i + 1) * d].copy_from_slice(&offset);
                    for k in 0..*terms {
                        let w = lipschitz * raw[k] / total * h.distance_unchecked(&anchors[k], p);
                        for a in 0..d {
                            out[i * d + a] += w * dirs[k][a];
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Result of a Lipschitz check on grid pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    pub max_ratio: f64,
    pub ok: bool,
}

/// Largest `‖f(s) − f(t)‖ / ρ(s, t)` over grid pairs, for values laid out
/// `[point][component]`; `ok` iff the ratio is at most `claimed·(1 + 1e−9)`.
pub fn lipschitz_check_values(
    values: &[f64],
    d: usize,
    grid: &Grid,
    h: &HurstVector,
    claimed: f64,
) -> Result<LipschitzCheck, HittingError> {
    let pts = grid.points();
    if pts.len() < 2 {
        return Err(FieldError::TooFewPoints {
            need: 2,
            have: pts.len(),
        }
        .into());
    }
    h.check_dim(grid.dim())?;
    if values.len() != pts.len() * d {
        return Err(crate::metric::MetricError::DimensionMismatch {
            expected: pts.len() * d,
            got: values.len(),
        }
        .into());
    }
    let mut max_ratio: f64 = 0.0;
    for i in 0..pts.len() {
        for j in 0..i {
            let rho = h.distance_unchecked(&pts[i], &pts[j]);
            if rho == 0.0 {
                continue;
            }
            let sq: f64 = (0..d).map(|a| (values[i * d + a] - values[j * d + a]).powi(2)).sum();
            max_ratio = max_ratio.max(sq.sqrt() / rho);
        }
    }
    Ok(LipschitzCheck {
        max_ratio,
        ok: max_ratio <= claimed * (1.0 + 1e-9),
    })
}

/// Lipschitz check of one realization of `f` (replicate `replicate` of
/// `master` for random drifts) against its claimed constant.
pub fn lipschitz_verify(
    f: &LipschitzDrift,
    grid: &Grid,
    h: &HurstVector,
    d: usize,
    master: u64,
    replicate: u64,
) -> Result<LipschitzCheck, HittingError> {
    let values = f.realize(grid.points(), h, d, master, replicate)?;
    lipschitz_check_values(&values, d, grid, h, f.lipschitz())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        let mut pts = Vec::new();
        for i in 0..9 {
            for j in 0..7 {
                pts.push(vec![i as f64 / 8.0, j as f64 / 6.0]);
            }
        }
        Grid::from_points(pts).unwrap()
    }

    #[test]
    fn constant_drift_has_zero_ratio() {
        let h = HurstVector::new(vec![0.4, 0.9]).unwrap();
        let g = grid2();
        let c = lipschitz_verify(&LipschitzDrift::Zero {}, &g, &h, 3, 0, 0).unwrap();
        assert_eq!(c.max_ratio, 0.0);
        assert!(c.ok);
        let shifted = LipschitzDrift::AffineRho {
            lipschitz: 0.0,
            anchor: vec![0.0, 0.0],
            direction: vec![1.0, 0.0, 0.0],
            offset: vec![5.0, -1.0, 2.0],
        };
        let c = lipschitz_verify(&shifted, &g, &h, 3, 0, 0).unwrap();
        assert_eq!(c.max_ratio, 0.0);
        assert!(c.ok);
    }

    #[test]
    fn affine_in_rho_is_within_constant() {
        let h = HurstVector::new(vec![0.3, 0.7]).unwrap();
        let f = LipschitzDrift::affine_rho(2.5, vec![0.3, 0.4], vec![1.0, 2.0]);
        let c = lipschitz_verify(&f, &grid2(), &h, 2, 0, 0).unwrap();
        assert!(c.ok, "{c:?}");
        assert!(c.max_ratio <= 2.5 * (1.0 + 1e-12));
        // the anchor is not a grid point, so the bound is nearly but not exactly attained
        assert!(c.max_ratio > 1.0);
    }

    #[test]
    fn random_drift_is_lipschitz_and_seeded() {
        let h = HurstVector::new(vec![0.5, 0.8]).unwrap();
        let f = LipschitzDrift::RandomField {
            lipschitz: 1.5,
            terms: 4,
            offset_scale: 0.5,
        };
        let g = grid2();
        for rep in 0..20 {
            let c = lipschitz_verify(&f, &g, &h, 2, 99, rep).unwrap();
            assert!(c.ok, "{c:?}");
        }
        let a = f.realize(g.points(), &h, 2, 99, 3).unwrap();
        let b = f.realize(g.points(), &h, 2, 99, 3).unwrap();
        let other = f.realize(g.points(), &h, 2, 99, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn violation_is_detected() {
        let h = HurstVector::new(vec![0.5]).unwrap();
        let g = Grid::uniform_1d(0.0, 1.0, 11).unwrap();
        // jump of 1 between neighbours at ρ = √0.1 ≈ 0.316
        let mut v = vec![0.0; 11];
        v[10] = 1.0;
        let c = lipschitz_check_values(&v, 1, &g, &h, 3.0).unwrap();
        assert!(!c.ok);
        assert!((c.max_ratio - 0.1f64.sqrt().recip()).abs() < 1e-12);
    }

    #[test]
    fn bad_parameters_rejected() {
        let h = HurstVector::new(vec![0.5]).unwrap();
        let f = LipschitzDrift::AffineRho {
            lipschitz: 1.0,
            anchor: vec![0.0],
            direction: vec![1.0, 1.0],
            offset: vec![0.0, 0.0],
        };
        assert!(f.realize(&[vec![0.0]], &h, 2, 0, 0).is_err());
        let f = LipschitzDrift::RandomField {
            lipschitz: -1.0,
            terms: 1,
            offset_scale: 0.0,
        };
        assert!(f.validate(2, 1).is_err());
        let g = Grid::from_points(vec![vec![0.0]]).unwrap();
        assert!(lipschitz_check_values(&[0.0], 1, &g, &h, 1.0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f = LipschitzDrift::RandomField {
            lipschitz: 1.0,
            terms: 3,
            offset_scale: 0.25,
        };
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"kind\":\"random-field\""));
        let back: LipschitzDrift = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let z: LipschitzDrift = serde_json::from_str(r#"{"kind":"zero"}"#).unwrap();
        assert_eq!(z, LipschitzDrift::Zero {});
    }
}
