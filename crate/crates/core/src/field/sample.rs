use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{factor_with_jitter, FieldError, FieldModel, Grid};
use crate::seed::{derive_seed, replicate_rng, FIELD_STREAM};

/// Replicates drawn per matrix product. Fixed so the arithmetic performed for
/// a replicate never depends on the number of worker threads.
const CHUNK: usize = 64;

/// Exact sampler for a field model on a fixed set of points.
///
/// The scalar kernel matrix is factorized once; each replicate draws `m`
/// independent standard normal vectors from its own seeded stream, colours them
/// with the Cholesky factor and mixes them with `A`.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    model: FieldModel,
    n_points: usize,
    chol_l: DMatrix<f64>,
    mixing: DMatrix<f64>,
    jitter: f64,
}

impl FieldSampler {
    pub fn new(model: &FieldModel, points: &[Vec<f64>]) -> Result<Self, FieldError> {
        if points.is_empty() {
            return Err(FieldError::EmptyGrid);
        }
        for p in points {
            model.hurst.check_dim(p.len())?;
        }
        if points.len() > super::MAX_DENSE_ROWS {
            return Err(FieldError::GridTooLarge(points.len(), super::MAX_DENSE_ROWS));
        }
        let k = model.kernel_matrix(points);
        let (chol, jitter) = factor_with_jitter(&k)?;
        Ok(Self {
            model: model.clone(),
            n_points: points.len(),
            chol_l: chol.l(),
            mixing: model.mixing_matrix(),
            jitter,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Relative diagonal jitter used in the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Draws replicates `start..start+count`; the layout is
    /// `[replicate][point][component]`.
    fn draw_chunk(&self, master: u64, start: usize, count: usize) -> Vec<f64> {
        let g = self.n_points;
        let m = self.mixing.ncols();
        let d = self.mixing.nrows();
        let mut z = DMatrix::<f64>::zeros(g, count * m);
        for r in 0..count {
            let mut rng = replicate_rng(master, (start + r) as u64, FIELD_STREAM);
            for c in 0..m {
                let mut col = z.column_mut(r * m + c);
                for i in 0..g {
                    col[i] = rng.sample(StandardNormal);
                }
            }
        }
        let y = &self.chol_l * z;
        let mut out = vec![0.0; count * g * d];
        for r in 0..count {
            for i in 0..g {
                for a in 0..d {
                    let mut acc = 0.0;
                    for c in 0..m {
                        acc += self.mixing[(a, c)] * y[(i, r * m + c)];
                    }
                    out[(r * g + i) * d + a] = acc;
                }
            }
        }
        out
    }

    /// Applies `f(replicate, values)` to each of `n` replicates and returns the
    /// results in replicate order. `values` has layout `[point][component]`.
    pub fn map_replicates<T, F>(&self, master: u64, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync,
    {
        let stride = self.n_points * self.dim();
        let chunks: Vec<usize> = (0..n.div_ceil(CHUNK)).collect();
        let nested: Vec<Vec<T>> = chunks
            .par_iter()
            .map(|&ci| {
                let start = ci * CHUNK;
                let count = CHUNK.min(n - start);
                let block = self.draw_chunk(master, start, count);
                (0..count)
                    .map(|r| f(start + r, &block[r * stride..(r + 1) * stride]))
                    .collect()
            })
            .collect();
        nested.into_iter().flatten().collect()
    }
}

/// Seeded Monte Carlo draws of a field on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePathSet {
    pub model: FieldModel,
    pub grid_hash: String,
    pub seed: u64,
    pub n_samples: usize,
    pub n_points: usize,
    pub dim: usize,
    /// Layout `[replicate][point][component]`.
    pub values: Vec<f64>,
}

impl SamplePathSet {
    /// Values of one replicate, layout `[point][component]`.
    pub fn path(&self, replicate: usize) -> &[f64] {
        let stride = self.n_points * self.dim;
        &self.values[replicate * stride..(replicate + 1) * stride]
    }

    pub fn value(&self, replicate: usize, point: usize) -> &[f64] {
        let p = self.path(replicate);
        &p[point * self.dim..(point + 1) * self.dim]
    }

    /// Seed of the stream that produced `replicate`.
    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        derive_seed(self.seed, replicate as u64, FIELD_STREAM)
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }
}

/// Draws `n_samples` replicates of `model` on `grid`; output depends only on
/// `(model, grid, n_samples, seed)`.
pub fn sample_paths(model: &FieldModel, grid: &Grid, n_samples: usize, seed: u64) -> Result<SamplePathSet, FieldError> {
    let sampler = FieldSampler::new(model, grid.points())?;
    let values: Vec<f64> = sampler
        .map_replicates(seed, n_samples, |_, v| v.to_vec())
        .into_iter()
        .flatten()
        .collect();
    Ok(SamplePathSet {
        model: model.clone(),
        grid_hash: grid.hash(),
        seed,
        n_samples,
        n_points: grid.len(),
        dim: model.dim(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::HurstVector;

    fn model() -> FieldModel {
        FieldModel::new(
            HurstVector::new(vec![0.5]).unwrap(),
            vec![vec![1.0, 0.0], vec![1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_samples() {
        let g = Grid::uniform_1d(0.0, 1.0, 5).unwrap();
        let s = sample_paths(&model(), &g, 0, 1).unwrap();
        assert!(s.is_empty() && s.values.is_empty());
    }

    #[test]
    fn deterministic_and_thread_invariant() {
        let g = Grid::uniform_1d(0.0, 1.0, 17).unwrap();
        let a = sample_paths(&model(), &g, 150, 99).unwrap();
        let b = sample_paths(&model(), &g, 150, 99).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| sample_paths(&model(), &g, 150, 99).unwrap());
        assert_eq!(
            a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            c.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        let d = sample_paths(&model(), &g, 150, 100).unwrap();
        assert_ne!(a.values, d.values);
    }

    #[test]
    fn replicate_prefix_is_stable() {
        let g = Grid::uniform_1d(0.0, 1.0, 9).unwrap();
        let short = sample_paths(&model(), &g, 10, 5).unwrap();
        let long = sample_paths(&model(), &g, 200, 5).unwrap();
        for r in 0..10 {
            for (x, y) in short.path(r).iter().zip(long.path(r)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empirical_mean_near_zero() {
        let g = Grid::uniform_1d(0.0, 1.0, 4).unwrap();
        let n = 20_000;
        let s = sample_paths(&model(), &g, n, 7).unwrap();
        let aat = model().pointwise_covariance();
        for p in 0..4 {
            for a in 0..2 {
                let mean: f64 = (0..n).map(|r| s.value(r, p)[a]).sum::<f64>() / n as f64;
                let se = (aat[(a, a)] / n as f64).sqrt();
                assert!(mean.abs() < 4.0 * se, "point {p} comp {a}: {mean}");
            }
        }
    }
}
