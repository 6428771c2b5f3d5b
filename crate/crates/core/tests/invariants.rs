use num_complex::Complex64;
use proptest::prelude::*;

use polarfield::calibration::{
    distinguished_log, ito_covariance, psi_from_noise, FrequencyGrid, LogOptions, NoiseLevel, OptionModel, OptionShape,
    SpectralSampler,
};
use polarfield::field::{sample_paths, FieldModel, Grid};
use polarfield::metric::{
    chaining_series_bound, covering_number_upper, grid_cover, hausdorff_premeasure, AxisBox, EuclideanBall,
    HurstVector, IndexSet,
};

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / 2f64.sqrt())
}

/// Kolmogorov–Smirnov statistic `√n·D` of a sample against N(0, σ²).
fn ks_normal(mut xs: Vec<f64>, sigma: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal_cdf(x / sigma);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    n.sqrt() * d
}

#[test]
fn field_coordinates_look_gaussian() {
    let model = FieldModel::new(
        HurstVector::new(vec![0.6]).unwrap(),
        vec![vec![1.0, 0.0], vec![1.0, 1.0]],
    )
    .unwrap();
    let grid = Grid::uniform_1d(0.0, 1.0, 4).unwrap();
    let paths = sample_paths(&model, &grid, 20_000, 123).unwrap();
    let sd = [1.0, 2f64.sqrt()];
    for point in 0..4 {
        for (comp, &sigma) in sd.iter().enumerate() {
            let xs: Vec<f64> = (0..20_000).map(|r| paths.value(r, point)[comp]).collect();
            // asymptotic 1e−3 critical value of √n·D
            let stat = ks_normal(xs, sigma);
            assert!(stat < 1.949, "point {point} component {comp}: {stat}");
        }
    }
}

#[test]
fn ito_isometry_closure_on_grid() {
    for noise in [
        NoiseLevel::power_law(1.5, 1.5).unwrap(),
        NoiseLevel::bump(1.5, 2.0).unwrap(),
    ] {
        let mass = noise.total_mass().unwrap();
        for v in FrequencyGrid::new(10.0, 0.25).unwrap().points() {
            let c = ito_covariance(&noise, v, v).unwrap();
            assert!((c[0][0] + c[1][1] - mass).abs() <= 1e-8, "v = {v}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn covers_valid_and_within_bound(
        h in prop::collection::vec(0.3f64..=1.0, 1..=2),
        r in 0.05f64..0.5,
        lo in -1.0f64..1.0,
        side in 0.2f64..1.5,
    ) {
        let h = HurstVector::new(h).unwrap();
        let n = h.dim();
        let b = AxisBox::new(vec![lo; n], vec![lo + side; n]).unwrap();
        let big = b.enclosing_rho_radius(&h);
        let set = IndexSet::single(b);
        let cover = grid_cover(&set, r, &h).unwrap();
        prop_assert!(cover.verify(&set, 2_000).ok);
        if r <= big {
            prop_assert!(cover.count() <= covering_number_upper(big, r, &h).unwrap());
        }
        prop_assert!(cover.count() <= cover.c8 * r.powf(-h.anisotropy_index()) * (1.0 + 1e-12));
    }

    #[test]
    fn chaining_partial_sums_monotone_in_k_max(
        beta in 1.0f64..80.0,
        lip in 0.0f64..5.0,
        q in 0.5f64..3.0,
        k in 3u32..20,
    ) {
        let short = chaining_series_bound(beta, lip, 1.0, 2, q, k).unwrap();
        let long = chaining_series_bound(beta, lip, 1.0, 2, q, k + 5).unwrap();
        prop_assert!(long.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(&long.partial_sums[..short.partial_sums.len()], &short.partial_sums[..]);
        if long.converges {
            prop_assert!(long.partial_sum.is_finite());
        }
    }

    #[test]
    fn premeasure_homogeneous(
        radii in prop::collection::vec(0.01f64..2.0, 1..6),
        alpha in 0.1f64..3.0,
        k in 0i32..4,
    ) {
        // powers of two keep the scaling exact
        let lambda = 2f64.powi(k);
        let balls: Vec<EuclideanBall> = radii.iter().map(|&r| EuclideanBall::new(vec![0.0, 0.0], r)).collect();
        let scaled: Vec<EuclideanBall> = radii.iter().map(|&r| EuclideanBall::new(vec![0.0, 0.0], lambda * r)).collect();
        let a = hausdorff_premeasure(&balls, alpha).unwrap();
        let b = hausdorff_premeasure(&scaled, alpha).unwrap();
        prop_assert!((b - lambda.powf(alpha) * a).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn field_draws_are_bit_identical(seed in any::<u64>(), h in 0.2f64..1.0) {
        let model = FieldModel::new(HurstVector::new(vec![h]).unwrap(), vec![vec![2.0, 0.5]]).unwrap();
        let grid = Grid::uniform_1d(0.0, 1.0, 7).unwrap();
        let a = sample_paths(&model, &grid, 70, seed).unwrap();
        let b = sample_paths(&model, &grid, 70, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn distinguished_log_inverts_exp(
        phase_speed in -30.0f64..30.0,
        wobble in 0.0f64..0.5,
        n in 50usize..400,
    ) {
        // a winding path with value 1 at its anchor
        let anchor = n / 2;
        let path: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = (k as f64 - anchor as f64) / n as f64;
                let m = 1.0 + wobble * (3.0 * t).sin();
                Complex64::from_polar(m, phase_speed * t)
            })
            .collect();
        prop_assume!((path[anchor] - 1.0).norm() == 0.0);
        let log = distinguished_log(&path, anchor, LogOptions::default()).unwrap();
        for (l, z) in log.iter().zip(&path) {
            prop_assert!((l.exp() - z).norm() <= 1e-12 * z.norm());
        }
        // the winding is kept, not folded back into (−π, π]
        let end = log[n - 1].im - log[0].im;
        prop_assert!((end - phase_speed * (n - 1) as f64 / n as f64).abs() < 1e-9);
    }

    #[test]
    fn psi_halves_when_maturity_doubles(seed in any::<u64>(), scale in 0.0f64..0.2, t in 0.25f64..4.0) {
        let noise = NoiseLevel::power_law(1.5, 1.5).unwrap();
        let grid = FrequencyGrid::new(4.0, 0.05).unwrap();
        let x = SpectralSampler::new(&noise, &grid).unwrap().map_replicates(seed, 1, |_, p| p.to_vec()).remove(0);
        let one = OptionModel::new(OptionShape::ExpAbs, t).unwrap();
        let two = OptionModel::new(OptionShape::ExpAbs, 2.0 * t).unwrap();
        let a = psi_from_noise(&one, &grid, Some(&x), scale, seed, LogOptions::default()).unwrap();
        let b = psi_from_noise(&two, &grid, Some(&x), scale, seed, LogOptions::default()).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            prop_assert_eq!(*q, *p * 0.5);
        }
    }
}
