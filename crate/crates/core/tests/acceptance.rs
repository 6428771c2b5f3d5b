//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde_json::json;

use polarfield::calibration::{
    holder_bound_check, lambda_min_on_iv, psi_batch, psi_from_noise, FrequencyGrid, LogOptions, NoiseLevel, OptionModel,
};
use polarfield::experiment::{run_experiment, ExperimentConfig, ExperimentKind, REPORT_FILE, RESULTS_FILE};
use polarfield::field::{modulus_statistic, sample_paths, verify_condition1, verify_condition2, FieldModel, Grid};
use polarfield::hitting::{hitting_scan, polarity_scan, HittingScan, LipschitzDrift, McOptions};
use polarfield::metric::{
    chaining_series_bound, covering_number_upper, entropy_integral_closed_form, grid_cover, HurstVector, IndexSet,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hv(h: &[f64]) -> HurstVector {
    HurstVector::new(h.to_vec()).unwrap()
}

fn plane_model(h: f64) -> FieldModel {
    FieldModel::new(hv(&[h]), vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap()
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn c1_entropy() -> Outcome {
    let mut worst: f64 = 0.0;
    for x in [0.01f64, 0.05, 0.1, 0.25, 0.45, 0.9, 1.0] {
        // y = exp(−u²) turns the integral into ∫_{√log(1/x)}^∞ 2u² e^{−u²} du, smooth and fast decaying
        let s = (-x.ln()).max(0.0).sqrt();
        let oracle = simpson(|u| 2.0 * u * u * (-u * u).exp(), s, s + 12.0, 40_000);
        let cf = entropy_integral_closed_form(x).map_err(|e| e.to_string())?;
        worst = worst.max((cf - oracle).abs());
    }
    let at_one = (entropy_integral_closed_form(1.0).unwrap() - 0.5 * PI.sqrt()).abs();
    check(
        worst <= 1e-8 && at_one <= 1e-6,
        format!("max |closed form − quadrature| = {worst:.2e}, |I(1) − √π/2| = {at_one:.2e}"),
    )
}

fn c2_covering() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for h in [vec![1.0], vec![0.5], vec![0.75, 0.75]] {
        let h = hv(&h);
        let set = IndexSet::unit_cube(h.dim());
        let big = set.boxes[0].enclosing_rho_radius(&h);
        let q = h.anisotropy_index();
        for k in 1..=6 {
            let r = 0.5f64.powi(k);
            let cover = grid_cover(&set, r, &h).map_err(|e| e.to_string())?;
            let valid = cover.verify(&set, 10_000);
            let upper = covering_number_upper(big, r, &h).map_err(|e| e.to_string())?;
            let count = cover.count();
            // independent brute force over every center where that is cheap
            let brute_ok = if count <= 4096.0 {
                let centers: Vec<Vec<f64>> = cover.centers().collect();
                let n = h.dim();
                let side: usize = if n == 1 { 2000 } else { 45 };
                (0..side.pow(n as u32)).all(|flat| {
                    let p: Vec<f64> = (0..n)
                        .map(|j| ((flat / side.pow(j as u32)) % side) as f64 / (side - 1) as f64)
                        .collect();
                    centers
                        .iter()
                        .map(|c| {
                            p.iter()
                                .zip(c)
                                .zip(h.as_slice())
                                .map(|((a, b), e)| (a - b).abs().powf(*e))
                                .sum::<f64>()
                        })
                        .fold(f64::INFINITY, f64::min)
                        <= r * (1.0 + 1e-12)
                })
            } else {
                true
            };
            let good = valid.ok && brute_ok && count <= upper && count <= cover.c8 * r.powf(-q);
            if !good {
                notes.push(format!(
                    "H={:?} r={r}: count {count}, upper {upper}, valid {}",
                    h.as_slice(),
                    valid.ok
                ));
            }
            ok &= good;
        }
    }
    check(
        ok,
        if ok {
            "18 covers valid and within both bounds".into()
        } else {
            notes.join("; ")
        },
    )
}

fn c3_chaining() -> Outcome {
    let star = 768f64.sqrt();
    let s = |beta: f64| chaining_series_bound(beta, 0.0, 1.0, 2, 4.0 / 3.0, 30).unwrap();
    let at28 = s(28.0);
    let flips =
        at28.converges && !s(27.0).converges && s(star * (1.0 + 1e-9)).converges && !s(star * (1.0 - 1e-9)).converges;
    let monotone = at28.partial_sums.windows(2).all(|w| w[1] >= w[0]);
    let bounded = at28.partial_sum.is_finite() && !at28.overflowed;
    let tail = at28.partial_sums[at28.partial_sums.len() - 1] - at28.partial_sums[at28.partial_sums.len() - 2];
    check(
        flips && monotone && bounded && (at28.threshold_beta - star).abs() < 1e-9,
        format!(
            "threshold {:.6} (√768 = {star:.6}), sum at 28 = {:.6e}, last increment {tail:.1e}",
            at28.threshold_beta, at28.partial_sum
        ),
    )
}

fn c4_field() -> Outcome {
    let model = FieldModel::new(hv(&[0.5]), vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let grid = Grid::uniform_1d(0.0, 1.0, 10).map_err(|e| e.to_string())?;
    let n = 20_000;
    let paths = sample_paths(&model, &grid, n, 4).map_err(|e| e.to_string())?;
    let pts = grid.points();
    // AAᵀ = [[1, 1], [1, 2]], k(s, t) = exp(−|s − t|)
    let aat = [[1.0, 1.0], [1.0, 2.0]];
    let cov = |i: usize, j: usize| (-(pts[i / 2][0] - pts[j / 2][0]).abs()).exp() * aat[i % 2][j % 2];
    let mut max_z: f64 = 0.0;
    for i in 0..20 {
        for j in i..20 {
            let emp: f64 = (0..n)
                .map(|r| {
                    let p = paths.path(r);
                    p[i] * p[j]
                })
                .sum::<f64>()
                / n as f64;
            let se = ((cov(i, i) * cov(j, j) + cov(i, j).powi(2)) / n as f64).sqrt();
            max_z = max_z.max((emp - cov(i, j)).abs() / se);
        }
    }
    let c1 = verify_condition1(&model, &grid).map_err(|e| e.to_string())?;
    let c2 = verify_condition2(&model).map_err(|e| e.to_string())?;
    let want = (3.0 - 5f64.sqrt()) / 2.0;
    check(
        max_z <= 5.0 && c1.max_ratio <= 6f64.sqrt() && (c2 - want).abs() <= 1e-12,
        format!(
            "max |z| = {max_z:.2}, condition-1 ratio {:.4} ≤ √6 = {:.4}, λ_min error {:.1e}",
            c1.max_ratio,
            6f64.sqrt(),
            (c2 - want).abs()
        ),
    )
}

fn slope_line(scan: &HittingScan) -> String {
    let r = &scan.report;
    let p: Vec<String> = r.estimates.iter().map(|e| format!("{:.4}", e.p_hat)).collect();
    format!(
        "slope {} ± {:.3} (reference {:.3}), p̂ = [{}]",
        r.fitted_slope.map_or("none".into(), |s| format!("{s:.3}")),
        r.slope_se.unwrap_or(f64::NAN),
        scan.reference_exponent,
        p.join(", ")
    )
}

fn c5_hitting() -> Outcome {
    let model = plane_model(0.75);
    let set = IndexSet::unit_cube(1);
    let opts = McOptions::new(10_000, 5, 1e-3);
    let scan = hitting_scan(
        &model,
        &set,
        &[0.5],
        &[0.2, 0.1, 0.05, 0.025],
        &LipschitzDrift::Zero {},
        opts,
    )
    .map_err(|e| e.to_string())?;
    let slope = scan.report.fitted_slope.unwrap_or(f64::NEG_INFINITY);
    check(slope >= 2.0 - 0.3, slope_line(&scan))
}

fn c6_polarity() -> Outcome {
    let model = plane_model(0.75);
    let set = IndexSet::unit_cube(1);
    let deltas = [0.2, 0.1, 0.05, 0.025];
    let random = LipschitzDrift::RandomField {
        lipschitz: 1.0,
        terms: 3,
        offset_scale: 0.5,
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, drift) in [("zero drift", LipschitzDrift::Zero {}), ("random drift", random)] {
        let scan = polarity_scan(
            &model,
            &set,
            &drift,
            &[0.0, 0.0],
            &deltas,
            McOptions::new(10_000, 6, 1e-3),
        )
        .map_err(|e| e.to_string())?;
        let slope = scan.report.fitted_slope.unwrap_or(f64::NEG_INFINITY);
        ok &= slope >= 0.36 && scan.hits_are_nested();
        lines.push(format!(
            "{name}: {}, nested {}",
            slope_line(&scan),
            scan.hits_are_nested()
        ));
    }
    check(ok, lines.join("; "))
}

fn c7_modulus() -> Outcome {
    let model = plane_model(0.5);
    let grid = Grid::uniform_1d(0.0, 0.25, 2001).map_err(|e| e.to_string())?;
    let paths = sample_paths(&model, &grid, 2000, 7).map_err(|e| e.to_string())?;
    let eps = [0.2, 0.1, 0.05, 0.025];
    let tab = modulus_statistic(&paths, &grid, &model.hurst, &eps).map_err(|e| e.to_string())?;
    let q: Vec<Option<f64>> = (0..eps.len()).map(|k| tab.quantile(k, 0.95)).collect();
    let vals: Vec<f64> = q.iter().flatten().copied().collect();
    if vals.len() != eps.len() {
        return Err(format!("missing scales: {q:?}"));
    }
    let ratio = vals.iter().copied().fold(0.0, f64::max) / vals.iter().copied().fold(f64::INFINITY, f64::min);
    let shown: Vec<String> = vals.iter().map(|v| format!("{v:.3}")).collect();
    check(ratio < 3.0, format!("q95 = [{}], ratio {ratio:.3}", shown.join(", ")))
}

fn c8_calibration() -> Outcome {
    let pl = NoiseLevel::power_law(1.5, 1.5).unwrap();
    // ∫(1+|x|)^{1.5−3} = 2·∫₀^∞ (1+x)^{−3/2} = 4 and ∫(1+|x|)^{−3} = 1
    let tail = pl.tail_integral(1.5).map_err(|e| e.to_string())?;
    let mass = pl.total_mass().map_err(|e| e.to_string())?;
    let lam: Vec<f64> = [2.0, 5.0, 10.0]
        .iter()
        .map(|&v| lambda_min_on_iv(&pl, v, 400, 200).map(|r| r.lambda))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..50).map(|i| -10.0 + 20.0 * i as f64 / 49.0).collect();
    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&u| grid.iter().map(move |&v| (u, v))).collect();
    let mut slack = f64::INFINITY;
    let mut holds = true;
    for noise in [pl, NoiseLevel::bump(2.0, 3.0).unwrap()] {
        let h = holder_bound_check(&noise, &pairs).map_err(|e| e.to_string())?;
        slack = slack.min(h.min_slack);
        holds &= h.ok && h.min_slack >= 0.0;
    }
    check(
        (tail - 4.0).abs() <= 1e-8
            && (mass - 1.0).abs() <= 1e-8
            && lam[2] > 0.0
            && lam[1] <= lam[0]
            && lam[2] <= lam[1]
            && holds,
        format!(
            "tail {:.1e} off, mass {:.1e} off, λ = {lam:.5?}, Hölder min slack {slack:.3e}",
            (tail - 4.0).abs(),
            (mass - 1.0).abs()
        ),
    )
}

fn c9_noiseless() -> Outcome {
    let grid = FrequencyGrid::new(10.0, 0.01).map_err(|e| e.to_string())?;
    let est = psi_from_noise(&OptionModel::exp_abs(), &grid, None, 0.0, 0, LogOptions::default())
        .map_err(|e| e.to_string())?;
    let mut err: f64 = 0.0;
    let mut modulus: f64 = 0.0;
    for ((v, psi), a) in est.v.iter().zip(&est.values).zip(&est.abs_arg) {
        err = err.max((psi - Complex64::new(0.0, 2.0 * v.atan())).norm());
        modulus = modulus.max((a - 1.0).abs());
    }
    let zero = est.values[grid.anchor()];
    check(
        err <= 1e-10 && modulus <= 1e-10 && zero == Complex64::new(0.0, 0.0),
        format!("max |ψ̃ − 2i·atan v| = {err:.2e}, max ||A| − 1| = {modulus:.2e}, ψ̃(0) = {zero}"),
    )
}

fn c10_noisy() -> Outcome {
    let noise = NoiseLevel::power_law(1.5, 1.5).unwrap();
    let grid = FrequencyGrid::new(10.0, 0.01).map_err(|e| e.to_string())?;
    let scales = [1e-3, 1e-2, 1e-1];
    let batch = psi_batch(
        &OptionModel::exp_abs(),
        &noise,
        &grid,
        &scales,
        200,
        10,
        LogOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let counts: Vec<usize> = (0..3)
        .map(|k| batch.verdicts[k].iter().filter(|v| v.well_defined).count())
        .collect();
    let certified = batch.verdicts[0].iter().filter(|v| v.certified).count();
    check(
        batch.all_well_defined(0) && batch.well_definedness_is_monotone(),
        format!(
            "well-defined per scale {counts:?} of 200, certified at 1e−3: {certified}, monotone {}",
            batch.well_definedness_is_monotone()
        ),
    )
}

fn small_params(kind: ExperimentKind) -> serde_json::Value {
    match kind {
        ExperimentKind::MetricCheck => json!({ "radii": [0.5, 0.25, 0.125], "test_points": 500 }),
        ExperimentKind::FieldSim => json!({ "n_samples": 500 }),
        ExperimentKind::HittingScan => json!({ "n_mc": 300 }),
        ExperimentKind::PolarityScan => json!({
            "n_mc": 200,
            "drift": { "kind": "random-field", "lipschitz": 1.0, "terms": 3, "offset_scale": 0.5 }
        }),
        ExperimentKind::ModulusScan => json!({ "n_samples": 40, "step": 1e-3, "eps": [0.2, 0.1, 0.05] }),
        ExperimentKind::ChainingCheck => json!({}),
        ExperimentKind::CalibNoiseless => json!({}),
        ExperimentKind::CalibSim => json!({
            "n_replicates": 20, "n_v": 60, "n_phi": 40, "holder_grid": 10, "lambda_v": [2.0, 10.0]
        }),
    }
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    for kind in ExperimentKind::ALL {
        let mut runs = Vec::new();
        for (tag, workers) in [("a", 1), ("b", 1), ("c", 4)] {
            let mut config = ExperimentConfig::new(kind, 11);
            config.params = small_params(kind);
            config.workers = Some(workers);
            config.out = Some(dir.path().join(format!("{kind}-{tag}")));
            let m = run_experiment(&config).map_err(|e| format!("{kind}: {e}"))?;
            let read = |name: &str| std::fs::read(m.out_dir.join(name)).unwrap();
            runs.push((read(RESULTS_FILE), read(REPORT_FILE), m.files.clone()));
        }
        if !runs.windows(2).all(|w| w[0] == w[1]) {
            bad.push(kind.to_string());
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            "8 kinds × (2 runs at 1 worker + 1 run at 4 workers): byte-identical".into()
        } else {
            format!("differing kinds: {}", bad.join(", "))
        },
    )
}

fn main() {
    type Criterion = (u32, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "entropy integral", Duration::from_secs(1), c1_entropy),
        (2, "covering arithmetic", Duration::from_secs(10), c2_covering),
        (3, "chaining series", Duration::from_secs(1), c3_chaining),
        (4, "field exactness", Duration::from_secs(60), c4_field),
        (5, "hitting scaling", Duration::from_secs(600), c5_hitting),
        (6, "polarity scaling", Duration::from_secs(600), c6_polarity),
        (7, "modulus of continuity", Duration::from_secs(300), c7_modulus),
        (8, "calibration closed forms", Duration::from_secs(60), c8_calibration),
        (9, "noiseless estimator", Duration::from_secs(10), c9_noiseless),
        (10, "noisy well-definedness", Duration::from_secs(600), c10_noisy),
        (11, "determinism", Duration::from_secs(300), c11_determinism),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let (verdict, detail) = match outcome {
            Ok(d) if took <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over budget {budget:?}")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {id:>2} [{name}]: {verdict}  {detail}  ({:.2} s)",
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
