use super::MetricError;

/// `∫₀ˣ √(log y⁻¹) dy = √π/2 − (√π/2)·Erf(√(log x⁻¹)) + x·√(log x⁻¹)` for `x ∈ (0, 1]`.
///
/// Evaluated through `erfc` so the first two terms do not cancel for small `x`.
pub fn entropy_integral_closed_form(x: f64) -> Result<f64, MetricError> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(MetricError::EntropyDomain(x));
    }
    let y = (-x.ln()).max(0.0).sqrt();
    let half_sqrt_pi = 0.5 * std::f64::consts::PI.sqrt();
    Ok(half_sqrt_pi * libm::erfc(y) + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    fn quadrature(x: f64) -> f64 {
        let r = integrate(
            |y: f64| (-y.ln()).max(0.0).sqrt(),
            0.0,
            x,
            QuadOptions {
                abs_tol: 1e-13,
                rel_tol: 0.0,
                max_intervals: 20_000,
            },
        );
        assert!(r.converged, "{r:?}");
        r.value
    }

    #[test]
    fn matches_quadrature() {
        for x in [0.01, 0.05, 0.1, 0.25, 0.45, 0.5, 0.9, 1.0] {
            let cf = entropy_integral_closed_form(x).unwrap();
            let q = quadrature(x);
            assert!((cf - q).abs() < 1e-10, "x={x}: {cf} vs {q}");
        }
    }

    #[test]
    fn endpoints() {
        let v = entropy_integral_closed_form(1.0).unwrap();
        assert!((v - 0.886_226_925_452_758).abs() < 1e-15);
        let tiny = entropy_integral_closed_form(1e-300).unwrap();
        assert!(tiny < 1e-297 && tiny > 0.0);
        assert!(entropy_integral_closed_form(0.0).is_err());
        assert!(entropy_integral_closed_form(1.5).is_err());
        assert!(entropy_integral_closed_form(f64::NAN).is_err());
    }
}
