use super::SegmentLaw;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::numerics::{integrate, quad::decay_point, NeumaierSum};

/// Mean clump length `(e^{lambda mu} - 1) / lambda`, for any segment law with mean `mu`.
///
/// Continuous at `lambda = 0` (value `mu`) and defined for negative `lambda`.
pub fn mean_clump_length(lambda: f64, mu: f64) -> f64 {
    if lambda == 0.0 {
        mu
    } else {
        (lambda * mu).exp_m1() / lambda
    }
}

/// `e^{2x} - 2x e^x - 1`, accurate for small `x`.
fn dsl_variance_kernel(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // sum_{n>=3} (2^n - 2n) x^n / n!
        let mut sum = 0.0;
        let mut pow = x * x * x;
        let mut fact = 6.0;
        let mut two_n = 8.0;
        for n in 3..40 {
            let nf = n as f64;
            let term = (two_n - 2.0 * nf) * pow / fact;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            pow *= x;
            fact *= nf + 1.0;
            two_n *= 2.0;
        }
        sum
    } else {
        (2.0 * x).exp() - 2.0 * x * x.exp() - 1.0
    }
}

/// Clump-length variance for deterministic segments of length `mu`.
pub fn var_clump_length_dsl(lambda: f64, mu: f64) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("mu", mu)?;
    Ok(dsl_variance_kernel(lambda * mu) / (lambda * lambda))
}

const INNER_TOL: f64 = 1e-13;
const OUTER_TOL: f64 = 1e-11;
const TRUNCATION_LEVEL: f64 = 1e-10;

/// `∫_t^∞ (1 - G(x)) dx` by quadrature.
fn excess_integral(law: &SegmentLaw, t: f64) -> Result<f64> {
    let end = law.support_end();
    if t >= end {
        return Ok(0.0);
    }
    let law = *law;
    match law {
        SegmentLaw::Deterministic { t0 } => Ok((t0 - t).max(0.0)),
        SegmentLaw::RandomNormal { mu, .. } => {
            let mut acc = NeumaierSum::new();
            if t < mu {
                acc.add(integrate(|x| law.survival(x), t, mu, INNER_TOL, 1e-14, 500)?.value);
            }
            acc.add(integrate(|x| law.survival(x), t.max(mu), end, INNER_TOL, 1e-14, 500)?.value);
            Ok(acc.value())
        }
    }
}

/// Clump-length variance for a general segment law:
///
/// ```text
/// Var(Y) = 2/lambda e^{lambda mu} ∫_0^∞ (exp[lambda ∫_t^∞ (1 - G)] - 1) dt - ((e^{lambda mu} - 1)/lambda)^2
/// ```
///
/// Both integrals are evaluated by adaptive quadrature. The outer range is
/// truncated where the integrand falls below 1e-10, found by doubling.
pub fn var_clump_length_rsl(lambda: f64, law: SegmentLaw) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    law.validate()?;
    let law = law.canonical();
    let mu = excess_integral(&law, 0.0)?;
    let integrand = |t: f64| -> f64 {
        match excess_integral(&law, t) {
            Ok(e) => (lambda * e).exp_m1(),
            Err(_) => f64::NAN,
        }
    };
    let body_end = law.mean();
    let upper = decay_point(integrand, body_end, (law.support_end() - body_end).max(body_end / 8.0), TRUNCATION_LEVEL)?;
    let mut outer = NeumaierSum::new();
    for (a, b) in [(0.0, body_end), (body_end, upper)] {
        let r = integrate(integrand, a, b, OUTER_TOL, 1e-13, 1000)?;
        if r.value.is_nan() {
            return Err(Error::Quadrature { estimate: r.value, error: r.error });
        }
        outer.add(r.value);
    }
    let e = (lambda * mu).exp();
    let var = 2.0 / lambda * e * outer.value() - (mean_clump_length(lambda, mu)).powi(2);
    if !(var > 0.0) {
        return Err(Error::Quadrature { estimate: var, error: OUTER_TOL });
    }
    Ok(var)
}

/// Laplace transform of the clump length,
/// `γ(s) = 1 + s/lambda - (lambda ∫_0^∞ exp{-s t - lambda ∫_0^t (1 - G)} dt)^{-1}`.
///
/// Beyond the support of `G` the exponent is `-s t - lambda mu`, whose tail
/// integral is added in closed form. `γ(0) = 1` exactly.
pub fn laplace_transform_clump(s: f64, lambda: f64, law: SegmentLaw) -> Result<f64> {
    ensure_finite("s", s)?;
    if s < 0.0 {
        return Err(Error::Domain(format!("Laplace argument must be nonnegative, got {s}")));
    }
    ensure_positive("lambda", lambda)?;
    law.validate()?;
    if s == 0.0 {
        return Ok(1.0);
    }
    let law = law.canonical();
    let mu = excess_integral(&law, 0.0)?;
    let end = law.support_end();
    let integrand = |t: f64| -> f64 {
        match excess_integral(&law, t) {
            Ok(e) => (-s * t - lambda * (mu - e)).exp(),
            Err(_) => f64::NAN,
        }
    };
    let mut acc = NeumaierSum::new();
    let mid = law.mean().min(end);
    for (a, b) in [(0.0, mid), (mid, end)] {
        if b > a {
            let r = integrate(integrand, a, b, 1e-14, 1e-14, 1000)?;
            if r.value.is_nan() {
                return Err(Error::Quadrature { estimate: r.value, error: r.error });
            }
            acc.add(r.value);
        }
    }
    acc.add((-lambda * mu - s * end).exp() / s);
    Ok(1.0 + s / lambda - 1.0 / (lambda * acc.value()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_values() {
        assert!((mean_clump_length(0.2, 5.0) - 8.591_409_142_295_225).abs() < 1e-12);
        assert_eq!(mean_clump_length(0.0, 5.0), 5.0);
        assert!((mean_clump_length(1e-12, 5.0) - 5.0).abs() < 1e-9);
        assert!(mean_clump_length(-0.1, 5.0) < 5.0);
    }

    #[test]
    fn mean_is_increasing() {
        let mut prev = mean_clump_length(-1.0, 4.45);
        for i in -99..200 {
            let m = mean_clump_length(i as f64 / 100.0, 4.45);
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn dsl_variance_value() {
        let e = std::f64::consts::E;
        let expected = 25.0 * (e * e - 2.0 * e - 1.0);
        let v = var_clump_length_dsl(0.2, 5.0).unwrap();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 23.8123).abs() < 1e-4);
        assert!(var_clump_length_dsl(0.0, 5.0).is_err());
    }

    #[test]
    fn dsl_kernel_series_matches_closed_form() {
        for &x in &[0.1f64, 0.3, 0.49] {
            let closed = (2.0 * x).exp() - 2.0 * x * x.exp() - 1.0;
            assert!((dsl_variance_kernel(x) - closed).abs() < 1e-14);
        }
        // x^3/3 + x^4/3 + 11 x^5/60 + ...
        let x: f64 = 1e-4;
        let series = x.powi(3) / 3.0 + x.powi(4) / 3.0 + 11.0 * x.powi(5) / 60.0;
        assert!((dsl_variance_kernel(x) - series).abs() < 1e-25);
    }

    #[test]
    fn rsl_variance_reduces_to_dsl() {
        for &(lambda, mu) in &[(0.2, 5.0), (0.1, 5.0), (0.4, 2.0)] {
            let rsl = var_clump_length_rsl(lambda, SegmentLaw::Deterministic { t0: mu }).unwrap();
            let dsl = var_clump_length_dsl(lambda, mu).unwrap();
            assert!((rsl - dsl).abs() < 1e-6, "{rsl} vs {dsl}");
            let rsl0 = var_clump_length_rsl(lambda, SegmentLaw::RandomNormal { mu, sigma: 0.0 }).unwrap();
            assert!((rsl0 - dsl).abs() < 1e-8);
        }
    }

    #[test]
    fn rsl_variance_grows_with_sigma() {
        let v0 = var_clump_length_rsl(0.2, SegmentLaw::RandomNormal { mu: 5.0, sigma: 0.0 }).unwrap();
        let v1 = var_clump_length_rsl(0.2, SegmentLaw::RandomNormal { mu: 5.0, sigma: 1.0 }).unwrap();
        assert!(v1 > v0);
    }

    #[test]
    fn laplace_transform_at_zero_and_monotone() {
        let law = SegmentLaw::Deterministic { t0: 5.0 };
        assert_eq!(laplace_transform_clump(0.0, 0.2, law).unwrap(), 1.0);
        let mut prev = 1.0;
        for i in 1..=100 {
            let g = laplace_transform_clump(i as f64 / 100.0, 0.2, law).unwrap();
            assert!(g < prev, "s = {}", i as f64 / 100.0);
            prev = g;
        }
        assert!(laplace_transform_clump(-0.1, 0.2, law).is_err());
    }

    #[test]
    fn laplace_transform_small_s_continuity() {
        let law = SegmentLaw::RandomNormal { mu: 5.0, sigma: 0.5 };
        let g = laplace_transform_clump(1e-9, 0.2, law).unwrap();
        assert!((g - 1.0).abs() < 1e-8);
    }

    #[test]
    fn laplace_transform_derivative_is_mean() {
        // Second-order one-sided difference (the transform is defined for s >= 0).
        let law = SegmentLaw::RandomNormal { mu: 5.0, sigma: 0.5 };
        let h = 1e-4;
        let g0 = laplace_transform_clump(0.0, 0.2, law).unwrap();
        let g1 = laplace_transform_clump(h, 0.2, law).unwrap();
        let g2 = laplace_transform_clump(2.0 * h, 0.2, law).unwrap();
        let deriv = (-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h);
        let mean = mean_clump_length(0.2, 5.0);
        assert!((-deriv - mean).abs() < 1e-4, "{} vs {mean}", -deriv);
    }

    #[test]
    fn laplace_transform_dsl_closed_form() {
        // For deterministic segments the inner integral is exp(-(s + lambda) t) on [0, t0].
        let (s, lambda, t0): (f64, f64, f64) = (0.3, 0.2, 5.0);
        let j = (1.0 - (-(s + lambda) * t0).exp()) / (s + lambda) + (-lambda * t0 - s * t0).exp() / s;
        let expected = 1.0 + s / lambda - 1.0 / (lambda * j);
        let g = laplace_transform_clump(s, lambda, SegmentLaw::Deterministic { t0 }).unwrap();
        assert!((g - expected).abs() < 1e-12);
    }
}
