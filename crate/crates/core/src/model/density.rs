//! Clump-length distribution under deterministic segment lengths.
//!
//! A clump of length `y` has a point mass `exp(-lambda t0)` at `y = t0`
//! (singletons). For `y > t0` the continuous part of the density is
//!
//! ```text
//! f(y) = lambda e^{-lambda t0} [ 1 + sum_{j=1}^{s-1} (-1)^j / j! * x_j^{j-1} e^{-j lambda t0} (x_j + j) ]
//! x_j  = lambda (y - (j+1) t0)
//! ```
//!
//! with `s` the largest integer such that `t0 < y / s`. The continuous part
//! integrates to `1 - exp(-lambda t0)`. It is flat at `lambda e^{-lambda t0}`
//! on `(t0, 2 t0]`, drops by the factor `1 - e^{-lambda t0}` just above
//! `2 t0`, and is nonincreasing from there on.

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::numerics::{integrate, ln_factorial, DoubleDouble, NeumaierSum, SignedLogSum};

/// Cancellation level above which the series is recomputed in double-double.
const EXTENDED_PRECISION_TRIGGER: f64 = 1e-8;

/// Relative tolerance for deciding that `y / t0` is an integer.
const BOUNDARY_REL_TOL: f64 = 1e-12;

/// Largest integer `s` with `t0 < y / s`, for `y > t0`.
///
/// At an exact multiple `y = m t0` this is `m - 1`; ratios within a relative
/// `1e-12` of an integer are treated as exact multiples.
pub fn order_threshold(y: f64, t0: f64) -> u64 {
    let r = y / t0;
    if r <= 1.0 {
        return 0;
    }
    let nearest = r.round();
    if (r - nearest).abs() <= BOUNDARY_REL_TOL * r {
        (nearest as u64).saturating_sub(1)
    } else {
        r.floor() as u64
    }
}

/// Probability that a clump is a singleton, `exp(-lambda t0)`.
pub fn singleton_mass(lambda: f64, t0: f64) -> Result<f64> {
    validate_rate(lambda)?;
    ensure_positive("t0", t0)?;
    Ok((-lambda * t0).exp())
}

fn validate_rate(lambda: f64) -> Result<()> {
    ensure_finite("lambda", lambda)?;
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Value of the density together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityTerms {
    pub value: f64,
    /// `s`, the number of bracketed terms plus one.
    pub s: u64,
    /// Whether the alternating series had to be redone in double-double.
    pub extended: bool,
    /// Estimated relative error of the f64 pass.
    pub f64_relative_error: f64,
}

/// Continuous part of the clump-length density at `y > t0`.
pub fn clump_density(y: f64, lambda: f64, t0: f64) -> Result<f64> {
    clump_density_terms(y, lambda, t0).map(|d| d.value)
}

/// Density of the clump length conditional on the clump holding two or more
/// particles, i.e. [`clump_density`] divided by `1 - exp(-lambda t0)`.
pub fn clump_density_given_multi(y: f64, lambda: f64, t0: f64) -> Result<f64> {
    let f = clump_density(y, lambda, t0)?;
    if lambda == 0.0 {
        return Err(Error::Domain("no multi-particle clumps when lambda = 0".into()));
    }
    Ok(f / (-(-lambda * t0).exp_m1()))
}

/// [`clump_density`] with diagnostics about the series evaluation.
pub fn clump_density_terms(y: f64, lambda: f64, t0: f64) -> Result<DensityTerms> {
    ensure_finite("y", y)?;
    validate_rate(lambda)?;
    ensure_positive("t0", t0)?;
    if y <= t0 {
        return Err(Error::Domain(format!(
            "continuous density is defined for y > t0 (y = {y}, t0 = {t0}); use singleton_mass for y = t0"
        )));
    }
    let s = order_threshold(y, t0);
    if lambda == 0.0 {
        return Ok(DensityTerms { value: 0.0, s, extended: false, f64_relative_error: 0.0 });
    }

    let lt = lambda * t0;
    let (bracket, rel_err) = bracket_f64(y, lambda, t0, s);
    let mut extended = false;
    let bracket = if rel_err > EXTENDED_PRECISION_TRIGGER {
        extended = true;
        bracket_dd(y, lambda, t0, s)
    } else {
        bracket
    };
    let value = (lambda * (-lt).exp() * bracket).max(0.0);
    Ok(DensityTerms { value, s, extended, f64_relative_error: rel_err })
}

/// The bracketed series in log-magnitude/sign form with compensated summation.
fn bracket_f64(y: f64, lambda: f64, t0: f64, s: u64) -> (f64, f64) {
    let lt = lambda * t0;
    let mut acc = SignedLogSum::new();
    acc.add(1.0);
    for j in 1..s {
        let jf = j as f64;
        let x = (lambda * (y - (jf + 1.0) * t0)).max(0.0);
        let power = if j == 1 {
            0.0
        } else if x == 0.0 {
            continue;
        } else {
            (jf - 1.0) * x.ln()
        };
        let log_mag = power - ln_factorial(j) - jf * lt + (x + jf).ln();
        acc.add_signed(j % 2 == 1, log_mag);
    }
    (acc.value(), acc.relative_error_estimate())
}

/// The bracketed series in double-double arithmetic.
fn bracket_dd(y: f64, lambda: f64, t0: f64, s: u64) -> f64 {
    let decay = (-DoubleDouble::from_prod(lambda, t0)).exp();
    let y_dd = DoubleDouble::new(y);
    let lam = DoubleDouble::new(lambda);
    let mut sum = DoubleDouble::ONE;
    for j in 1..s {
        let jf = j as f64;
        let x = lam * (y_dd - DoubleDouble::from_prod(jf + 1.0, t0));
        let x = if x.is_sign_negative() { DoubleDouble::ZERO } else { x };
        let x_plus_j = x + DoubleDouble::new(jf);
        // e^{-j lambda t0} x^{j-1} / j! built as a running product to stay in range.
        let mag = if j == 1 {
            decay * x_plus_j
        } else {
            if x.hi == 0.0 {
                continue;
            }
            let mut m = decay;
            for i in 2..=j {
                m = m * decay * x / DoubleDouble::new(i as f64);
            }
            m * x_plus_j
        };
        sum = if j % 2 == 1 { sum - mag } else { sum + mag };
    }
    sum.to_f64()
}

/// CDF of the clump length: point mass at `t0` plus the integrated density.
///
/// Returns 0 for `y < t0`. Integration runs piecewise over `[j t0, (j+1) t0]`
/// where the density is smooth.
pub fn clump_cdf(y: f64, lambda: f64, t0: f64) -> Result<f64> {
    ensure_finite("y", y)?;
    validate_rate(lambda)?;
    ensure_positive("t0", t0)?;
    if y < t0 {
        return Ok(0.0);
    }
    let dist = ClumpLengthDist::new(lambda, t0)?;
    let mut acc = NeumaierSum::new();
    acc.add(dist.singleton_mass());
    acc.add(dist.integrate_continuous(t0, y)?);
    Ok(acc.value().min(1.0))
}

/// Clump-length law for fixed `(lambda, t0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClumpLengthDist {
    pub lambda: f64,
    pub t0: f64,
}

const CDF_ABS_TOL: f64 = 1e-9;

impl ClumpLengthDist {
    pub fn new(lambda: f64, t0: f64) -> Result<Self> {
        validate_rate(lambda)?;
        ensure_positive("t0", t0)?;
        Ok(Self { lambda, t0 })
    }

    pub fn singleton_mass(&self) -> f64 {
        (-self.lambda * self.t0).exp()
    }

    /// Density of the continuous part; zero at or below `t0`.
    pub fn density(&self, y: f64) -> f64 {
        if y <= self.t0 {
            0.0
        } else {
            clump_density(y, self.lambda, self.t0).unwrap_or(0.0)
        }
    }

    /// `∫_a^b f`, split at multiples of `t0`.
    pub fn integrate_continuous(&self, a: f64, b: f64) -> Result<f64> {
        let a = a.max(self.t0);
        if b <= a {
            return Ok(0.0);
        }
        let mut acc = NeumaierSum::new();
        let mut lo = a;
        while lo < b {
            let k = (lo / self.t0).floor() + 1.0;
            let knot = k * self.t0;
            let hi = if knot <= lo * (1.0 + 1e-14) { (k + 1.0) * self.t0 } else { knot }.min(b);
            let r = integrate(|u| self.density(u), lo, hi, CDF_ABS_TOL, 1e-12, 500)?;
            acc.add(r.value);
            lo = hi;
        }
        Ok(acc.value())
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        clump_cdf(y, self.lambda, self.t0)
    }

    /// `(F(y-), F(y))`; the only atom is at `t0`.
    pub fn cdf_limits(&self, y: f64) -> Result<(f64, f64)> {
        let right = self.cdf(y)?;
        if y == self.t0 {
            Ok((0.0, right))
        } else {
            Ok((right, right))
        }
    }

    /// CDF at every point of an ascending slice, integrating only between
    /// consecutive points.
    pub fn cdf_sorted(&self, ys: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(ys.len());
        let mut acc = NeumaierSum::new();
        acc.add(self.singleton_mass());
        let mut prev = self.t0;
        for &y in ys {
            if y < prev && y >= self.t0 {
                return Err(Error::InvalidArgument("cdf_sorted expects ascending input".into()));
            }
            if y < self.t0 {
                out.push(0.0);
                continue;
            }
            acc.add(self.integrate_continuous(prev, y)?);
            prev = y;
            out.push(acc.value().min(1.0));
        }
        Ok(out)
    }

    /// A length beyond which the continuous mass is below `tail`.
    pub fn tail_point(&self, tail: f64) -> Result<f64> {
        // The density is nonincreasing beyond 2 t0, so f(y) * t0 bounds the
        // mass in (y, y + t0]; step out until the remaining mass is tiny.
        let total = -(-self.lambda * self.t0).exp_m1();
        let mut y = 2.0 * self.t0;
        let mut covered = self.integrate_continuous(self.t0, y)?;
        while total - covered > tail {
            let next = y + self.t0;
            covered += self.integrate_continuous(y, next)?;
            y = next;
            if y > 1e7 * self.t0 {
                return Err(Error::Domain("tail search did not terminate".into()));
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mean_clump_length, var_clump_length_dsl};
    use crate::numerics::adaptive_quadrature;

    #[test]
    fn threshold_rule() {
        assert_eq!(order_threshold(3.0, 2.0), 1);
        assert_eq!(order_threshold(4.0, 2.0), 1);
        assert_eq!(order_threshold(4.0 + 1e-9, 2.0), 2);
        assert_eq!(order_threshold(4.5, 2.0), 2);
        assert_eq!(order_threshold(6.0, 2.0), 2);
        assert_eq!(order_threshold(0.3 * 3.0 / 0.1 * 0.1, 0.3), 2);
    }

    #[test]
    fn uniform_height_below_twice_t0() {
        let expected = 0.4 * (-0.8f64).exp();
        for &y in &[2.0001, 2.5, 3.0, 3.7, 4.0] {
            let f = clump_density(y, 0.4, 2.0).unwrap();
            assert!((f - expected).abs() < 1e-15, "{y}: {f}");
        }
    }

    #[test]
    fn conditional_form_matches_displayed_value() {
        // lambda e^{-lambda t0} / (1 - e^{-lambda t0}) at lambda = 0.4, t0 = 2
        let f = clump_density_given_multi(3.0, 0.4, 2.0).unwrap();
        let expected = 0.4 * (-0.8f64).exp() / (1.0 - (-0.8f64).exp());
        assert!((f - expected).abs() < 1e-14);
        assert!((f - 0.326386).abs() < 1e-6);
    }

    #[test]
    fn drop_at_twice_t0() {
        let c = (-0.8f64).exp();
        let below = clump_density(4.0, 0.4, 2.0).unwrap();
        let above = clump_density(4.0 + 1e-9, 0.4, 2.0).unwrap();
        assert!((above - below * (1.0 - c)).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(clump_density(2.0, 0.4, 2.0), Err(Error::Domain(_))));
        assert!(matches!(clump_density(1.0, 0.4, 2.0), Err(Error::Domain(_))));
        assert!(clump_density(f64::NAN, 0.4, 2.0).is_err());
        assert!(clump_density(3.0, f64::INFINITY, 2.0).is_err());
    }

    #[test]
    fn singleton_mass_values() {
        assert!((singleton_mass(0.40, 2.0).unwrap() - 0.44933).abs() < 5e-6);
        assert!((singleton_mass(0.3, 5.0).unwrap() - 0.22313).abs() < 5e-6);
        assert!((singleton_mass(1e-12, 2.0).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn cdf_at_t0_is_point_mass_and_four_is_below_one() {
        let c = clump_cdf(2.0, 0.4, 2.0).unwrap();
        assert!((c - (-0.8f64).exp()).abs() < 1e-15);
        assert_eq!(clump_cdf(1.9, 0.4, 2.0).unwrap(), 0.0);
        // Independent oracle: quadrature of the flat piece.
        let flat = adaptive_quadrature(|y| clump_density(y, 0.4, 2.0).unwrap(), 2.0 + 1e-12, 4.0, 1e-12).unwrap();
        let f4 = clump_cdf(4.0, 0.4, 2.0).unwrap();
        assert!((f4 - ((-0.8f64).exp() + flat.value)).abs() < 1e-9);
        assert!((f4 - 0.808_792).abs() < 1e-5);
        assert!(f4 < 1.0);
    }

    #[test]
    fn flat_piece_integral() {
        let r = adaptive_quadrature(|y| clump_density(y, 0.4, 2.0).unwrap(), 2.0 + 1e-15, 4.0, 1e-10).unwrap();
        let expected = 2.0 * 0.4 * (-0.8f64).exp();
        assert!((r.value - expected).abs() < 1e-8);
    }

    fn grid_normalization(lambda: f64, t0: f64) -> f64 {
        let d = ClumpLengthDist::new(lambda, t0).unwrap();
        let top = d.tail_point(1e-10).unwrap();
        d.singleton_mass() + d.integrate_continuous(t0, top).unwrap()
    }

    #[test]
    fn normalizes_over_parameter_grid() {
        for &lambda in &[0.1, 0.2, 0.3, 0.4] {
            for &t0 in &[2.0, 5.0] {
                let total = grid_normalization(lambda, t0);
                assert!((total - 1.0).abs() < 1e-6, "lambda {lambda} t0 {t0}: {total}");
            }
        }
    }

    #[test]
    fn quadrature_moments_match_closed_forms() {
        for &(lambda, t0) in &[(0.2, 5.0), (0.4, 2.0), (0.3, 5.0)] {
            let d = ClumpLengthDist::new(lambda, t0).unwrap();
            let top = d.tail_point(1e-14).unwrap() + 10.0 * t0;
            let mut m1 = d.singleton_mass() * t0;
            let mut m2 = d.singleton_mass() * t0 * t0;
            let mut lo = t0;
            while lo < top {
                let hi = lo + t0;
                m1 += adaptive_quadrature(|y| y * d.density(y), lo, hi, 1e-12).unwrap().value;
                m2 += adaptive_quadrature(|y| y * y * d.density(y), lo, hi, 1e-11).unwrap().value;
                lo = hi;
            }
            let mean = mean_clump_length(lambda, t0);
            let var = m2 - m1 * m1;
            assert!((m1 - mean).abs() < 1e-5, "mean {m1} vs {mean}");
            let v = var_clump_length_dsl(lambda, t0).unwrap();
            assert!((var - v).abs() < 1e-4, "var {var} vs {v}");
        }
    }

    #[test]
    fn nonincreasing_beyond_twice_t0() {
        for &(lambda, t0) in &[(0.1, 5.0), (0.3, 5.0), (0.4, 2.0), (2.0, 1.0)] {
            let mut prev = f64::INFINITY;
            let mut y = t0 * 1.0001;
            while y < 30.0 * t0 {
                let f = clump_density(y, lambda, t0).unwrap();
                assert!(f <= prev + 1e-12, "lambda {lambda} y {y}: {f} > {prev}");
                prev = f;
                y += t0 / 37.0;
            }
        }
    }

    #[test]
    fn long_clumps_use_extended_precision() {
        let d = clump_density_terms(400.0, 0.3, 5.0).unwrap();
        assert!(d.extended);
        assert!(d.value >= 0.0 && d.value.is_finite());
        // Close to the double-double answer at a moderate length where both are reliable.
        let y = 60.0;
        let (f64_bracket, err) = bracket_f64(y, 0.3, 5.0, order_threshold(y, 5.0));
        let dd = bracket_dd(y, 0.3, 5.0, order_threshold(y, 5.0));
        assert!(err < 1e-8);
        assert!((f64_bracket - dd).abs() <= 1e-10 * dd.abs());
    }

    #[test]
    fn small_lambda_is_nearly_uniform() {
        let lambda = 0.01;
        let t0 = 2.0;
        let d = ClumpLengthDist::new(lambda, t0).unwrap();
        let total = -(-lambda * t0).exp_m1();
        let flat = d.integrate_continuous(t0, 2.0 * t0).unwrap();
        assert!(flat / total > 0.99);
    }
}
