use crate::error::{ensure_positive, Error, Result};

/// Mean and variance of one renewal period (spacing plus clump) under
/// deterministic segment lengths.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RenewalMoments {
    pub mean: f64,
    pub variance: f64,
}

pub fn renewal_moments(lambda: f64, t0: f64) -> Result<RenewalMoments> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("t0", t0)?;
    let x = lambda * t0;
    Ok(RenewalMoments { mean: x.exp() / lambda, variance: ((2.0 * x).exp() - 2.0 * x * x.exp()) / (lambda * lambda) })
}

/// Large-`t` mean of the clump count, `t / mu_R = lambda t e^{-lambda t0}`.
pub fn expected_clump_count(lambda: f64, t0: f64, t: f64) -> Result<f64> {
    ensure_positive("t", t)?;
    Ok(t / renewal_moments(lambda, t0)?.mean)
}

/// Large-`t` variance of the clump count, `t sigma_R^2 / mu_R^3`.
pub fn variance_clump_count(lambda: f64, t0: f64, t: f64) -> Result<f64> {
    ensure_positive("t", t)?;
    let m = renewal_moments(lambda, t0)?;
    Ok(t * m.variance / m.mean.powi(3))
}

/// Geometric law of the number of particles in a clump.
pub fn clump_order_pmf(k: u64, lambda: f64, t0: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("clump order starts at 1".into()));
    }
    ensure_positive("t0", t0)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    let p = (-lambda * t0).exp();
    let q = -(-lambda * t0).exp_m1();
    Ok(if k == 1 { p } else { q.powi((k - 1) as i32) * p })
}

pub fn clump_order_mean(lambda: f64, t0: f64) -> f64 {
    (lambda * t0).exp()
}

pub fn clump_order_variance(lambda: f64, t0: f64) -> f64 {
    let e = (lambda * t0).exp();
    e * e - e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renewal_period_mean() {
        let m = renewal_moments(0.1, 5.0).unwrap();
        assert!((m.mean - 16.487_212_707_001_28).abs() < 1e-10);
    }

    #[test]
    fn clump_count_moments() {
        let n = expected_clump_count(0.1, 5.0, 1000.0).unwrap();
        assert!((n - 60.653).abs() < 1e-3);
        let v = variance_clump_count(0.3, 5.0, 10_000.0).unwrap();
        assert!((v - 221.3).abs() < 0.05, "{v}");
        let direct = 3000.0 * ((-1.5f64).exp() - 3.0 * (-3.0f64).exp());
        assert!((v - direct).abs() < 1e-9);
    }

    #[test]
    fn order_pmf_properties() {
        let (lambda, t0) = (0.3, 5.0);
        assert_eq!(clump_order_pmf(1, lambda, t0).unwrap(), (-1.5f64).exp());
        let total: f64 = (1..=200).map(|k| clump_order_pmf(k, lambda, t0).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = (1..=400).map(|k| k as f64 * clump_order_pmf(k, lambda, t0).unwrap()).sum();
        assert!((mean - clump_order_mean(lambda, t0)).abs() < 1e-10);
        assert!((clump_order_mean(lambda, t0) - 4.48).abs() < 0.01);
        let second: f64 = (1..=600).map(|k| (k * k) as f64 * clump_order_pmf(k, lambda, t0).unwrap()).sum();
        assert!((second - mean * mean - clump_order_variance(lambda, t0)).abs() < 1e-8);
        assert!(clump_order_pmf(0, lambda, t0).is_err());
    }
}
