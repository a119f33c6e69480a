//! One-sample Kolmogorov–Smirnov statistic and asymptotic p-value.

use crate::error::{Error, Result};

/// `sup |F_n(x) - F(x)|` for a continuous `cdf`.
pub fn ks_statistic<F: FnMut(f64) -> f64>(sample: &[f64], mut cdf: F) -> Result<f64> {
    ks_statistic_with_atoms(sample, |x| {
        let v = cdf(x);
        (v, v)
    })
}

/// KS statistic for a CDF that may have atoms.
///
/// `cdf(x)` returns `(F(x-), F(x))`. Tied sample values are grouped so both
/// one-sided gaps are taken against the correct limits.
pub fn ks_statistic_with_atoms<F: FnMut(f64) -> (f64, f64)>(sample: &[f64], mut cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("KS statistic needs a nonempty sample".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("sample contains NaN".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let (left, right) = cdf(x);
        let fn_before = i as f64 / n;
        let fn_after = j as f64 / n;
        d = d.max((fn_after - right).abs()).max((left - fn_before).abs());
        i = j;
    }
    Ok(d)
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`, using
/// Stephens' small-sample correction to the Kolmogorov distribution.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_survival(lam)
}

/// `P(K > lam)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lam: f64) -> f64 {
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lam * lam).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Large-sample critical value `c/sqrt(n)` at the 99% level.
pub fn ks_critical_99(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal::{norm_cdf, norm_quantile};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quantile_grid_gives_half_step() {
        let n = 40;
        let xs: Vec<f64> = (1..=n).map(|i| norm_quantile((i as f64 - 0.5) / n as f64)).collect();
        let d = ks_statistic(&xs, norm_cdf).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_against_uniform() {
        let d = ks_statistic(&[0.0, 0.0, 0.0], |x: f64| x.clamp(0.0, 1.0)).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn empty_sample_is_error() {
        assert!(ks_statistic(&[], |x| x).is_err());
    }

    #[test]
    fn normal_draws_pass_at_99() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = ks_statistic(&xs, norm_cdf).unwrap();
        assert!(d < 1.63 / (xs.len() as f64).sqrt(), "{d}");
        assert!(ks_p_value(d, xs.len()) > 0.01);
    }

    #[test]
    fn atoms_use_left_limits() {
        // Bernoulli(0.5) on {0, 1} with a perfectly balanced sample.
        let cdf = |x: f64| {
            if x < 0.0 {
                (0.0, 0.0)
            } else if x == 0.0 {
                (0.0, 0.5)
            } else if x < 1.0 {
                (0.5, 0.5)
            } else if x == 1.0 {
                (0.5, 1.0)
            } else {
                (1.0, 1.0)
            }
        };
        let d = ks_statistic_with_atoms(&[0.0, 1.0, 0.0, 1.0], cdf).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_survival_reference_points() {
        // 0.95 and 0.99 quantiles of the Kolmogorov distribution.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
    }
}
