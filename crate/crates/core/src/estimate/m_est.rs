use super::{ClumpSample, EstimateReport, Method, SampleStats, SeKind};
use crate::error::{ensure_positive, Error, Result};
use crate::model::{mean_clump_length, var_clump_length_dsl};
use crate::numerics::root::{expand_bracket, find_root, RootBracket};

const ROOT_TOL: f64 = 1e-14;

/// Solves `ybar = (e^{lambda mu} - 1) / lambda` for `lambda`.
///
/// The root is negative when `ybar < mu` and zero when `ybar == mu`.
pub fn solve_m_equation(ybar: f64, mu: f64) -> Result<f64> {
    ensure_positive("mu", mu)?;
    if !(ybar.is_finite() && ybar > 0.0) {
        return Err(Error::InvalidArgument(format!("mean clump length must be positive, got {ybar}")));
    }
    if ybar == mu {
        return Ok(0.0);
    }
    let g = |lambda: f64| mean_clump_length(lambda, mu) - ybar;
    let start = (ybar - mu) / (2.0 * mu * mu);
    let bracket = if ybar > mu {
        // E(Y; lambda) >= mu + lambda mu^2 / 2, so the second-order root bounds from above.
        let upper = 2.0 * (ybar - mu) / (mu * mu);
        let lo_val = g(start);
        if lo_val < 0.0 {
            RootBracket::new(g, start, upper.max(start * 1.000_001))?
        } else {
            RootBracket::new(g, 0.0, start)?
        }
    } else {
        expand_bracket(g, 2.0 * start, 0.0, 200)?
    };
    find_root(g, bracket, ROOT_TOL * (1.0 + bracket.lo.abs().max(bracket.hi.abs())))
}

/// `e^x (x - 1) + 1`, accurate near zero.
fn b_kernel(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // sum_{n>=2} (n-1) x^n / n!
        let mut sum = 0.0;
        let mut term = x * x / 2.0;
        for n in 2..40 {
            let contrib = (n - 1) as f64 * term;
            sum += contrib;
            if contrib.abs() < 1e-18 * sum.abs() {
                break;
            }
            term *= x / (n + 1) as f64;
        }
        sum
    } else {
        x.exp() * (x - 1.0) + 1.0
    }
}

/// `B(lambda) = (e^{lambda mu}(lambda mu - 1) + 1) / lambda^2` and `C(lambda) = Var(Y)` under DSL.
pub fn sandwich_components(lambda: f64, mu: f64) -> Result<(f64, f64)> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("mu", mu)?;
    let b = b_kernel(lambda * mu) / (lambda * lambda);
    let c = var_clump_length_dsl(lambda, mu)?;
    Ok((b, c))
}

fn denominator(lambda: f64, mu: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("standard errors require lambda > 0, got {lambda}")));
    }
    ensure_positive("mu", mu)?;
    let d = b_kernel(lambda * mu);
    if !(d > f64::MIN_POSITIVE * 1e16) {
        return Err(Error::Domain(format!(
            "variance denominator underflows at lambda = {lambda}; use the general (sample-variance) standard error"
        )));
    }
    Ok(d)
}

/// Model-based standard error of the M-estimator under deterministic segments.
pub fn se_m_dsl(lambda: f64, mu: f64, n: usize) -> Result<f64> {
    let d = denominator(lambda, mu)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let k = var_clump_length_dsl(lambda, mu)? * lambda * lambda;
    Ok((lambda * lambda * k / (d * d) / n as f64).sqrt())
}

/// Sandwich standard error using the sample variance of clump lengths.
pub fn se_m_general(lambda: f64, mu: f64, n: usize, s2y: f64) -> Result<f64> {
    let d = denominator(lambda, mu)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(s2y >= 0.0 && s2y.is_finite()) {
        return Err(Error::InvalidArgument(format!("s2y must be nonnegative, got {s2y}")));
    }
    Ok((lambda.powi(4) * s2y / (d * d) / n as f64).sqrt())
}

/// M-estimate from a sample.
pub fn m_estimate(sample: &ClumpSample) -> Result<EstimateReport> {
    m_estimate_stats(&sample.stats())
}

/// M-estimate from summary statistics, with both standard errors and 95%
/// Wald intervals when the estimate is positive.
pub fn m_estimate_stats(stats: &SampleStats) -> Result<EstimateReport> {
    if stats.n == 0 {
        return Err(Error::InvalidArgument("sample must contain at least one clump".into()));
    }
    let lambda = solve_m_equation(stats.ybar, stats.mu)?;
    let mut report = EstimateReport::new(Method::M, lambda);
    report.note("n", stats.n);
    if lambda < 0.0 {
        report.note("warning", "negative estimate: mean clump length is below the mean segment length");
        return Ok(report);
    }
    if lambda == 0.0 {
        report.note("warning", "zero estimate: mean clump length equals the mean segment length");
        return Ok(report);
    }
    match se_m_dsl(lambda, stats.mu, stats.n) {
        Ok(se) => report.se_dsl = Some(se),
        Err(e) => report.note("se_dsl", e),
    }
    match se_m_general(lambda, stats.mu, stats.n, stats.s2y) {
        Ok(se) => report.se_g = Some(se),
        Err(e) => report.note("se_g", e),
    }
    if report.se_g.is_some() {
        report.ci_wald = Some(super::wald_interval(&report, 0.95, SeKind::General)?);
    }
    if report.se_dsl.is_some() {
        report.ci_wald_dsl = Some(super::wald_interval(&report, 0.95, SeKind::Dsl)?);
    }
    Ok(report)
}

/// Moment estimator from the singleton fraction, `-ln(M1 / N) / t0`.
pub fn singleton_mom(sample: &ClumpSample, t0: f64) -> Result<EstimateReport> {
    ensure_positive("t0", t0)?;
    if sample.n == 0 {
        return Err(Error::InvalidArgument("sample must contain at least one clump".into()));
    }
    if sample.m1 == 0 {
        return Err(Error::Domain("no singletons: the singleton estimator is undefined".into()));
    }
    if sample.m1 > sample.n {
        return Err(Error::Data(format!("m1 = {} exceeds n = {}", sample.m1, sample.n)));
    }
    let lambda = -((sample.m1 as f64) / (sample.n as f64)).ln() / t0;
    let mut report = EstimateReport::new(Method::SingletonMom, lambda.max(0.0));
    report.note("m1", sample.m1);
    report.note("n", sample.n);
    Ok(report)
}
