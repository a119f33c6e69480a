//! Estimators of the total number of particles that passed the sensor.
//!
//! The simple estimator scales the clump count by the mean clump order,
//! `N e^{lambda t0}`. The Bayes estimator instead sums, over clumps, the
//! conditional mean order given the observed length. Given `Y = y > t0`,
//! `K - 2` has weights proportional to
//!
//! ```text
//! (lambda (y - t0))^{k-2} / (k-2)! * p_{k-2}(t0 / (y - t0))
//! ```
//!
//! where `p_n(u)` is the probability that the largest of the `n + 1` gaps cut
//! by `n` uniform points in `[0, 1]` is at most `u`.

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::estimate::{ClumpSample, SingletonRule};
use crate::model::{clump_density, order_threshold};
use crate::numerics::{ln_factorial, DoubleDouble, NeumaierSum, SignedLogSum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `E[A(t)] = lambda t`.
pub fn expected_total_flow(lambda: f64, t: f64) -> f64 {
    lambda * t
}

/// `lambda * sum(y) + N`.
pub fn flow_from_lengths(lambda: f64, sample: &ClumpSample) -> f64 {
    lambda * sample.total_length() + sample.n as f64
}

/// `n e^{lambda t0}`.
pub fn a_hat_1(lambda: f64, n: usize, t0: f64) -> f64 {
    n as f64 * (lambda * t0).exp()
}

/// Terms at or below this index are summed directly in f64.
const DIRECT_MAX_N: u64 = 30;
const EXTENDED_TRIGGER: f64 = 1e-8;

/// `p_n(u) = sum_{j=0}^{[1/u]} (-1)^j C(n+1, j) (1 - j u)_+^n`.
pub fn largest_division_prob(n: u64, u: f64) -> Result<f64> {
    ensure_finite("u", u)?;
    if u <= 0.0 {
        return Err(Error::Domain(format!("u must be positive, got {u}")));
    }
    if u >= 1.0 {
        return Ok(1.0);
    }
    if u * ((n + 1) as f64) < 1.0 {
        return Ok(0.0);
    }
    let jmax = ((1.0 / u).floor() as u64).min(n + 1);
    let value = if n <= DIRECT_MAX_N {
        let mut acc = NeumaierSum::new();
        let mut binom = 1.0;
        for j in 0..=jmax {
            if j > 0 {
                binom *= (n + 2 - j) as f64 / j as f64;
            }
            let base = 1.0 - j as f64 * u;
            if base <= 0.0 {
                continue;
            }
            let term = binom * base.powi(n as i32);
            acc.add(if j % 2 == 1 { -term } else { term });
        }
        acc.value()
    } else {
        let ln_np1 = ln_factorial(n + 1);
        let mut acc = SignedLogSum::new();
        for j in 0..=jmax {
            let base = 1.0 - j as f64 * u;
            if base <= 0.0 {
                continue;
            }
            let log_mag = ln_np1 - ln_factorial(j) - ln_factorial(n + 1 - j) + n as f64 * base.ln();
            acc.add_signed(j % 2 == 1, log_mag);
        }
        if acc.relative_error_estimate() > EXTENDED_TRIGGER {
            largest_division_prob_dd(n, u, jmax)
        } else {
            acc.value()
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

fn largest_division_prob_dd(n: u64, u: f64, jmax: u64) -> f64 {
    let mut sum = DoubleDouble::ZERO;
    let mut binom = DoubleDouble::ONE;
    let u_dd = DoubleDouble::new(u);
    for j in 0..=jmax {
        if j > 0 {
            binom = binom * DoubleDouble::new((n + 2 - j) as f64) / DoubleDouble::new(j as f64);
        }
        let base = DoubleDouble::ONE - DoubleDouble::new(j as f64) * u_dd;
        if base.hi <= 0.0 {
            continue;
        }
        let term = binom * base.powi(n as u32);
        sum = if j % 2 == 1 { sum - term } else { sum + term };
    }
    sum.to_f64()
}

fn validate_order_args(y: f64, lambda: f64, t0: f64) -> Result<()> {
    ensure_finite("y", y)?;
    ensure_positive("lambda", lambda)?;
    ensure_positive("t0", t0)?;
    Ok(())
}

/// `Pr(K = k | Y = y)` under deterministic segments of length `t0`.
pub fn conditional_order_pmf(k: u64, y: f64, lambda: f64, t0: f64) -> Result<f64> {
    validate_order_args(y, lambda, t0)?;
    if y < t0 {
        return Err(Error::Domain(format!("clump length {y} is shorter than t0 = {t0}")));
    }
    if y == t0 {
        return Ok(if k == 1 { 1.0 } else { 0.0 });
    }
    if k < 2 {
        return Ok(0.0);
    }
    let n = k - 2;
    let z = lambda * (y - t0);
    let s = order_threshold(y, t0);
    if s <= 1 {
        // Translated Poisson: K - 2 ~ Poisson(lambda (y - t0)).
        return Ok((n as f64 * z.ln() - z - ln_factorial(n)).exp());
    }
    if k <= s {
        return Ok(0.0);
    }
    let p = largest_division_prob(n, t0 / (y - t0))?;
    if p == 0.0 {
        return Ok(0.0);
    }
    let f = clump_density(y, lambda, t0)?;
    let log_pmf = lambda.ln() - lambda * y - f.ln() + n as f64 * z.ln() - ln_factorial(n) + p.ln();
    Ok(log_pmf.exp())
}

/// Relative size below which further series terms are dropped.
const SERIES_REL_TOL: f64 = 1e-12;
/// Maximum number of series terms.
const SERIES_MAX_TERMS: u64 = 10_000;

/// `E(K | Y = y)` under deterministic segments of length `t0`.
///
/// Equals 1 at `y = t0` and `2 + lambda (y - t0)` on `(t0, 2 t0]`; beyond
/// that the series over `k >= s + 1` is summed and normalized by its own
/// total, which equals `f(y) e^{lambda y} / lambda`.
pub fn conditional_order_mean(y: f64, lambda: f64, t0: f64) -> Result<f64> {
    validate_order_args(y, lambda, t0)?;
    if y < t0 {
        return Err(Error::Domain(format!("clump length {y} is shorter than t0 = {t0}")));
    }
    if y == t0 {
        return Ok(1.0);
    }
    let z = lambda * (y - t0);
    let s = order_threshold(y, t0);
    if s <= 1 {
        return Ok(2.0 + z);
    }
    let u = t0 / (y - t0);
    let ln_z = z.ln();
    let mut logs: Vec<(u64, f64)> = Vec::new();
    let mut max_log = f64::NEG_INFINITY;
    let mut n = s - 1;
    let mut terms = 0u64;
    loop {
        let p = largest_division_prob(n, u)?;
        if p > 0.0 {
            let lw = n as f64 * ln_z - ln_factorial(n) + p.ln();
            max_log = max_log.max(lw);
            logs.push((n, lw));
            let past_mode = n as f64 > z;
            let k = (n + 2) as f64;
            if past_mode && (k.ln() + lw) < SERIES_REL_TOL.ln() + max_log {
                break;
            }
        }
        terms += 1;
        if terms >= SERIES_MAX_TERMS {
            return Err(Error::SeriesNotConverged { terms: terms as usize });
        }
        n += 1;
    }
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (n, lw) in logs {
        let w = (lw - max_log).exp();
        num.add((n + 2) as f64 * w);
        den.add(w);
    }
    Ok(num.value() / den.value())
}

/// `lim_{y -> 2 t0+} E(K | Y = y) = ((x + 2) - 2 e^{-x}) / (1 - e^{-x})`, `x = lambda t0`.
pub fn conditional_order_mean_right_of_jump(lambda: f64, t0: f64) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("t0", t0)?;
    let x = lambda * t0;
    let q = -(-x).exp_m1();
    Ok(((x + 2.0) - 2.0 * (-x).exp()) / q)
}

/// Piecewise-linear approximation of [`conditional_order_mean`] on a grid of
/// knots `j t0 + i h`, with `h` the largest step not exceeding the requested
/// one that divides `t0`. Knots at `2 t0` use the right limit, so the jump is
/// never interpolated across; below `2 t0` the exact (linear) form is used.
#[derive(Debug, Clone)]
pub struct OrderMeanInterpolator {
    lambda: f64,
    t0: f64,
    h: f64,
    per_interval: usize,
    /// Knot values from `2 t0` upward, `per_interval` knots per `t0`.
    values: Vec<f64>,
}

impl OrderMeanInterpolator {
    pub fn new(lambda: f64, t0: f64, grid_step: f64, y_max: f64) -> Result<Self> {
        validate_order_args(y_max, lambda, t0)?;
        ensure_positive("grid_step", grid_step)?;
        let per_interval = ((t0 / grid_step).ceil() as usize).max(1);
        let h = t0 / per_interval as f64;
        let mut this = Self { lambda, t0, h, per_interval, values: Vec::new() };
        this.extend_to(y_max)?;
        Ok(this)
    }

    fn knot(&self, i: usize) -> f64 {
        let j = (i / self.per_interval) as f64;
        let r = (i % self.per_interval) as f64;
        (2.0 + j) * self.t0 + r * self.h
    }

    fn knot_value(&self, i: usize) -> Result<f64> {
        if i == 0 {
            conditional_order_mean_right_of_jump(self.lambda, self.t0)
        } else {
            conditional_order_mean(self.knot(i), self.lambda, self.t0)
        }
    }

    fn extend_to(&mut self, y: f64) -> Result<()> {
        let needed = (((y - 2.0 * self.t0) / self.h).floor().max(0.0) as usize) + 2;
        let start = self.values.len();
        if needed > start {
            let new: Result<Vec<f64>> = (start..needed).into_par_iter().map(|i| self.knot_value(i)).collect();
            self.values.extend(new?);
        }
        Ok(())
    }

    /// Interpolated mean at `y`; exact at knots and for `y <= 2 t0`. Lengths
    /// beyond the prepared grid are evaluated exactly.
    pub fn value(&self, y: f64) -> Result<f64> {
        if y <= 2.0 * self.t0 {
            return conditional_order_mean(y, self.lambda, self.t0);
        }
        let pos = (y - 2.0 * self.t0) / self.h;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return conditional_order_mean(y, self.lambda, self.t0);
        }
        let frac = pos - i as f64;
        Ok(self.values[i] + frac * (self.values[i + 1] - self.values[i]))
    }
}

/// Linear interpolation of [`conditional_order_mean`] between the grid knots
/// around `y`.
pub fn conditional_order_mean_interp(y: f64, lambda: f64, t0: f64, grid_step: f64) -> Result<f64> {
    validate_order_args(y, lambda, t0)?;
    ensure_positive("grid_step", grid_step)?;
    if y <= 2.0 * t0 {
        return conditional_order_mean(y, lambda, t0);
    }
    let per_interval = ((t0 / grid_step).ceil() as usize).max(1);
    let h = t0 / per_interval as f64;
    let pos = (y - 2.0 * t0) / h;
    let i = pos.floor();
    let frac = pos - i;
    let knot = |i: f64| -> Result<f64> {
        if i == 0.0 {
            conditional_order_mean_right_of_jump(lambda, t0)
        } else {
            let j = (i / per_interval as f64).floor();
            let r = i - j * per_interval as f64;
            conditional_order_mean((2.0 + j) * t0 + r * h, lambda, t0)
        }
    };
    let a = knot(i)?;
    if frac == 0.0 {
        return Ok(a);
    }
    let b = knot(i + 1.0)?;
    Ok(a + frac * (b - a))
}

/// Options for [`a_hat_bayes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesOptions {
    /// Use the grid interpolant instead of the exact series.
    pub use_interp: bool,
    pub grid_step_fraction: f64,
    /// Lengths classified as singletons contribute exactly one particle.
    pub singleton_rule: SingletonRule,
}

impl Default for BayesOptions {
    fn default() -> Self {
        Self { use_interp: false, grid_step_fraction: 1.0 / 20.0, singleton_rule: SingletonRule::Band { eps: 0.0 } }
    }
}

/// Both total-flow estimates for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub a_hat_1: f64,
    pub a_hat_b: f64,
    pub per_clump_means: Vec<f64>,
    pub lambda_used: f64,
    pub interpolated: bool,
}

/// Bayes estimate `sum_i E(K_i | Y_i)` together with `N e^{lambda t0}`.
///
/// Per-clump means are computed in parallel and summed in sample order with
/// compensation, so the result does not depend on scheduling.
pub fn a_hat_bayes(sample: &ClumpSample, lambda: f64, t0: f64, options: BayesOptions) -> Result<FlowReport> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("t0", t0)?;
    let rule = options.singleton_rule;
    if let Some(&y) = sample.lengths.iter().find(|&&y| rule.is_invalid(y, t0)) {
        return Err(Error::Classification(format!(
            "clump length {y} is below t0 = {t0} and outside the singleton tolerance"
        )));
    }
    let interp = if options.use_interp {
        let y_max = sample.lengths.iter().copied().fold(2.0 * t0, f64::max);
        Some(OrderMeanInterpolator::new(lambda, t0, options.grid_step_fraction * t0, y_max)?)
    } else {
        None
    };
    let per_clump_means: Vec<f64> = sample
        .lengths
        .par_iter()
        .map(|&y| {
            if rule.is_singleton(y, t0) {
                return Ok(1.0);
            }
            match &interp {
                Some(it) => it.value(y),
                None => conditional_order_mean(y, lambda, t0),
            }
        })
        .collect::<Result<_>>()?;
    let a_hat_b = per_clump_means.iter().copied().collect::<NeumaierSum>().value();
    Ok(FlowReport {
        a_hat_1: a_hat_1(lambda, sample.n, t0),
        a_hat_b,
        per_clump_means,
        lambda_used: lambda,
        interpolated: options.use_interp,
    })
}

/// Relative root mean squared error, `sqrt(mean((est - truth)^2)) / mean(truth)`.
pub fn rrmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::InvalidArgument(format!("{} estimates but {} truths", estimates.len(), truths.len())));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("rrmse needs at least one pair".into()));
    }
    let n = estimates.len() as f64;
    let mean_truth = truths.iter().copied().collect::<NeumaierSum>().value() / n;
    if !(mean_truth > 0.0) {
        return Err(Error::Domain(format!("mean truth must be positive, got {mean_truth}")));
    }
    let mse = estimates.iter().zip(truths).map(|(e, a)| (e - a) * (e - a)).collect::<NeumaierSum>().value() / n;
    Ok(mse.sqrt() / mean_truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClumpLengthDist;
    use crate::numerics::integrate;
    use rand::{Rng, SeedableRng};

    #[test]
    fn simple_estimators() {
        assert_eq!(expected_total_flow(0.3, 10000.0), 3000.0);
        assert_eq!(expected_total_flow(0.0, 10.0), 0.0);
        assert_eq!(a_hat_1(0.0, 17, 4.45), 17.0);
        let run1 = a_hat_1(0.070, 2958, 4.45);
        assert!((4039.0..=4041.0).contains(&run1), "{run1}");
        let run11 = a_hat_1(0.176, 1821, 4.45);
        assert!((3985.0..=3990.0).contains(&run11), "{run11}");
    }

    #[test]
    fn flow_from_lengths_is_n_at_zero_rate() {
        let s = ClumpSample::from_lengths(vec![2.0, 3.0, 7.5], 2.0, SingletonRule::default()).unwrap();
        assert_eq!(flow_from_lengths(0.0, &s), 3.0);
        assert!((flow_from_lengths(0.1, &s) - 4.25).abs() < 1e-12);
    }

    #[test]
    fn largest_division_examples() {
        assert!((largest_division_prob(1, 0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(largest_division_prob(3, 0.2).unwrap(), 0.0);
        assert_eq!(largest_division_prob(7, 1.0).unwrap(), 1.0);
        assert_eq!(largest_division_prob(0, 0.5).unwrap(), 0.0);
        assert!(largest_division_prob(3, 0.0).is_err());
    }

    #[test]
    fn largest_division_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let trials = 200_000;
        let mut hits = 0;
        let mut pts = [0.0f64; 5];
        for _ in 0..trials {
            for p in pts.iter_mut() {
                *p = rng.random();
            }
            pts.sort_by(f64::total_cmp);
            let mut gap = pts[0].max(1.0 - pts[4]);
            for w in pts.windows(2) {
                gap = gap.max(w[1] - w[0]);
            }
            if gap <= 0.5 {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / trials as f64;
        let p = largest_division_prob(5, 0.5).unwrap();
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((p_hat - p).abs() < 3.5 * se, "{p_hat} vs {p}");
    }

    #[test]
    fn largest_division_direct_and_log_forms_agree() {
        for n in [25u64, 30] {
            for &u in &[0.05, 0.08, 0.13, 0.3, 0.6] {
                let direct = largest_division_prob(n, u).unwrap();
                let dd = largest_division_prob_dd(n, u, ((1.0 / u).floor() as u64).min(n + 1)).clamp(0.0, 1.0);
                assert!((direct - dd).abs() < 1e-10, "n={n} u={u}");
            }
        }
        let mut prev = 0.0;
        for i in 1..=200 {
            let p = largest_division_prob(60, i as f64 / 200.0).unwrap();
            assert!(p >= prev - 1e-12);
            prev = p;
        }
    }

    #[test]
    fn pmf_translated_poisson_region() {
        let p2 = conditional_order_pmf(2, 3.0, 0.4, 2.0).unwrap();
        assert!((p2 - (-0.4f64).exp()).abs() < 1e-12);
        assert!((p2 - 0.6703).abs() < 1e-4);
        let total: f64 = (1..60).map(|k| conditional_order_pmf(k, 3.0, 0.4, 2.0).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-8);
        assert_eq!(conditional_order_pmf(2, 4.5, 0.4, 2.0).unwrap(), 0.0);
        assert_eq!(conditional_order_pmf(1, 2.0, 0.4, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn pmf_normalizes_beyond_twice_t0() {
        for &y in &[4.5, 7.3, 12.9, 25.0] {
            let total: f64 = (1..200).map(|k| conditional_order_pmf(k, y, 0.4, 2.0).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-8, "y={y}: {total}");
            let s = order_threshold(y, 2.0);
            for k in 1..=s {
                assert_eq!(conditional_order_pmf(k, y, 0.4, 2.0).unwrap(), 0.0);
            }
            let mean: f64 = (1..200).map(|k| k as f64 * conditional_order_pmf(k, y, 0.4, 2.0).unwrap()).sum();
            let exact = conditional_order_mean(y, 0.4, 2.0).unwrap();
            assert!((mean - exact).abs() < 1e-8 * exact, "y={y}: {mean} vs {exact}");
        }
    }

    #[test]
    fn mean_examples_and_jump() {
        assert_eq!(conditional_order_mean(2.0, 0.4, 2.0).unwrap(), 1.0);
        assert!((conditional_order_mean(3.0, 0.4, 2.0).unwrap() - 2.4).abs() < 1e-14);
        let left = conditional_order_mean(4.0, 0.4, 2.0).unwrap();
        let right = conditional_order_mean(4.0 + 1e-9, 0.4, 2.0).unwrap();
        let x: f64 = 0.8;
        let jump = x * (-x).exp() / (1.0 - (-x).exp());
        assert!((jump - 0.6527).abs() < 1e-4);
        assert!((right - left - jump).abs() < 1e-6, "{left} {right}");
        let limit = conditional_order_mean_right_of_jump(0.4, 2.0).unwrap();
        assert!((right - limit).abs() < 1e-6);
    }

    #[test]
    fn law_of_total_expectation() {
        for &lambda in &[0.2, 0.4] {
            for &t0 in &[2.0, 5.0] {
                let dist = ClumpLengthDist::new(lambda, t0).unwrap();
                let end = dist.tail_point(1e-12).unwrap();
                let mut acc = NeumaierSum::new();
                acc.add((-lambda * t0).exp());
                let mut lo = t0;
                while lo < end {
                    let hi = lo + t0;
                    let r = integrate(
                        |y| conditional_order_mean(y, lambda, t0).unwrap() * dist.density(y),
                        lo,
                        hi,
                        1e-10,
                        1e-10,
                        500,
                    )
                    .unwrap();
                    acc.add(r.value);
                    lo = hi;
                }
                let expect = (lambda * t0).exp();
                assert!((acc.value() - expect).abs() < 1e-4, "λ={lambda} t0={t0}: {}", acc.value());
            }
        }
    }

    #[test]
    fn interpolation_accuracy() {
        let (lambda, t0) = (0.4, 2.0);
        let step = t0 / 20.0;
        let it = OrderMeanInterpolator::new(lambda, t0, step, 6.0 * t0).unwrap();
        for i in 1..20 {
            let y = t0 + i as f64 * 0.05 * t0;
            assert!((it.value(y).unwrap() - (2.0 + lambda * (y - t0))).abs() < 1e-12);
        }
        let mut worst: f64 = 0.0;
        for i in 1..4000 {
            let y = 2.0 * t0 + i as f64 * (4.0 * t0) / 4000.0;
            let exact = conditional_order_mean(y, lambda, t0).unwrap();
            let a = it.value(y).unwrap();
            let b = conditional_order_mean_interp(y, lambda, t0, step).unwrap();
            assert!((a - b).abs() < 1e-10, "y={y}");
            worst = worst.max((a - exact).abs());
        }
        assert!(worst < 0.01, "{worst}");
        let knot = 3.0 * t0 + 7.0 * 0.1;
        assert!((it.value(knot).unwrap() - conditional_order_mean(knot, lambda, t0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bayes_estimator_basics() {
        let s = ClumpSample::from_lengths(vec![2.0; 5], 2.0, SingletonRule::default()).unwrap();
        let r = a_hat_bayes(&s, 0.3, 2.0, BayesOptions::default()).unwrap();
        assert_eq!(r.a_hat_b, 5.0);

        let s = ClumpSample::from_lengths(vec![2.0, 3.0, 4.5, 9.0], 2.0, SingletonRule::default()).unwrap();
        let r = a_hat_bayes(&s, 0.3, 2.0, BayesOptions::default()).unwrap();
        assert!(r.a_hat_b >= 4.0);
        let sum: f64 = r.per_clump_means.iter().sum();
        assert!((sum - r.a_hat_b).abs() < 1e-12);
        let ri = a_hat_bayes(&s, 0.3, 2.0, BayesOptions { use_interp: true, ..Default::default() }).unwrap();
        assert!((ri.a_hat_b - r.a_hat_b).abs() < 0.02);
        assert!(ri.interpolated);

        let bad = ClumpSample::from_lengths(vec![1.5, 3.0], 2.0, SingletonRule::default()).unwrap();
        assert!(a_hat_bayes(&bad, 0.3, 2.0, BayesOptions::default()).is_err());
        let tolerant = BayesOptions { singleton_rule: SingletonRule::AtMost { eps: 0.0 }, ..Default::default() };
        assert_eq!(a_hat_bayes(&bad, 0.3, 2.0, tolerant).unwrap().per_clump_means[0], 1.0);
    }

    #[test]
    fn rrmse_arithmetic() {
        assert_eq!(rrmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rrmse(&[110.0], &[100.0]).unwrap() - 0.10).abs() < 1e-15);
        assert!(rrmse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
