use super::{m_estimate_stats, ClumpSample, EstimateReport, Method};
use crate::error::{Error, Result};
use crate::model::clump_density;
use crate::numerics::root::{find_root, RootBracket};
use crate::numerics::{chi2_quantile_1df, NeumaierSum};

/// Tuning for [`mle_dsl`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Include the exponential spacings factor when spacings are present.
    pub use_spacings: bool,
    /// Smallest rate the search may return.
    pub lower_floor: f64,
    /// Relative width at which golden-section search stops.
    pub rel_tol: f64,
    /// Grid size for the unimodality check.
    pub profile_points: usize,
    /// Confidence level of the likelihood-ratio interval.
    pub level: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { use_spacings: false, lower_floor: 1e-6, rel_tol: 1e-9, profile_points: 41, level: 0.95 }
    }
}

/// Lengths and counts the likelihood depends on, extracted once.
struct LikelihoodData {
    t0: f64,
    m1: usize,
    multi: Vec<f64>,
    spacings: Option<(usize, f64)>,
}

impl LikelihoodData {
    fn new(sample: &ClumpSample, use_spacings: bool) -> Result<Self> {
        let t0 = sample.mu;
        let rule = sample.singleton_rule;
        let mut multi = Vec::with_capacity(sample.n);
        let mut m1 = 0;
        for (i, &y) in sample.lengths.iter().enumerate() {
            if rule.is_singleton(y, t0) {
                m1 += 1;
            } else if y <= t0 {
                return Err(Error::Classification(format!(
                    "clump {i} has length {y} <= t0 = {t0} but is not a singleton"
                )));
            } else {
                multi.push(y);
            }
        }
        let spacings = match (&sample.spacings, use_spacings) {
            (Some(z), true) => Some((z.len(), z.iter().copied().collect::<NeumaierSum>().value())),
            _ => None,
        };
        Ok(Self { t0, m1, multi, spacings })
    }

    fn log_likelihood(&self, lambda: f64) -> f64 {
        if !(lambda > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut acc = NeumaierSum::new();
        acc.add(-(self.m1 as f64) * lambda * self.t0);
        for &y in &self.multi {
            match clump_density(y, lambda, self.t0) {
                Ok(f) if f > 0.0 => acc.add(f.ln()),
                _ => return f64::NEG_INFINITY,
            }
        }
        if let Some((count, total)) = self.spacings {
            acc.add(count as f64 * lambda.ln() - lambda * total);
        }
        acc.value()
    }
}

/// Log partial Boolean likelihood of `sample` at `lambda`:
/// `-m1 lambda t0 + sum_{y > t0} ln f(y)`, plus `N ln lambda - lambda sum z`
/// when `use_spacings` is set and spacings are present.
pub fn partial_log_likelihood(sample: &ClumpSample, lambda: f64, use_spacings: bool) -> Result<f64> {
    Ok(LikelihoodData::new(sample, use_spacings)?.log_likelihood(lambda))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization on `[a, b]`.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a) <= rel_tol * (a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Fails when the log likelihood has more than one local maximum on a
/// geometric grid over `[lo, hi]`.
fn check_unimodal<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize) -> Result<()> {
    let points = points.max(3);
    let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = lo * ratio.powi(i as i32);
            (x, f(x))
        })
        .collect();
    let scale = grid.iter().map(|p| p.1.abs()).filter(|v| v.is_finite()).fold(1.0, f64::max);
    let noise = 1e-10 * scale;
    let mut signs = Vec::with_capacity(points);
    for w in grid.windows(2) {
        let diff = w[1].1 - w[0].1;
        if diff.is_nan() {
            continue;
        }
        if diff > noise {
            signs.push(1);
        } else if diff < -noise {
            signs.push(-1);
        }
    }
    // A unimodal profile rises, then falls: at most one sign change, and it goes + to -.
    let changes: Vec<_> = signs.windows(2).filter(|w| w[0] != w[1]).map(|w| (w[0], w[1])).collect();
    let ok = changes.is_empty() || (changes.len() == 1 && changes[0] == (1, -1));
    if ok {
        Ok(())
    } else {
        let dump = grid.iter().map(|(x, v)| format!("{x:.6e}:{v:.10e}")).collect::<Vec<_>>().join(", ");
        Err(Error::NotUnimodal(format!("log likelihood profile [{dump}]")))
    }
}

/// Maximum likelihood estimate of `lambda` under deterministic segments.
///
/// The search starts from the M-estimate `lambda0` on
/// `[max(floor, lambda0 / 10), 10 lambda0]` and doubles outward while the
/// maximum sits on an endpoint. The report carries a likelihood-ratio
/// interval at `options.level`.
pub fn mle_dsl(sample: &ClumpSample, options: MleOptions) -> Result<EstimateReport> {
    if sample.n == 0 {
        return Err(Error::InvalidArgument("sample must contain at least one clump".into()));
    }
    let data = LikelihoodData::new(sample, options.use_spacings)?;
    let ll = |lambda: f64| data.log_likelihood(lambda);
    let floor = options.lower_floor;

    let lambda0 = m_estimate_stats(&sample.stats()).map(|r| r.lambda_hat).unwrap_or(0.0);
    let anchor = if lambda0 > floor { lambda0 } else { floor * 10.0 };
    let mut lo = (anchor / 10.0).max(floor);
    let mut hi = anchor * 10.0;

    let mut at_floor = false;
    let (lambda_hat, ll_hat) = loop {
        let (x, v) = golden_max(ll, lo, hi, options.rel_tol);
        let width = hi - lo;
        if x >= hi - 1e-6 * width && hi < 1e6 {
            lo = hi / 2.0;
            hi *= 2.0;
            continue;
        }
        if x <= lo + 1e-6 * width {
            if lo <= floor {
                at_floor = true;
                let v_floor = ll(floor);
                break if v_floor >= v { (floor, v_floor) } else { (x, v) };
            }
            hi = lo * 2.0;
            lo = (lo / 2.0).max(floor);
            continue;
        }
        break (x, v);
    };
    if !ll_hat.is_finite() {
        return Err(Error::Domain("log likelihood is not finite at the maximum".into()));
    }

    let mut report = EstimateReport::new(Method::Mle, lambda_hat);
    report.note("n", sample.n);
    report.note("m1", data.m1);
    report.note("log_likelihood", ll_hat);
    report.note("use_spacings", data.spacings.is_some());
    if at_floor {
        report.note("boundary", format!("maximum at the lower search bound {floor}"));
        return Ok(report);
    }

    let span_lo = (lambda_hat / 4.0).max(floor);
    check_unimodal(ll, span_lo, lambda_hat * 4.0, options.profile_points)?;

    let cut = chi2_quantile_1df(options.level) / 2.0;
    let g = |lambda: f64| ll_hat - data.log_likelihood(lambda) - cut;
    let tol = 1e-10 * lambda_hat;

    let mut left = lambda_hat;
    let lower = loop {
        left = (left / 2.0).max(floor);
        if g(left) > 0.0 {
            break Some(find_root(g, RootBracket::new(g, left, lambda_hat)?, tol)?);
        }
        if left <= floor {
            report.note("ci_lrt_lower", "interval reaches the lower search bound");
            break Some(floor);
        }
    };
    let mut right = lambda_hat;
    let mut upper = None;
    for _ in 0..60 {
        right *= 2.0;
        if g(right) > 0.0 {
            upper = Some(find_root(g, RootBracket::new(g, lambda_hat, right)?, tol)?);
            break;
        }
    }
    if let (Some(l), Some(u)) = (lower, upper) {
        report.ci_lrt = Some((l, u));
    } else {
        report.note("ci_lrt", "upper endpoint not found");
    }
    Ok(report)
}
