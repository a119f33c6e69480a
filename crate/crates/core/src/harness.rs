//! Replicated experiments and report assembly behind the command-line tool.
//!
//! Every table is computed from per-replicate results that are collected in
//! design order, so output depends only on the configuration and seed.

use crate::error::{Error, Result};
use crate::estimate::{m_estimate, mle_dsl, ClumpSample, EstimateReport, MleOptions, SingletonRule};
use crate::flow::{a_hat_1, a_hat_bayes, rrmse, BayesOptions, FlowReport};
use crate::ingest::{
    build_sample, clean_records, parse_counter_csv, record_lengths, summarize_run, CsvSchema, Domain, RemovalReport,
    RunSummary, DEFAULT_MIN_FRAC,
};
use crate::model::{expected_clump_count, ClumpLengthDist};
use crate::numerics::{ks_p_value, ks_statistic, ks_statistic_with_atoms, norm_cdf, norm_quantile, NeumaierSum};
use crate::simulate::{map_cells, DesignCell, ExperimentDesign};
use serde::{Deserialize, Serialize};

/// Version of the CSV and JSON layouts written by the tool.
pub const SCHEMA_VERSION: u32 = 1;

/// Singleton rule used on simulated samples: lengths up to `t0` (plus
/// rounding slack) count as singletons, which also covers random-segment
/// clumps shorter than the mean segment length.
pub const SIMULATION_SINGLETON_RULE: SingletonRule = SingletonRule::AtMost { eps: 1e-6 };

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().copied().collect::<NeumaierSum>().value() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    crate::estimate::welford(xs).1
}

fn covers(ci: Option<(f64, f64)>, truth: f64) -> bool {
    ci.is_some_and(|(lo, hi)| lo <= truth && truth <= hi)
}

fn fraction(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return f64::NAN;
    }
    flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
}

/// Cells of the standard design, or those given as `sigma:t:lambda` triples.
///
/// Cells that belong to the standard design keep their standard index (and
/// hence their random streams); others are numbered from 1000 in list order.
pub fn select_cells(cells: Option<&str>, mu: f64) -> Result<Vec<DesignCell>> {
    let standard = ExperimentDesign { mu, ..ExperimentDesign::standard(1, 0) }.cells();
    let Some(cells) = cells else { return Ok(standard) };
    let mut out = Vec::new();
    for (pos, item) in cells.split(',').map(str::trim).filter(|s| !s.is_empty()).enumerate() {
        let parts: Vec<&str> = item.split(':').collect();
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("cell '{item}' is not sigma:t:lambda")))?;
        if nums.len() != 3 {
            return Err(Error::InvalidArgument(format!("cell '{item}' is not sigma:t:lambda")));
        }
        let (sigma, horizon, lambda) = (nums[0], nums[1], nums[2]);
        if !(sigma >= 0.0 && horizon > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("cell '{item}' needs sigma >= 0, t > 0, lambda > 0")));
        }
        let index = standard
            .iter()
            .find(|c| c.sigma == sigma && c.horizon == horizon && c.lambda == lambda)
            .map_or(1000 + pos, |c| c.index);
        out.push(DesignCell { index, sigma, horizon, lambda, mu });
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no cells given".into()));
    }
    Ok(out)
}

/// Per-replicate quantities for the rate-estimator table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReplicate {
    pub n: usize,
    pub lambda_m: f64,
    pub lambda_mle: Option<f64>,
    pub covered_lrt: bool,
    pub covered_se: bool,
    pub covered_se_g: bool,
}

/// One row of the rate-estimation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub schema_version: u32,
    pub seed: u64,
    pub sigma: f64,
    pub t: f64,
    pub lambda: f64,
    pub reps: usize,
    pub mean_n: f64,
    /// `lambda t e^{-lambda mu}`.
    pub expected_n: f64,
    pub rel_bias_m: f64,
    pub rel_bias_mle: f64,
    /// `var(MLE) / var(M)`.
    pub rel_eff_mle_vs_m: f64,
    /// `var(M) / var(MLE)`.
    pub rel_eff_m_vs_mle: f64,
    pub coverage_lrt: f64,
    pub coverage_se: f64,
    pub coverage_se_g: f64,
    /// Replicates where the MLE could not be computed.
    pub mle_failures: usize,
}

fn lambda_replicate(cell: &DesignCell, sample: Option<ClumpSample>) -> Result<LambdaReplicate> {
    let Some(sample) = sample else {
        return Ok(LambdaReplicate {
            n: 0,
            lambda_m: f64::NAN,
            lambda_mle: None,
            covered_lrt: false,
            covered_se: false,
            covered_se_g: false,
        });
    };
    let m = m_estimate(&sample)?;
    let mle = match mle_dsl(&sample, MleOptions::default()) {
        Ok(r) => Some(r),
        Err(e) if e.is_numerical() => None,
        Err(e) => return Err(e),
    };
    Ok(LambdaReplicate {
        n: sample.n,
        lambda_m: m.lambda_hat,
        lambda_mle: mle.as_ref().map(|r| r.lambda_hat),
        covered_lrt: covers(mle.as_ref().and_then(|r| r.ci_lrt), cell.lambda),
        covered_se: covers(m.ci_wald_dsl, cell.lambda),
        covered_se_g: covers(m.ci_wald, cell.lambda),
    })
}

/// Summarizes replicate results of one cell.
pub fn table1_row(cell: &DesignCell, reps: &[LambdaReplicate], seed: u64) -> Result<Table1Row> {
    let ns: Vec<f64> = reps.iter().map(|r| r.n as f64).collect();
    let ms: Vec<f64> = reps.iter().map(|r| r.lambda_m).filter(|x| x.is_finite()).collect();
    let mles: Vec<f64> = reps.iter().filter_map(|r| r.lambda_mle).collect();
    let var_m = variance(&ms);
    let var_mle = variance(&mles);
    Ok(Table1Row {
        schema_version: SCHEMA_VERSION,
        seed,
        sigma: cell.sigma,
        t: cell.horizon,
        lambda: cell.lambda,
        reps: reps.len(),
        mean_n: mean(&ns),
        expected_n: expected_clump_count(cell.lambda, cell.mu, cell.horizon)?,
        rel_bias_m: (mean(&ms) - cell.lambda) / cell.lambda,
        rel_bias_mle: (mean(&mles) - cell.lambda) / cell.lambda,
        rel_eff_mle_vs_m: var_mle / var_m,
        rel_eff_m_vs_mle: var_m / var_mle,
        coverage_lrt: fraction(&reps.iter().map(|r| r.covered_lrt).collect::<Vec<_>>()),
        coverage_se: fraction(&reps.iter().map(|r| r.covered_se).collect::<Vec<_>>()),
        coverage_se_g: fraction(&reps.iter().map(|r| r.covered_se_g).collect::<Vec<_>>()),
        mle_failures: reps.len() - mles.len(),
    })
}

/// Rate-estimation study over `cells`.
pub fn table1(cells: &[DesignCell], reps: usize, seed: u64) -> Result<Vec<Table1Row>> {
    let results = map_cells(cells, reps, seed, |cell, _, run| {
        let sample =
            if run.clumps.is_empty() { None } else { Some(run.to_sample(cell.mu, SIMULATION_SINGLETON_RULE)?) };
        lambda_replicate(cell, sample)
    })?;
    results.iter().map(|(cell, reps)| table1_row(cell, reps, seed)).collect()
}

/// Per-replicate quantities for the total-flow table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowReplicate {
    pub a_t: u64,
    pub n: usize,
    pub lambda_m: f64,
    pub a_hat_1: f64,
    pub a_hat_b: f64,
}

/// One row of the total-flow table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub schema_version: u32,
    pub seed: u64,
    pub sigma: f64,
    pub t: f64,
    pub lambda: f64,
    pub reps: usize,
    pub mean_a: f64,
    pub rel_bias_a1: f64,
    pub rel_bias_ab: f64,
    pub rrmse_a1: f64,
    pub rrmse_ab: f64,
}

/// Smallest rate handed to the Bayes estimator when the M-estimate is not positive.
const MIN_FLOW_RATE: f64 = 1e-9;

/// Both total-flow estimates for one sample at the M-estimate of the rate.
pub fn flow_estimates(sample: &ClumpSample, t0: f64, rule: SingletonRule) -> Result<(EstimateReport, FlowReport)> {
    let m = m_estimate(sample)?;
    let lambda = m.lambda_hat.max(MIN_FLOW_RATE);
    let mut flow = a_hat_bayes(sample, lambda, t0, BayesOptions { singleton_rule: rule, ..Default::default() })?;
    flow.a_hat_1 = a_hat_1(m.lambda_hat, sample.n, t0);
    Ok((m, flow))
}

/// Total-flow study over `cells`.
pub fn table2(cells: &[DesignCell], reps: usize, seed: u64) -> Result<Vec<Table2Row>> {
    let results = map_cells(cells, reps, seed, |cell, _, run| {
        if run.clumps.is_empty() {
            return Ok(FlowReplicate { a_t: run.a_t, n: 0, lambda_m: f64::NAN, a_hat_1: 0.0, a_hat_b: 0.0 });
        }
        let sample = run.to_sample(cell.mu, SIMULATION_SINGLETON_RULE)?;
        let (m, flow) = flow_estimates(&sample, cell.mu, SIMULATION_SINGLETON_RULE)?;
        Ok(FlowReplicate {
            a_t: run.a_t,
            n: sample.n,
            lambda_m: m.lambda_hat,
            a_hat_1: flow.a_hat_1,
            a_hat_b: flow.a_hat_b,
        })
    })?;
    results
        .iter()
        .map(|(cell, reps)| {
            let truth: Vec<f64> = reps.iter().map(|r| r.a_t as f64).collect();
            let a1: Vec<f64> = reps.iter().map(|r| r.a_hat_1).collect();
            let ab: Vec<f64> = reps.iter().map(|r| r.a_hat_b).collect();
            let mean_a = mean(&truth);
            Ok(Table2Row {
                schema_version: SCHEMA_VERSION,
                seed,
                sigma: cell.sigma,
                t: cell.horizon,
                lambda: cell.lambda,
                reps: reps.len(),
                mean_a,
                rel_bias_a1: (mean(&a1) - mean_a) / mean_a,
                rel_bias_ab: (mean(&ab) - mean_a) / mean_a,
                rrmse_a1: rrmse(&a1, &truth)?,
                rrmse_ab: rrmse(&ab, &truth)?,
            })
        })
        .collect()
}

/// Writes table rows as CSV, one header line then one line per row.
pub fn write_table_csv<W: std::io::Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width histogram of clump lengths with the fitted model's expected counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Expected count under the fitted deterministic-segment model.
    pub expected: f64,
}

/// Bins of width `width` starting at `t0`; the first bin also collects
/// everything at or below `t0` and its expectation includes the singleton mass.
pub fn length_histogram(lengths: &[f64], lambda: f64, t0: f64, width: f64) -> Result<Vec<HistogramBin>> {
    crate::error::ensure_positive("width", width)?;
    let dist = ClumpLengthDist::new(lambda.max(0.0), t0)?;
    let y_max = lengths.iter().copied().fold(t0, f64::max);
    let nbins = (((y_max - t0) / width).floor() as usize) + 1;
    let mut counts = vec![0usize; nbins];
    for &y in lengths {
        let i = if y <= t0 { 0 } else { (((y - t0) / width).floor() as usize).min(nbins - 1) };
        counts[i] += 1;
    }
    let n = lengths.len() as f64;
    (0..nbins)
        .map(|i| {
            let lo = t0 + i as f64 * width;
            let hi = lo + width;
            let mut mass = dist.integrate_continuous(lo, hi)?;
            if i == 0 {
                mass += dist.singleton_mass();
            }
            Ok(HistogramBin { lo, hi, count: counts[i], expected: n * mass })
        })
        .collect()
}

/// Fitted continuous density at bin midpoints, scaled to counts per bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub y: f64,
    pub density: f64,
}

pub fn density_curve(lambda: f64, t0: f64, y_max: f64, points: usize) -> Result<Vec<DensityPoint>> {
    let dist = ClumpLengthDist::new(lambda.max(0.0), t0)?;
    let points = points.max(2);
    Ok((1..=points)
        .map(|i| {
            let y = t0 + (y_max - t0) * i as f64 / points as f64;
            DensityPoint { y, density: dist.density(y) }
        })
        .collect())
}

/// Everything `analyze` reports for one input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub input: String,
    pub summary: RunSummary,
    pub mu: f64,
    pub m_estimate: EstimateReport,
    pub mle: Option<EstimateReport>,
    pub a_hat_1: f64,
    pub a_hat_b: Option<f64>,
    pub histogram: Vec<HistogramBin>,
    pub density: Vec<DensityPoint>,
    pub rejects: usize,
    pub removal: RemovalReport,
    pub notes: Vec<String>,
}

/// Options for [`analyze_file`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub schema: CsvSchema,
    /// Particle diameter in mm.
    pub mu_mm: f64,
    pub domain: Domain,
    pub min_frac: f64,
    pub singleton_tol: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            schema: CsvSchema::DtfDtb,
            mu_mm: 4.45,
            domain: Domain::Physical,
            min_frac: DEFAULT_MIN_FRAC,
            singleton_tol: 1e-6,
        }
    }
}

/// Ingest, clean, estimate, and summarize one counter file.
pub fn analyze_file(path: &std::path::Path, opts: &AnalyzeOptions) -> Result<AnalyzeReport> {
    let with_ctx = |e: Error| match e {
        Error::Io(m) => Error::Io(m),
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    };
    let parsed = parse_counter_csv(path, opts.schema).map_err(with_ctx)?;
    if parsed.records.is_empty() {
        return Err(Error::Data(format!("{}: no usable records", path.display())));
    }
    let (kept, removal) = clean_records(&parsed.records, opts.mu_mm / 1000.0, opts.min_frac)?;
    if kept.is_empty() {
        return Err(Error::Data(format!("{}: every record was removed by cleaning", path.display())));
    }
    let run_id = path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
    let summary = summarize_run(&run_id, &kept, &removal, opts.domain)?;
    let lengths = record_lengths(&kept, opts.domain)?;
    let mu = match opts.domain {
        Domain::Physical => opts.mu_mm,
        Domain::Time => opts.mu_mm / summary.vbar,
    };
    let sample = build_sample(&lengths, mu, opts.singleton_tol)?;
    let m = m_estimate(&sample)?;
    let mut notes = vec!["MLE assumes deterministic segment lengths; treat it with caution on real data".to_string()];
    let mle = match mle_dsl(&sample, MleOptions::default()) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("MLE unavailable: {e}"));
            None
        }
    };
    let a_hat_b = if m.lambda_hat > 0.0 {
        let rule = SingletonRule::AtMost { eps: opts.singleton_tol };
        Some(
            a_hat_bayes(
                &sample,
                m.lambda_hat,
                mu,
                BayesOptions { singleton_rule: rule, use_interp: true, ..Default::default() },
            )?
            .a_hat_b,
        )
    } else {
        notes.push("Bayes flow estimate needs a positive rate".into());
        None
    };
    let y_max = lengths.iter().copied().fold(mu, f64::max);
    Ok(AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        input: path.display().to_string(),
        mu,
        a_hat_1: a_hat_1(m.lambda_hat, sample.n, mu),
        a_hat_b,
        histogram: length_histogram(&lengths, m.lambda_hat, mu, mu / 4.0)?,
        density: density_curve(m.lambda_hat, mu, y_max, 200)?,
        m_estimate: m,
        mle,
        rejects: parsed.rejects.len(),
        removal,
        summary,
        notes,
    })
}

/// Kolmogorov-Smirnov comparison of a standardized sample with N(0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityCheck {
    pub name: String,
    pub n: usize,
    pub ks: f64,
    pub p_value: f64,
    pub degenerate: bool,
    /// `(normal quantile, standardized order statistic)` pairs.
    pub qq: Vec<(f64, f64)>,
}

pub fn normality_check(name: &str, xs: &[f64]) -> Result<NormalityCheck> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument(format!("{name}: no values")));
    }
    let m = mean(xs);
    let sd = variance(xs).sqrt();
    let degenerate = !(sd > 0.0);
    let mut z: Vec<f64> = xs.iter().map(|x| if degenerate { 0.0 } else { (x - m) / sd }).collect();
    z.sort_by(f64::total_cmp);
    let ks = ks_statistic_with_atoms(&z, |x| (norm_cdf(x), norm_cdf(x)))?;
    let n = z.len();
    let qq = z.iter().enumerate().map(|(i, &v)| (norm_quantile((i as f64 + 0.5) / n as f64), v)).collect();
    Ok(NormalityCheck { name: name.to_string(), n, ks, p_value: ks_p_value(ks, n), degenerate, qq })
}

/// Output of the goodness-of-fit command for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub schema_version: u32,
    pub cell: DesignCell,
    pub reps: usize,
    pub seed: u64,
    pub checks: Vec<NormalityCheck>,
    /// KS distance of the first replicate's clump lengths from the model fitted at its M-estimate.
    pub length_ks: f64,
    pub length_ks_critical_99: f64,
    pub warnings: Vec<String>,
}

/// Normality of replicate-level `lambda`, `N` and `A_1`, plus a clump-length fit check.
pub fn gof(cell: &DesignCell, reps: usize, seed: u64) -> Result<GofReport> {
    let results = map_cells(std::slice::from_ref(cell), reps, seed, |cell, r, run| {
        let sample = run.to_sample(cell.mu, SIMULATION_SINGLETON_RULE)?;
        let m = m_estimate(&sample)?;
        let length_ks = if r == 0 && cell.is_deterministic() && m.lambda_hat > 0.0 {
            let dist = ClumpLengthDist::new(m.lambda_hat, cell.mu)?;
            let mut ys = sample.lengths.clone();
            ys.sort_by(f64::total_cmp);
            let cdf = dist.cdf_sorted(&ys)?;
            let lookup = |x: f64| {
                let c = cdf[ys.partition_point(|&v| v < x).min(ys.len() - 1)];
                if x == cell.mu {
                    (0.0, c)
                } else {
                    (c, c)
                }
            };
            Some((ks_statistic_with_atoms(&ys, lookup)?, ys.len()))
        } else {
            None
        };
        Ok((sample.n, m.lambda_hat, a_hat_1(m.lambda_hat, sample.n, cell.mu), length_ks))
    })?;
    let reps_out = &results[0].1;
    let mut warnings = Vec::new();
    if reps < 10 {
        warnings.push(format!("only {reps} replicates; normality checks are unreliable below 10"));
    }
    let ns: Vec<f64> = reps_out.iter().map(|r| r.0 as f64).collect();
    let ls: Vec<f64> = reps_out.iter().map(|r| r.1).collect();
    let a1: Vec<f64> = reps_out.iter().map(|r| r.2).collect();
    let checks = vec![normality_check("lambda_m", &ls)?, normality_check("n", &ns)?, normality_check("a_hat_1", &a1)?];
    for c in &checks {
        if c.degenerate {
            warnings.push(format!("{}: all replicates equal", c.name));
        }
    }
    let (length_ks, n_len) = reps_out[0].3.unwrap_or((f64::NAN, 0));
    if reps_out[0].3.is_none() {
        warnings.push("clump-length fit check needs deterministic segments and a positive estimate".into());
    }
    Ok(GofReport {
        schema_version: SCHEMA_VERSION,
        cell: *cell,
        reps,
        seed,
        checks,
        length_ks,
        length_ks_critical_99: if n_len > 0 { crate::numerics::ks::ks_critical_99(n_len) } else { f64::NAN },
        warnings,
    })
}

/// KS distance of `spacings` from Exponential(`lambda`).
pub fn spacing_ks(spacings: &[f64], lambda: f64) -> Result<f64> {
    ks_statistic(spacings, |z| -(-lambda * z).exp_m1())
}
