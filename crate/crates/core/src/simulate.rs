//! Ground-truth particle processes and the clumps a type-II counter records.
//!
//! Arrivals are generated by accumulating exponential gaps, and each arrival
//! immediately draws its segment length, so a longer horizon extends a stream
//! rather than reshuffling it. Clumps are maximal unions of overlapping
//! occupation intervals `[a_i, a_i + s_i]`; a clump still open at the horizon
//! is residual and excluded from the complete sample, but its particles count
//! toward the true total.

use crate::error::{Error, Result};
use crate::estimate::{ClumpSample, SingletonRule};
use crate::model::{ModelParams, SegmentLaw};
use crate::numerics::rng::cell_seed;
use crate::numerics::RandomStream;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One busy period of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clump {
    pub start: f64,
    pub length: f64,
    /// Number of particles in the clump.
    pub order: u64,
}

impl Clump {
    pub fn end(&self) -> f64 {
        self.start + self.length
    }
}

/// Clumps obtained from a sorted arrival sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClumpSweep {
    /// Clumps that ended by the horizon.
    pub clumps: Vec<Clump>,
    /// Idle time before each complete clump; the first runs from time 0.
    pub spacings: Vec<f64>,
    /// The clump still open at the horizon, if any.
    pub residual: Option<Clump>,
}

/// A simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub arrivals: Vec<f64>,
    pub segment_lengths: Vec<f64>,
    pub clumps: Vec<Clump>,
    pub spacings: Vec<f64>,
    pub residual: Option<Clump>,
    pub residual_open: bool,
    /// True number of arrivals in `[0, horizon]`.
    pub a_t: u64,
    pub horizon: f64,
}

impl SimRun {
    pub fn lengths(&self) -> Vec<f64> {
        self.clumps.iter().map(|c| c.length).collect()
    }

    pub fn orders(&self) -> Vec<u64> {
        self.clumps.iter().map(|c| c.order).collect()
    }

    /// Complete clumps as an estimation sample with known mean segment length `mu`.
    pub fn to_sample(&self, mu: f64, rule: SingletonRule) -> Result<ClumpSample> {
        ClumpSample::from_lengths(self.lengths(), mu, rule)?.with_spacings(self.spacings.clone())
    }
}

/// Sweeps sorted arrivals into clumps.
///
/// A new clump starts at `a_j` iff `a_j` lies strictly after the current
/// clump's end. Lengths are accumulated as offsets from the clump start, so a
/// singleton's length equals its segment length exactly.
pub fn clump_from_arrivals(arrivals: &[f64], segments: &[f64], horizon: f64) -> Result<ClumpSweep> {
    if arrivals.len() != segments.len() {
        return Err(Error::InvalidArgument(format!(
            "{} arrivals but {} segment lengths",
            arrivals.len(),
            segments.len()
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if let Some(i) = arrivals.windows(2).position(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument(format!("arrivals are not sorted at index {}", i + 1)));
    }
    if let Some(&a) = arrivals.iter().find(|a| !(a.is_finite() && **a >= 0.0 && **a <= horizon)) {
        return Err(Error::InvalidArgument(format!("arrival {a} outside [0, {horizon}]")));
    }
    if let Some(&s) = segments.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidArgument(format!("segment length must be positive, got {s}")));
    }

    let mut clumps = Vec::new();
    let mut spacings = Vec::new();
    let mut current: Option<Clump> = None;
    let mut last_end = 0.0;
    for (&a, &s) in arrivals.iter().zip(segments) {
        match current.as_mut() {
            Some(c) if a - c.start <= c.length => {
                c.length = c.length.max((a - c.start) + s);
                c.order += 1;
            }
            _ => {
                if let Some(done) = current.take() {
                    last_end = done.end();
                    clumps.push(done);
                }
                spacings.push(a - last_end);
                current = Some(Clump { start: a, length: s, order: 1 });
            }
        }
    }
    let mut residual = None;
    if let Some(c) = current {
        if c.end() > horizon {
            spacings.pop();
            residual = Some(c);
        } else {
            clumps.push(c);
        }
    }
    Ok(ClumpSweep { clumps, spacings, residual })
}

fn draw_segment<R: Rng>(law: &SegmentLaw, normal: Option<&Normal<f64>>, rng: &mut R) -> f64 {
    match (law, normal) {
        (SegmentLaw::Deterministic { t0 }, _) => *t0,
        (SegmentLaw::RandomNormal { mu, .. }, None) => *mu,
        (SegmentLaw::RandomNormal { .. }, Some(n)) => loop {
            let s = n.sample(rng);
            if s > 0.0 {
                break s;
            }
        },
    }
}

/// Simulates one experiment on `[0, horizon]`.
pub fn simulate_run(params: &ModelParams, stream: RandomStream) -> Result<SimRun> {
    let horizon = params.horizon.ok_or_else(|| Error::InvalidArgument("simulation requires a horizon".into()))?;
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", params.lambda)));
    }
    let law = params.segments.canonical();
    let normal = match law {
        SegmentLaw::RandomNormal { mu, sigma } => {
            Some(Normal::new(mu, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?)
        }
        SegmentLaw::Deterministic { .. } => None,
    };
    let gaps = Exp::new(params.lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = stream.rng();
    let expected = (params.lambda * horizon * 1.1) as usize + 16;
    let mut arrivals = Vec::with_capacity(expected);
    let mut segments = Vec::with_capacity(expected);
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t > horizon {
            break;
        }
        arrivals.push(t);
        segments.push(draw_segment(&law, normal.as_ref(), &mut rng));
    }
    simulate_with_arrivals(arrivals, segments, horizon)
}

/// Builds a run from injected arrivals and segment lengths.
pub fn simulate_with_arrivals(arrivals: Vec<f64>, segment_lengths: Vec<f64>, horizon: f64) -> Result<SimRun> {
    let sweep = clump_from_arrivals(&arrivals, &segment_lengths, horizon)?;
    Ok(SimRun {
        a_t: arrivals.len() as u64,
        arrivals,
        segment_lengths,
        clumps: sweep.clumps,
        spacings: sweep.spacings,
        residual_open: sweep.residual.is_some(),
        residual: sweep.residual,
        horizon,
    })
}

/// Crossed simulation design over rates, horizons and segment-length spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub lambdas: Vec<f64>,
    pub horizons: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub mu: f64,
    pub replicates: usize,
    pub master_seed: u64,
}

/// One `(sigma, horizon, lambda)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignCell {
    pub index: usize,
    pub sigma: f64,
    pub horizon: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl DesignCell {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.lambda, SegmentLaw::normal(self.mu, self.sigma)?.canonical(), Some(self.horizon))
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }
}

impl ExperimentDesign {
    /// The 3 x 2 x 3 design: `lambda` in {0.1, 0.2, 0.3}, `t` in {1000, 10000},
    /// `sigma` in {0, 0.5, 1}, `mu = 5`.
    pub fn standard(replicates: usize, master_seed: u64) -> Self {
        Self {
            lambdas: vec![0.1, 0.2, 0.3],
            horizons: vec![1000.0, 10000.0],
            sigmas: vec![0.0, 0.5, 1.0],
            mu: 5.0,
            replicates,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        crate::error::ensure_positive("mu", self.mu)?;
        if self.lambdas.is_empty() || self.horizons.is_empty() || self.sigmas.is_empty() {
            return Err(Error::InvalidArgument("design needs at least one rate, horizon and sigma".into()));
        }
        for &l in &self.lambdas {
            crate::error::ensure_positive("lambda", l)?;
        }
        for &t in &self.horizons {
            crate::error::ensure_positive("horizon", t)?;
        }
        for &s in &self.sigmas {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {s}")));
            }
        }
        Ok(())
    }

    /// Cells ordered by sigma, then horizon, then lambda.
    pub fn cells(&self) -> Vec<DesignCell> {
        let mut out = Vec::new();
        for &sigma in &self.sigmas {
            for &horizon in &self.horizons {
                for &lambda in &self.lambdas {
                    out.push(DesignCell { index: out.len(), sigma, horizon, lambda, mu: self.mu });
                }
            }
        }
        out
    }

    /// Random stream of replicate `replicate` in cell `cell`.
    pub fn stream(&self, cell: usize, replicate: usize) -> RandomStream {
        RandomStream::new(cell_seed(self.master_seed, cell as u64), replicate as u64)
    }
}

/// Runs every replicate of every cell, possibly in parallel, and applies `f`
/// to each run. Results are grouped by cell in design order and by replicate
/// index within a cell, independent of scheduling.
pub fn map_design<T, F>(design: &ExperimentDesign, f: F) -> Result<Vec<(DesignCell, Vec<T>)>>
where
    T: Send,
    F: Fn(&DesignCell, usize, SimRun) -> Result<T> + Sync,
{
    design.validate()?;
    map_cells(&design.cells(), design.replicates, design.master_seed, f)
}

/// [`map_design`] over an explicit list of cells. Replicate `r` of a cell
/// uses stream `(cell_seed(master_seed, cell.index), r)`, so a cell gives the
/// same runs whether simulated alone or as part of a full design.
pub fn map_cells<T, F>(
    cells: &[DesignCell],
    replicates: usize,
    master_seed: u64,
    f: F,
) -> Result<Vec<(DesignCell, Vec<T>)>>
where
    T: Send,
    F: Fn(&DesignCell, usize, SimRun) -> Result<T> + Sync,
{
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..replicates).map(move |r| (c, r))).collect();
    let results: Vec<Result<T>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cell = &cells[c];
            let wrap = |e: Error| Error::Simulation { cell: cell.index, replicate: r, source: Box::new(e) };
            let stream = RandomStream::new(cell_seed(master_seed, cell.index as u64), r as u64);
            let run = simulate_run(&cell.params().map_err(wrap)?, stream).map_err(wrap)?;
            f(cell, r, run).map_err(wrap)
        })
        .collect();
    let mut iter = results.into_iter();
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut reps = Vec::with_capacity(replicates);
        for _ in 0..replicates {
            reps.push(iter.next().expect("one result per job")?);
        }
        out.push((*cell, reps));
    }
    Ok(out)
}

/// Per-replicate ground truth kept alongside the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub replicate: usize,
    pub a_t: u64,
    pub n_complete: usize,
    pub residual_open: bool,
    pub residual_order: u64,
    /// Orders of the complete clumps, parallel to the sample's lengths.
    pub orders: Vec<u64>,
}

/// Replicate output of [`run_design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutput {
    pub summary: RunSummary,
    /// `None` when the run produced no complete clump.
    pub sample: Option<ClumpSample>,
}

/// Runs the design and returns, per cell, each replicate's ground truth and
/// complete-clump sample.
pub fn run_design(design: &ExperimentDesign) -> Result<Vec<(DesignCell, Vec<ReplicateOutput>)>> {
    map_design(design, |cell, replicate, run| {
        let sample = if run.clumps.is_empty() { None } else { Some(run.to_sample(cell.mu, SingletonRule::default())?) };
        Ok(ReplicateOutput {
            summary: RunSummary {
                replicate,
                a_t: run.a_t,
                n_complete: run.clumps.len(),
                residual_open: run.residual_open,
                residual_order: run.residual.map_or(0, |c| c.order),
                orders: run.orders(),
            },
            sample,
        })
    })
}
