//! Raw type-II counter records: parsing, velocity and length derivation,
//! outlier screening, unit transforms and sample construction.
//!
//! The counter has two sensor arrays `SENSOR_GAP_M` apart. A clump's velocity
//! is the gap divided by the array-to-array transit time `dt_f`, and its
//! physical length is that velocity times the total blocked time `dt_b`.
//! Velocities in m/s equal mm/msec, which is how lengths in mm are turned
//! into passage times in msec.

use crate::error::{ensure_positive, Error, Result};
use crate::estimate::{welford, ClumpSample, SingletonRule};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

/// Distance between the two sensor arrays, in meters.
pub const SENSOR_GAP_M: f64 = 0.00078;

/// Accepted input layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsvSchema {
    /// Columns `dt_f_s,dt_b_s`: transit and blocked times in seconds.
    DtfDtb,
    /// Columns `v_m_s,cl_m`: velocity in m/s and clump length in meters.
    VCl,
}

impl CsvSchema {
    pub fn columns(&self) -> [&'static str; 2] {
        match self {
            CsvSchema::DtfDtb => ["dt_f_s", "dt_b_s"],
            CsvSchema::VCl => ["v_m_s", "cl_m"],
        }
    }

    /// Picks the schema whose columns match a header row.
    pub fn detect(header: &[&str]) -> Option<Self> {
        [CsvSchema::DtfDtb, CsvSchema::VCl].into_iter().find(|s| header == s.columns())
    }
}

impl FromStr for CsvSchema {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtf_dtb" => Ok(CsvSchema::DtfDtb),
            "v_cl" => Ok(CsvSchema::VCl),
            other => Err(Error::InvalidArgument(format!("unknown schema '{other}' (expected dtf_dtb or v_cl)"))),
        }
    }
}

/// One clump as recorded by the counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterRecord {
    /// 1-based data row in the source file.
    pub row: usize,
    pub dt_f: Option<f64>,
    pub dt_b: Option<f64>,
    /// Velocity in m/s.
    pub v: f64,
    /// Clump length in meters.
    pub cl: f64,
}

impl CounterRecord {
    pub fn from_times(row: usize, dt_f: f64, dt_b: f64) -> Result<Self> {
        if !(dt_f.is_finite() && dt_b.is_finite()) {
            return Err(Error::Data("times must be finite".into()));
        }
        if dt_f == 0.0 {
            return Err(Error::Data("zero transit time (infinite velocity)".into()));
        }
        let v = SENSOR_GAP_M / dt_f;
        Ok(Self { row, dt_f: Some(dt_f), dt_b: Some(dt_b), v, cl: v * dt_b })
    }

    pub fn from_velocity(row: usize, v: f64, cl: f64) -> Result<Self> {
        if !(v.is_finite() && cl.is_finite()) {
            return Err(Error::Data("velocity and length must be finite".into()));
        }
        Ok(Self { row, dt_f: None, dt_b: None, v, cl })
    }

    pub fn cl_mm(&self) -> f64 {
        self.cl * 1000.0
    }
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub row: usize,
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedCounterData {
    pub records: Vec<CounterRecord>,
    pub rejects: Vec<Reject>,
}

/// Reads a counter CSV whose header must match `schema`.
pub fn parse_counter_csv(path: impl AsRef<Path>, schema: CsvSchema) -> Result<ParsedCounterData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_counter_reader(file, schema)
}

/// [`parse_counter_csv`] over any reader.
pub fn parse_counter_reader<R: Read>(reader: R, schema: CsvSchema) -> Result<ParsedCounterData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = ParsedCounterData::default();
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Ok(out),
        Some(h) => h?,
    };
    let header: Vec<&str> = header.iter().collect();
    if header != schema.columns() {
        return Err(Error::Data(format!("header {:?} does not match schema columns {:?}", header, schema.columns())));
    }
    for (i, rec) in rows.enumerate() {
        let row = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Reject { row, reason: e.to_string(), raw: String::new() });
                continue;
            }
        };
        let raw = rec.iter().collect::<Vec<_>>().join(",");
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed = parse_row(row, &rec, schema);
        match parsed {
            Ok(r) => out.records.push(r),
            Err(e) => out.rejects.push(Reject { row, reason: reason_text(&e), raw }),
        }
    }
    Ok(out)
}

fn reason_text(e: &Error) -> String {
    match e {
        Error::Data(m) => m.clone(),
        other => other.to_string(),
    }
}

fn parse_row(row: usize, rec: &csv::StringRecord, schema: CsvSchema) -> Result<CounterRecord> {
    if rec.len() != 2 {
        return Err(Error::Data(format!("expected 2 fields, found {}", rec.len())));
    }
    let num = |i: usize| -> Result<f64> {
        rec[i].parse::<f64>().map_err(|_| Error::Data(format!("field {} is not a number: '{}'", i + 1, &rec[i])))
    };
    let (a, b) = (num(0)?, num(1)?);
    match schema {
        CsvSchema::DtfDtb => CounterRecord::from_times(row, a, b),
        CsvSchema::VCl => CounterRecord::from_velocity(row, a, b),
    }
}

/// Writes rejects as `row,reason,raw`.
pub fn write_rejects_csv(path: impl AsRef<Path>, rejects: &[Reject]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "reason", "raw"])?;
    for r in rejects {
        w.write_record([r.row.to_string(), r.reason.clone(), r.raw.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Why a record was screened out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RemovalReason {
    NegativeVelocity,
    NegativeLength,
    ShortClump,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalReason::NegativeVelocity => "negative velocity",
            RemovalReason::NegativeLength => "negative length",
            RemovalReason::ShortClump => "short clump",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RemovalReport {
    pub n_raw: usize,
    /// `(row, reason)` for each removed record.
    pub removed: Vec<(usize, RemovalReason)>,
}

impl RemovalReport {
    pub fn n_removed(&self) -> usize {
        self.removed.len()
    }

    pub fn count(&self, reason: RemovalReason) -> usize {
        self.removed.iter().filter(|(_, r)| *r == reason).count()
    }

    pub fn removed_fraction(&self) -> f64 {
        if self.n_raw == 0 {
            0.0
        } else {
            self.n_removed() as f64 / self.n_raw as f64
        }
    }
}

/// Default screen for very short clumps, as a fraction of the particle diameter.
pub const DEFAULT_MIN_FRAC: f64 = 0.5;

/// Drops records with `v <= 0`, `cl <= 0`, or `cl < min_frac * d0` (meters).
pub fn clean_records(records: &[CounterRecord], d0: f64, min_frac: f64) -> Result<(Vec<CounterRecord>, RemovalReport)> {
    ensure_positive("d0", d0)?;
    if !(0.0..1.0).contains(&min_frac) {
        return Err(Error::InvalidArgument(format!("min_frac must be in [0, 1), got {min_frac}")));
    }
    let mut kept = Vec::with_capacity(records.len());
    let mut report = RemovalReport { n_raw: records.len(), removed: Vec::new() };
    for r in records {
        let reason = if r.v <= 0.0 {
            Some(RemovalReason::NegativeVelocity)
        } else if r.cl <= 0.0 {
            Some(RemovalReason::NegativeLength)
        } else if r.cl < min_frac * d0 {
            Some(RemovalReason::ShortClump)
        } else {
            None
        };
        match reason {
            Some(reason) => report.removed.push((r.row, reason)),
            None => kept.push(*r),
        }
    }
    Ok((kept, report))
}

/// Lengths in mm to passage times in msec, given mean velocity in mm/msec (= m/s).
pub fn to_time_domain(lengths_mm: &[f64], vbar: f64) -> Result<Vec<f64>> {
    ensure_positive("vbar", vbar)?;
    Ok(lengths_mm.iter().map(|l| l / vbar).collect())
}

/// Inverse of [`to_time_domain`].
pub fn to_physical_domain(times_msec: &[f64], vbar: f64) -> Result<Vec<f64>> {
    ensure_positive("vbar", vbar)?;
    Ok(times_msec.iter().map(|t| t * vbar).collect())
}

/// Rate per mm to rate per msec.
pub fn rate_to_time_domain(lambda_per_mm: f64, vbar: f64) -> Result<f64> {
    ensure_positive("vbar", vbar)?;
    Ok(lambda_per_mm * vbar)
}

/// Rate per msec to rate per mm.
pub fn rate_to_physical_domain(lambda_per_msec: f64, vbar: f64) -> Result<f64> {
    ensure_positive("vbar", vbar)?;
    Ok(lambda_per_msec / vbar)
}

/// Builds a sample; lengths up to `mu (1 + singleton_tol)` count as singletons.
pub fn build_sample(lengths: &[f64], mu: f64, singleton_tol: f64) -> Result<ClumpSample> {
    if !(singleton_tol >= 0.0 && singleton_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("singleton tolerance must be nonnegative, got {singleton_tol}")));
    }
    ClumpSample::from_lengths(lengths.to_vec(), mu, SingletonRule::AtMost { eps: singleton_tol })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Lengths in mm, rates per mm.
    Physical,
    /// Passage times in msec, rates per msec.
    Time,
}

/// Per-run description of a cleaned data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub n_raw: usize,
    pub n_removed: usize,
    pub n: usize,
    pub ybar: f64,
    pub s2y: f64,
    /// Mean velocity in m/s (= mm/msec).
    pub vbar: f64,
    pub domain: Domain,
    pub warnings: Vec<String>,
}

/// Mean velocity of records, in m/s.
pub fn mean_velocity(records: &[CounterRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Data("no records".into()));
    }
    Ok(welford(&records.iter().map(|r| r.v).collect::<Vec<_>>()).0)
}

/// Clump lengths of `records` in the requested domain (mm or msec).
pub fn record_lengths(records: &[CounterRecord], domain: Domain) -> Result<Vec<f64>> {
    let mm: Vec<f64> = records.iter().map(|r| r.cl_mm()).collect();
    match domain {
        Domain::Physical => Ok(mm),
        Domain::Time => to_time_domain(&mm, mean_velocity(records)?),
    }
}

/// Summarizes cleaned records. A removal fraction above 1% is a warning.
pub fn summarize_run(
    run_id: &str,
    kept: &[CounterRecord],
    report: &RemovalReport,
    domain: Domain,
) -> Result<RunSummary> {
    let lengths = record_lengths(kept, domain)?;
    let (ybar, s2y) = welford(&lengths);
    let mut warnings = Vec::new();
    if report.removed_fraction() > 0.01 {
        warnings.push(format!("{:.2}% of records removed (more than 1%)", 100.0 * report.removed_fraction()));
    }
    Ok(RunSummary {
        run_id: run_id.to_string(),
        n_raw: report.n_raw,
        n_removed: report.n_removed(),
        n: kept.len(),
        ybar,
        s2y,
        vbar: mean_velocity(kept)?,
        domain,
        warnings,
    })
}
