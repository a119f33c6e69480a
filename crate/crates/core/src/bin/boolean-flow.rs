#![allow(clippy::neg_cmp_op_on_partial_ord)]

use boolean_flow::harness::{
    analyze_file, gof, select_cells, table1, table2, write_table_csv, AnalyzeOptions, SCHEMA_VERSION,
};
use boolean_flow::ingest::{CsvSchema, Domain, DEFAULT_MIN_FRAC};
use boolean_flow::model::{ModelParams, SegmentLaw};
use boolean_flow::simulate::DesignCell;
use boolean_flow::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "boolean-flow",
    version,
    about = "Particle-flow simulation and estimation for a type-II optical counter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicated runs and write one clump CSV per replicate plus a summary.
    Simulate(SimulateArgs),
    /// Bias, efficiency and interval coverage of the rate estimators.
    Table1(TableArgs),
    /// Bias and RRMSE of the total-flow estimators.
    Table2(TableArgs),
    /// Estimate rate and total flow from a counter CSV.
    Analyze(AnalyzeArgs),
    /// Normality and model-fit diagnostics over replicates.
    Gof(GofArgs),
}

#[derive(Args, Serialize)]
struct CellArgs {
    /// Flow intensity (particles per unit time).
    #[arg(long)]
    lambda: f64,
    /// Observation horizon.
    #[arg(long)]
    t: f64,
    /// Mean segment length.
    #[arg(long, default_value_t = 5.0)]
    mu: f64,
    /// Standard deviation of segment lengths (0 = deterministic).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl CellArgs {
    fn cell(&self) -> Result<DesignCell> {
        ModelParams::new(self.lambda, SegmentLaw::normal(self.mu, self.sigma)?, Some(self.t))?;
        if self.reps == 0 {
            return Err(Error::InvalidArgument("--reps must be at least 1".into()));
        }
        let index = select_cells(Some(&format!("{}:{}:{}", self.sigma, self.t, self.lambda)), self.mu)?[0].index;
        Ok(DesignCell { index, sigma: self.sigma, horizon: self.t, lambda: self.lambda, mu: self.mu })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TableArgs {
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated `sigma:t:lambda` cells (default: the full 3x2x3 design).
    #[arg(long)]
    cells: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    mu: f64,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum SchemaArg {
    DtfDtb,
    VCl,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum DomainArg {
    Physical,
    Time,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column layout; detected from the header when omitted.
    #[arg(long, value_enum)]
    schema: Option<SchemaArg>,
    /// Particle diameter in mm.
    #[arg(long, default_value_t = 4.45)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = DomainArg::Physical)]
    domain: DomainArg,
    /// Drop clumps shorter than this fraction of the particle diameter.
    #[arg(long, default_value_t = DEFAULT_MIN_FRAC)]
    min_frac: f64,
    /// JSON output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GofArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// JSON output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 2,
        Error::Simulation { source, .. } => exit_code(source),
        e if e.is_numerical() => 4,
        _ => 3,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BF_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("BF_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::InvalidArgument("BF_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn write_csv_rows<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<()> {
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            write_table_csv(f, rows)
        }
        None => write_table_csv(std::io::stdout().lock(), rows),
    }
}

#[derive(Serialize)]
struct ClumpRow {
    schema_version: u32,
    start: f64,
    length: f64,
    order: u64,
}

#[derive(Serialize)]
struct ReplicateSummary {
    replicate: usize,
    a_t: u64,
    n: usize,
    residual_open: bool,
    residual_order: u64,
    file: String,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema_version: u32,
    config: &'a CellArgs,
    mean_n: f64,
    mean_a_t: f64,
    replicates: Vec<ReplicateSummary>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cell = args.cell.cell()?;
    fs::create_dir_all(&args.out).map_err(|e| Error::Io(format!("{}: {e}", args.out.display())))?;
    let results = boolean_flow::simulate::map_cells(&[cell], args.cell.reps, args.cell.seed, |_, r, run| {
        let name = format!("clumps_{r:04}.csv");
        let path = args.out.join(&name);
        let mut w = csv::Writer::from_path(&path)?;
        for c in &run.clumps {
            w.serialize(ClumpRow { schema_version: SCHEMA_VERSION, start: c.start, length: c.length, order: c.order })?;
        }
        if run.clumps.is_empty() {
            w.write_record(["schema_version", "start", "length", "order"])?;
        }
        w.flush()?;
        Ok(ReplicateSummary {
            replicate: r,
            a_t: run.a_t,
            n: run.clumps.len(),
            residual_open: run.residual_open,
            residual_order: run.residual.map_or(0, |c| c.order),
            file: name,
        })
    })?;
    let reps = results.into_iter().next().map(|(_, r)| r).unwrap_or_default();
    let k = reps.len() as f64;
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        config: &args.cell,
        mean_n: reps.iter().map(|r| r.n as f64).sum::<f64>() / k,
        mean_a_t: reps.iter().map(|r| r.a_t as f64).sum::<f64>() / k,
        replicates: reps,
    };
    write_json(Some(&args.out.join("summary.json")), &summary)
}

#[derive(Serialize)]
struct TableReport<'a, T> {
    schema_version: u32,
    command: &'a str,
    config: &'a TableArgs,
    rows: &'a [T],
}

fn check_table_args(args: &TableArgs) -> Result<Vec<DesignCell>> {
    if args.reps == 0 {
        return Err(Error::InvalidArgument("--reps must be at least 1".into()));
    }
    if !(args.mu > 0.0) {
        return Err(Error::InvalidArgument("--mu must be positive".into()));
    }
    select_cells(args.cells.as_deref(), args.mu)
}

fn cmd_table<T: Serialize>(
    name: &str,
    args: &TableArgs,
    run: fn(&[DesignCell], usize, u64) -> Result<Vec<T>>,
) -> Result<()> {
    let cells = check_table_args(args)?;
    let rows = run(&cells, args.reps, args.seed)?;
    write_csv_rows(args.out.as_deref(), &rows)?;
    if let Some(p) = &args.json {
        write_json(Some(p), &TableReport { schema_version: SCHEMA_VERSION, command: name, config: args, rows: &rows })?;
    }
    Ok(())
}

fn detect_schema(path: &Path) -> Result<CsvSchema> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let first = text.lines().next().ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = first.split(',').map(str::trim).collect();
    CsvSchema::detect(&cols).ok_or_else(|| Error::Data(format!("{}: unrecognized header '{first}'", path.display())))
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let schema = match args.schema {
        Some(SchemaArg::DtfDtb) => CsvSchema::DtfDtb,
        Some(SchemaArg::VCl) => CsvSchema::VCl,
        None => detect_schema(&args.input)?,
    };
    if !(args.mu > 0.0) {
        return Err(Error::InvalidArgument("--mu must be positive".into()));
    }
    let opts = AnalyzeOptions {
        schema,
        mu_mm: args.mu,
        domain: match args.domain {
            DomainArg::Physical => Domain::Physical,
            DomainArg::Time => Domain::Time,
        },
        min_frac: args.min_frac,
        ..Default::default()
    };
    let report = analyze_file(&args.input, &opts)?;
    write_json(args.out.as_deref(), &report)
}

fn cmd_gof(args: &GofArgs) -> Result<()> {
    let cell = args.cell.cell()?;
    let report = gof(&cell, args.cell.reps, args.cell.seed)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_json(args.out.as_deref(), &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Table1(a) => cmd_table("table1", a, table1),
        Command::Table2(a) => cmd_table("table2", a, table2),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Gof(a) => cmd_gof(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
