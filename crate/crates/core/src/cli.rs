//! The `chasm` command line: detection on CSV streams, data set simulation,
//! grid benchmarks and bias experiments.
//!
//! Exit codes: 0 on success, 2 for usage or input errors, 3 for numerical
//! failures.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{run_bias, BiasExperiment};
use crate::error::ChasmError;
use crate::metrics::{
    arl_delay, arl_in_control, classify_single, prf_from_counts, EvalConfig, OutcomeCounts,
};
use crate::pipeline::{DetectionRecord, Detector, DetectorConfig};
use crate::synthetic::NoiseKind;
use crate::synthetic::{make_replication, matrix_rows, Bin, Dataset, Variant};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// File name of the manifest written into every output directory.
pub const MANIFEST: &str = "manifest.json";
/// Marker for metrics that do not apply to a data set.
pub const NA: &str = "NA";

#[derive(Debug, Parser)]
#[command(name = "chasm", version, about = "Spectral changepoint detection for multivariate streams")]
pub struct Cli {
    /// Worker threads for parallel work (defaults to all cores).
    #[arg(long, global = true, env = "CHASM_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the detector over a CSV stream and write one JSON record per row.
    Detect(DetectArgs),
    /// Generate a synthetic benchmark data set.
    Simulate(SimulateArgs),
    /// Score a parameter grid on a simulated data set.
    Benchmark(BenchmarkArgs),
    /// Monte Carlo bias of the operator estimator.
    Bias(BiasArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// CSV with one observation per row; a header row is optional.
    #[arg(long)]
    pub input: PathBuf,
    /// JSONL output; a `<output>.manifest.json` is written next to it.
    #[arg(long)]
    pub output: PathBuf,
    /// JSON detector configuration; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// gaussian, laplace, student_t, huber, sparse or full_rank.
    #[arg(long)]
    pub dataset: String,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// arl1 (with a change, T = 400) or arl0 (without, T = 10 000).
    #[arg(long, default_value = "arl1")]
    pub variant: String,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON array of detector configurations; the synthetic grid when absent.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Left detection margin.
    #[arg(long, default_value_t = 0)]
    pub margin_left: usize,
    /// Right detection margin.
    #[arg(long, default_value_t = 50)]
    pub margin_right: usize,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    /// JSON experiment description; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured replication count.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("{0}")]
    Chasm(#[from] ChasmError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Chasm(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl RunManifest {
    fn new(subcommand: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            details: serde_json::Value::Null,
        }
    }

    fn write(mut self, path: &Path, started: Instant) -> CliResult<()> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(io_err(format!("writing {}", path.display())))
    }
}

/// Replication entry of a simulated data set's manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEntry {
    pub index: usize,
    pub file: String,
    pub tau: Option<usize>,
    pub bin: Option<Bin>,
    pub theta0: Vec<Vec<f64>>,
    pub theta1: Vec<Vec<f64>>,
    pub noise: NoiseKind,
    pub noise_covariance: Vec<Vec<f64>>,
}

/// `details` section of a `simulate` manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDetails {
    pub dataset: Dataset,
    pub variant: Variant,
    pub length: usize,
    pub dim_per_replication: Vec<usize>,
    pub replications: Vec<ReplicationEntry>,
}

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parse process arguments, run, and map failures to exit codes.
pub fn main_exit() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    ExitCode::from(run(cli))
}

/// Run a parsed command line; returns the exit code.
pub fn run(cli: Cli) -> u8 {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_INPUT;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let result = match cli.command {
        Command::Detect(a) => cmd_detect(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Bias(a) => cmd_bias(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(io_err(format!("creating {}", path.display())))
}

/// Streaming reader of numeric CSV rows. The first row is treated as a
/// header when any of its fields is not a number.
pub struct CsvStream<R> {
    reader: csv::Reader<R>,
    record: csv::StringRecord,
    width: Option<usize>,
    pending: Option<(u64, Vec<f64>)>,
}

impl<R: io::Read> CsvStream<R> {
    pub fn new(inner: R) -> CliResult<Self> {
        let reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(inner);
        let mut s = Self { reader, record: csv::StringRecord::new(), width: None, pending: None };
        if let Some((line, fields)) = s.raw_row()? {
            let parsed: Option<Vec<f64>> =
                fields.iter().map(|f| f.parse::<f64>().ok()).collect();
            if let Some(row) = parsed {
                s.pending = Some((line, s.check(line, row)?));
            } else {
                s.width = Some(fields.len());
            }
        }
        Ok(s)
    }

    fn raw_row(&mut self) -> CliResult<Option<(u64, Vec<String>)>> {
        let more = self
            .reader
            .read_record(&mut self.record)
            .map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        if !more {
            return Ok(None);
        }
        let line = self.record.position().map_or(0, |p| p.line());
        Ok(Some((line, self.record.iter().map(str::to_string).collect())))
    }

    fn check(&mut self, line: u64, row: Vec<f64>) -> CliResult<Vec<f64>> {
        match self.width {
            Some(w) if w != row.len() => {
                return Err(CliError::Input(format!(
                    "line {line}: expected {w} columns, found {}",
                    row.len()
                )))
            }
            None => self.width = Some(row.len()),
            _ => {}
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Input(format!("line {line}: non-finite value")));
        }
        Ok(row)
    }

    /// Next observation, or `None` at end of input.
    pub fn next_row(&mut self) -> CliResult<Option<Vec<f64>>> {
        if let Some((_, row)) = self.pending.take() {
            return Ok(Some(row));
        }
        let Some((line, fields)) = self.raw_row()? else {
            return Ok(None);
        };
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| CliError::Input(format!("line {line}: `{f}` is not a number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        self.check(line, row).map(Some)
    }

    /// Columns per row, once known.
    pub fn width(&self) -> Option<usize> {
        self.width
    }
}

/// Read a whole CSV stream into memory.
pub fn read_stream(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(io_err(format!("opening {}", path.display())))?;
    let mut s = CsvStream::new(BufReader::new(file))?;
    let mut rows = Vec::new();
    while let Some(r) = s.next_row()? {
        rows.push(r);
    }
    Ok(rows)
}

/// Write rows as CSV with a `x0,x1,…` header.
pub fn write_stream(path: &Path, rows: &[Vec<f64>]) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    let mut w = BufWriter::new(file);
    let mut text = String::new();
    let d = rows.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    text.push_str(&header.join(","));
    text.push('\n');
    for r in rows {
        let fields: Vec<String> = r.iter().map(|&v| fmt_f64(v)).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).map_err(io_err(format!("writing {}", path.display())))?;
    w.flush().map_err(io_err(format!("writing {}", path.display())))
}

fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn cmd_detect(args: &DetectArgs) -> CliResult<()> {
    let started = Instant::now();
    let config: DetectorConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => DetectorConfig::default(),
    };
    let file = File::open(&args.input).map_err(io_err(format!("opening {}", args.input.display())))?;
    let mut stream = CsvStream::new(BufReader::new(file))?;
    let first = stream.next_row()?.ok_or_else(|| {
        CliError::Input(format!("{}: no observations", args.input.display()))
    })?;
    let mut detector = Detector::new(first.len(), config.clone())?;

    let out = File::create(&args.output).map_err(io_err(format!("creating {}", args.output.display())))?;
    let mut out = BufWriter::new(out);
    let write_err = io_err(format!("writing {}", args.output.display()));
    let write_record = |out: &mut BufWriter<File>, rec: &DetectionRecord| -> io::Result<()> {
        serde_json::to_writer(&mut *out, rec)?;
        out.write_all(b"\n")
    };

    let mut alarms = Vec::new();
    let mut rows = 0u64;
    let mut row = Some(first);
    let mut failure = None;
    while let Some(x) = row {
        rows += 1;
        match detector.step(&x) {
            Ok(rec) => {
                if rec.alarm {
                    alarms.push(rec.t);
                }
                write_record(&mut out, &rec).map_err(|e| CliError::Io {
                    context: format!("writing {}", args.output.display()),
                    source: e,
                })?;
            }
            Err(e) => {
                failure = Some(CliError::Chasm(e));
                break;
            }
        }
        row = match stream.next_row() {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
    }
    out.flush().map_err(write_err)?;

    let mut manifest =
        RunManifest::new("detect", None, serde_json::to_value(&config).expect("config serializes"));
    manifest.inputs.push(args.input.display().to_string());
    manifest.outputs.push(args.output.display().to_string());
    manifest.details = serde_json::json!({
        "dim": detector.dim(),
        "rows": rows,
        "alarms": alarms,
        "completed": failure.is_none(),
    });
    manifest.write(&manifest_path_for(&args.output), started)?;
    info!("detect: {rows} rows, {} alarms", alarms.len());
    failure.map_or(Ok(()), Err)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let started = Instant::now();
    let dataset: Dataset = args.dataset.parse()?;
    let variant: Variant = args.variant.parse()?;
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    create_dir(&args.output)?;
    let width = args.reps.saturating_sub(1).to_string().len().max(4);
    let entries: Vec<ReplicationEntry> = (0..args.reps)
        .into_par_iter()
        .map(|i| -> CliResult<ReplicationEntry> {
            let rep = make_replication(dataset, i, args.reps, variant, args.seed)?;
            let file = format!("rep_{i:0width$}.csv");
            write_stream(&args.output.join(&file), &rep.stream)?;
            Ok(ReplicationEntry {
                index: i,
                file,
                tau: rep.model.tau(),
                bin: rep.bin,
                theta0: matrix_rows(rep.model.theta0()),
                theta1: matrix_rows(rep.model.theta1()),
                noise: rep.model.noise().kind(),
                noise_covariance: matrix_rows(rep.model.noise().covariance()),
            })
        })
        .collect::<CliResult<_>>()?;

    let mut manifest = RunManifest::new(
        "simulate",
        Some(args.seed),
        serde_json::json!({
            "dataset": dataset,
            "variant": variant,
            "reps": args.reps,
        }),
    );
    manifest.outputs = entries.iter().map(|e| e.file.clone()).collect();
    manifest.details = serde_json::to_value(DatasetDetails {
        dataset,
        variant,
        length: variant.length(),
        dim_per_replication: entries.iter().map(|e| e.theta0.len()).collect(),
        replications: entries,
    })
    .expect("details serialize");
    manifest.write(&args.output.join(MANIFEST), started)
}

/// One row of the benchmark metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config_index: usize,
    pub config: DetectorConfig,
    pub replications: usize,
    pub counts: Option<OutcomeCounts>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Mean delay over true positives.
    pub arl1: Option<f64>,
    pub arl0: Option<f64>,
    pub arl0_censored_fraction: Option<f64>,
    pub errors: usize,
}

impl MetricsRow {
    pub const HEADER: &'static str = "config_index,rho,rank,alpha,threshold,grace,burn_in,lag,\
replications,tp,fp,fn_late,fn_none,precision,recall,f1,arl1,arl0,arl0_censored_fraction,errors";

    pub fn csv_line(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| NA.to_string(), fmt_f64);
        let n = |v: Option<usize>| v.map_or_else(|| NA.to_string(), |x| x.to_string());
        let c = self.config.clone();
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_index,
            fmt_f64(c.rho),
            c.rank,
            fmt_f64(c.alpha),
            fmt_f64(c.threshold),
            c.grace,
            c.burn_in,
            c.lag,
            self.replications,
            n(self.counts.map(|k| k.tp)),
            n(self.counts.map(|k| k.fp)),
            n(self.counts.map(|k| k.fn_late)),
            n(self.counts.map(|k| k.fn_none)),
            f(self.precision),
            f(self.recall),
            f(self.f1),
            f(self.arl1),
            f(self.arl0),
            f(self.arl0_censored_fraction),
            self.errors,
        )
        .expect("write to string");
        s
    }
}

/// Score every configuration on every stream. `taus[i]` is the change time
/// of stream `i`, or `None` on change-free data.
pub fn evaluate_grid(
    grid: &[DetectorConfig],
    streams: &[Vec<Vec<f64>>],
    taus: &[Option<usize>],
    eval: &EvalConfig,
) -> Result<Vec<MetricsRow>, ChasmError> {
    if streams.len() != taus.len() {
        return Err(ChasmError::DimensionMismatch { expected: streams.len(), got: taus.len() });
    }
    let with_change = taus.iter().all(Option::is_some);
    if !with_change && taus.iter().any(Option::is_some) {
        return Err(ChasmError::invalid("taus", "mixed change and change-free streams"));
    }
    for c in grid {
        for s in streams {
            c.validate(s.first().map_or(1, Vec::len))?;
        }
    }
    let pairs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..streams.len()).map(move |r| (c, r)))
        .collect();
    let alarms: Vec<Result<Option<usize>, ChasmError>> = pairs
        .par_iter()
        .map(|&(c, r)| {
            let s = &streams[r];
            let dim = s.first().map_or(1, Vec::len);
            let mut det = Detector::new(dim, grid[c].clone())?;
            Ok(det.first_alarm(s)?.map(|t| t as usize))
        })
        .collect();

    let n = streams.len();
    let mut rows = Vec::with_capacity(grid.len());
    for (c, config) in grid.iter().enumerate() {
        let results = &alarms[c * n..(c + 1) * n];
        let errors = results.iter().filter(|r| r.is_err()).count();
        let hats: Vec<Option<usize>> = results.iter().map(|r| r.clone().unwrap_or(None)).collect();
        let mut row = MetricsRow {
            config_index: c,
            config: config.clone(),
            replications: n,
            counts: None,
            precision: None,
            recall: None,
            f1: None,
            arl1: None,
            arl0: None,
            arl0_censored_fraction: None,
            errors,
        };
        if with_change {
            let runs: Vec<(usize, Option<usize>)> =
                taus.iter().zip(&hats).map(|(t, h)| (t.expect("checked"), *h)).collect();
            let outcomes: Vec<_> = runs.iter().map(|&(t, h)| classify_single(t, h, eval)).collect();
            let counts = OutcomeCounts::tally(&outcomes);
            let prf = prf_from_counts(&counts);
            row.counts = Some(counts);
            row.precision = Some(prf.precision);
            row.recall = Some(prf.recall);
            row.f1 = Some(prf.f1);
            row.arl1 = arl_delay(&runs, eval);
        } else if n > 0 {
            let censor = eval
                .censor_at
                .unwrap_or_else(|| streams.iter().map(Vec::len).max().unwrap_or(0));
            let arl = arl_in_control(&hats, censor)?;
            row.arl0 = Some(arl.value);
            row.arl0_censored_fraction = Some(arl.censored_fraction());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Highest F1; ties keep the earliest configuration.
pub fn best_by_f1(rows: &[MetricsRow]) -> Option<&MetricsRow> {
    rows.iter().filter(|r| r.f1.is_some()).fold(None, |best: Option<&MetricsRow>, r| match best {
        Some(b) if b.f1 >= r.f1 => Some(b),
        _ => Some(r),
    })
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let started = Instant::now();
    let manifest_path = args.input.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(CliError::Input(format!(
            "{} not found; expected a directory written by `simulate`",
            manifest_path.display()
        )));
    }
    let source: RunManifest = read_json(&manifest_path)?;
    let details: DatasetDetails = serde_json::from_value(source.details.clone())
        .map_err(|e| CliError::Input(format!("{}: {e}", manifest_path.display())))?;
    let grid: Vec<DetectorConfig> = match &args.grid {
        Some(p) => read_json(p)?,
        None => DetectorConfig::synthetic_grid(),
    };
    if grid.is_empty() {
        return Err(CliError::Input("parameter grid is empty".into()));
    }

    let streams: Vec<Vec<Vec<f64>>> = details
        .replications
        .par_iter()
        .map(|e| read_stream(&args.input.join(&e.file)))
        .collect::<CliResult<_>>()?;
    if let Some((e, _)) = details.replications.iter().zip(&streams).find(|(_, s)| s.is_empty()) {
        return Err(CliError::Input(format!("{}: no observations", e.file)));
    }
    let taus: Vec<Option<usize>> = details.replications.iter().map(|e| e.tau).collect();
    let eval = EvalConfig {
        margin_left: args.margin_left,
        margin_right: args.margin_right,
        censor_at: Some(details.length),
    };
    let rows = evaluate_grid(&grid, &streams, &taus, &eval)?;

    create_dir(&args.output)?;
    let mut text = String::from(MetricsRow::HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.csv_line());
        text.push('\n');
    }
    let metrics = args.output.join("metrics.csv");
    fs::write(&metrics, text).map_err(io_err(format!("writing {}", metrics.display())))?;

    let best = best_by_f1(&rows);
    let best_path = args.output.join("best.json");
    let best_json = serde_json::json!({
        "dataset": details.dataset,
        "variant": details.variant,
        "best": best,
        "criterion": "highest F1 across the grid; ties keep the earliest configuration",
    });
    fs::write(&best_path, serde_json::to_string_pretty(&best_json).expect("serializes") + "\n")
        .map_err(io_err(format!("writing {}", best_path.display())))?;

    let mut manifest = RunManifest::new(
        "benchmark",
        source.seed,
        serde_json::json!({ "grid": grid, "evaluation": eval }),
    );
    manifest.inputs.push(args.input.display().to_string());
    if let Some(g) = &args.grid {
        manifest.inputs.push(g.display().to_string());
    }
    manifest.outputs = vec!["metrics.csv".into(), "best.json".into()];
    manifest.details = serde_json::json!({
        "arl1_policy": "mean delay over true positives only",
        "arl0_policy": "runs without an alarm counted at the sequence length",
    });
    manifest.write(&args.output.join(MANIFEST), started)
}

pub fn cmd_bias(args: &BiasArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut exp: BiasExperiment = match &args.config {
        Some(p) => read_json(p)?,
        None => BiasExperiment::default(),
    };
    if let Some(seed) = args.seed {
        exp.seed = seed;
    }
    if let Some(reps) = args.reps {
        exp.n_mc = reps;
    }
    exp.validate()?;
    let table = run_bias(&exp)?;

    create_dir(&args.output)?;
    let mut text = String::from("rho,n,bias_norm,stderr\n");
    for p in &table {
        text.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.rho),
            p.n,
            fmt_f64(p.bias_norm),
            fmt_f64(p.stderr)
        ));
    }
    let csv_path = args.output.join("bias.csv");
    fs::write(&csv_path, text).map_err(io_err(format!("writing {}", csv_path.display())))?;

    let mut manifest = RunManifest::new(
        "bias",
        Some(exp.seed),
        serde_json::to_value(&exp).expect("experiment serializes"),
    );
    if let Some(c) = &args.config {
        manifest.inputs.push(c.display().to_string());
    }
    manifest.outputs.push("bias.csv".into());
    manifest.write(&args.output.join(MANIFEST), started)
}

/// Line count of a text file, for tests and diagnostics.
pub fn count_lines(path: &Path) -> io::Result<usize> {
    Ok(BufReader::new(File::open(path)?).lines().count())
}
