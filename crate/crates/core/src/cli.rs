//! Command-line front end: `test`, `calibrate`, `simulate` and `bench`.
//!
//! Exit codes: 0 when a test completes without rejecting (and for every
//! successful non-test command), 1 when a test rejects, 2 on usage or data
//! errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calib::{self, CalibrationTable, LookupPolicy};
use crate::decide::{self, TestReport};
use crate::nulls::NullModel;
use crate::sim::{self, Direction, Scenario, ScenarioSpec};
use crate::stream::{CaksState, InvalidPolicy};

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

const INGEST_BATCH: usize = 8192;

#[derive(Debug, Parser)]
#[command(name = "caks", version, about = "Streaming chunked-and-averaged Kolmogorov-Smirnov goodness-of-fit test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream observations through the CAKS test.
    Test(TestArgs),
    /// Monte Carlo calibration of the null chunk moments for one chunk size.
    Calibrate(CalibrateArgs),
    /// Run one S1-S3 scenario cell and emit a result row.
    Simulate(SimulateArgs),
    /// Time CAKS against the batch KS test on generated data.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// Newline-delimited decimal reals.
    Text,
    /// Consecutive little-endian IEEE-754 doubles.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy)]
struct AutoCalibrate {
    replicates: u64,
    seed: u64,
}

fn parse_auto_calibrate(s: &str) -> Result<AutoCalibrate, String> {
    let (r, seed) = s.split_once(',').ok_or("expected R,SEED")?;
    let replicates = r.trim().parse().map_err(|_| format!("bad replicate count `{r}`"))?;
    let seed = seed.trim().parse().map_err(|_| format!("bad seed `{seed}`"))?;
    Ok(AutoCalibrate { replicates, seed })
}

#[derive(Debug, Args)]
struct CalibrationSource {
    /// Calibration CSV (`J,mu_J,sigma2_J,replicates,seed`).
    #[arg(long, value_name = "FILE", conflicts_with = "auto_calibrate")]
    calibration: Option<PathBuf>,
    /// Calibrate on demand when J is not tabulated.
    #[arg(long, value_name = "R,SEED", value_parser = parse_auto_calibrate)]
    auto_calibrate: Option<AutoCalibrate>,
}

impl CalibrationSource {
    fn table_and_policy(&self) -> Result<(CalibrationTable, LookupPolicy), String> {
        if let Some(path) = &self.calibration {
            let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let rows = calib::read_csv(file).map_err(|e| format!("{}: {e}", path.display()))?;
            return Ok((CalibrationTable::new(rows), LookupPolicy::ExactOnly));
        }
        let policy = match self.auto_calibrate {
            Some(a) => LookupPolicy::CalibrateOnMiss { replicates: a.replicates, seed: a.seed },
            None => LookupPolicy::ExactOnly,
        };
        Ok((CalibrationTable::builtin(), policy))
    }

    fn resolve(&self, j: usize) -> Result<(CalibrationTable, LookupPolicy), String> {
        let (mut table, policy) = self.table_and_policy()?;
        table.lookup(j, policy).map_err(|e| {
            if self.calibration.is_none() && self.auto_calibrate.is_none() {
                format!("{e}; pass --calibration FILE or --auto-calibrate R,SEED")
            } else {
                e.to_string()
            }
        })?;
        Ok((table, policy))
    }
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Null model: `uniform`, `normal:<mean>,<sd>` or `t:<df>`.
    #[arg(long)]
    null: NullModel,
    #[arg(long, short = 'J', value_name = "J")]
    chunk_size: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[command(flatten)]
    calibration: CalibrationSource,
    #[arg(long, value_enum, default_value_t = InputFormat::Text)]
    format: InputFormat,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,
    /// Drop empty, unparseable and non-finite values instead of failing.
    #[arg(long)]
    skip_invalid: bool,
    /// Input file; standard input when absent or `-`.
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, short = 'J', value_name = "J")]
    chunk_size: usize,
    #[arg(long)]
    replicates: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: Scenario,
    /// mu for s1, sigma for s2, df for s3.
    #[arg(long, allow_negative_numbers = true)]
    effect: f64,
    #[arg(long = "T", value_name = "T")]
    t: u64,
    #[arg(long = "J", value_name = "J")]
    j: usize,
    #[arg(long)]
    reps: u64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long)]
    seed: u64,
    /// s3 only: `forward` tests normal data against t, `reversed` t data against normal.
    #[arg(long, default_value = "forward")]
    direction: Direction,
    #[command(flatten)]
    calibration: CalibrationSource,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    output: OutputFormat,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, short = 'J', value_name = "J")]
    chunk_size: usize,
    #[arg(long)]
    null: NullModel,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    output: OutputFormat,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPT };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Test(a) => cmd_test(&a, stdin, out),
        Command::Calibrate(a) => cmd_calibrate(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

type CmdResult = Result<i32, String>;

fn io_err(e: std::io::Error) -> String {
    e.to_string()
}

fn cmd_test(args: &TestArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> CmdResult {
    let (mut table, policy) = args.calibration.resolve(args.chunk_size)?;
    let cal = table.lookup(args.chunk_size, policy).map_err(|e| e.to_string())?;

    let policy = if args.skip_invalid { InvalidPolicy::Skip } else { InvalidPolicy::Strict };
    let mut state = CaksState::new(args.chunk_size, args.null)
        .map_err(|e| e.to_string())?
        .with_policy(policy);

    let mut file;
    let input: &mut dyn Read = match &args.input {
        Some(p) if p.as_os_str() != "-" => {
            file = File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
            &mut file
        }
        _ => stdin,
    };
    let skipped_lines = match args.format {
        InputFormat::Text => ingest_text(input, &mut state, args.skip_invalid)?,
        InputFormat::Binary => {
            ingest_binary(input, &mut state)?;
            0
        }
    };

    let mut report = state.report(&cal, args.alpha).map_err(|e| e.to_string())?;
    if skipped_lines > 0 {
        report.warnings.push(format!("{skipped_lines} empty or unparseable lines skipped"));
    }
    write_report(out, &report, args.output).map_err(io_err)?;
    Ok(if report.reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

fn write_report(out: &mut dyn Write, report: &TestReport, format: OutputFormat) -> std::io::Result<()> {
    match format {
        OutputFormat::Text => writeln!(out, "{report}"),
        OutputFormat::Json => writeln!(out, "{}", report.to_json()),
        OutputFormat::Csv => {
            writeln!(out, "{}", decide::CSV_HEADER)?;
            writeln!(out, "{}", report.to_csv_record())
        }
    }
}

/// Returns the number of skipped (empty or unparseable) lines.
fn ingest_text(input: &mut dyn Read, state: &mut CaksState, skip_invalid: bool) -> Result<u64, String> {
    let reader = BufReader::with_capacity(1 << 16, input);
    let mut batch = Vec::with_capacity(INGEST_BATCH);
    let mut skipped = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| format!("line {lineno}: {e}"))?;
        let field = line.trim();
        let parsed = if field.is_empty() {
            Err(format!("line {lineno}: empty line"))
        } else {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() || skip_invalid => Ok(v),
                Ok(v) => Err(format!("line {lineno}: non-finite observation {v}")),
                Err(_) => Err(format!("line {lineno}: cannot parse `{field}` as a number")),
            }
        };
        match parsed {
            Ok(v) => batch.push(v),
            Err(_) if skip_invalid => skipped += 1,
            Err(msg) => return Err(msg),
        }
        if batch.len() == INGEST_BATCH {
            state.push(&batch).map_err(|e| e.to_string())?;
            batch.clear();
        }
    }
    state.push(&batch).map_err(|e| e.to_string())?;
    Ok(skipped)
}

fn ingest_binary(input: &mut dyn Read, state: &mut CaksState) -> Result<(), String> {
    let mut bytes = vec![0u8; INGEST_BATCH * 8];
    let mut filled = 0;
    let mut values = Vec::with_capacity(INGEST_BATCH);
    let mut offset = 0usize;
    loop {
        let n = match input.read(&mut bytes[filled..]) {
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.to_string()),
        };
        filled += n;
        let whole = filled / 8 * 8;
        if n == 0 || filled == bytes.len() {
            values.clear();
            values.extend(
                bytes[..whole]
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))),
            );
            state.push(&values).map_err(|e| match e {
                crate::CaksError::NonFinite { index, value } => {
                    format!("non-finite observation {value} at position {}", offset + index)
                }
                other => other.to_string(),
            })?;
            offset += values.len();
            bytes.copy_within(whole..filled, 0);
            filled -= whole;
        }
        if n == 0 {
            break;
        }
    }
    if filled != 0 {
        return Err(format!(
            "binary input length is not a multiple of 8 bytes ({filled} trailing bytes)"
        ));
    }
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> CmdResult {
    let cal = calib::calibrate(args.chunk_size, args.replicates, args.seed).map_err(|e| e.to_string())?;
    let file = File::create(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    calib::write_csv(file, std::slice::from_ref(&cal)).map_err(|e| e.to_string())?;
    writeln!(
        out,
        "J={} mu_J={} sigma2_J={} sqrt(J)*mu_J={} J*sigma2_J={} -> {}",
        cal.j,
        cal.mu_j,
        cal.sigma2_j,
        cal.scaled_mean(),
        cal.scaled_variance(),
        args.out.display()
    )
    .map_err(io_err)?;
    Ok(EXIT_ACCEPT)
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let spec = ScenarioSpec {
        scenario: args.scenario,
        effect: args.effect,
        t: args.t,
        j: args.j,
        replicates: args.reps,
        alpha: args.alpha,
        master_seed: args.seed,
        direction: args.direction,
    };
    spec.validate().map_err(|e| e.to_string())?;
    let (mut table, policy) = args.calibration.resolve(args.j)?;
    let result = sim::run_scenario(&spec, &mut table, policy).map_err(|e| e.to_string())?;
    match args.output {
        OutputFormat::Csv => {
            writeln!(out, "{}", sim::SCENARIO_CSV_HEADER).map_err(io_err)?;
            writeln!(out, "{}", result.to_csv_record()).map_err(io_err)?;
        }
        OutputFormat::Json => {
            writeln!(out, "{}", serde_json::to_string(&result).expect("serializable")).map_err(io_err)?
        }
        OutputFormat::Text => writeln!(
            out,
            "scenario {} effect {} T={} J={}: {}/{} rejections at alpha={}, avg time {:.3e} s",
            spec.scenario, spec.effect, spec.t, spec.j, result.rejections, spec.replicates,
            spec.alpha, result.avg_time_seconds
        )
        .map_err(io_err)?,
    }
    Ok(EXIT_ACCEPT)
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    let r = sim::benchmark(args.n, args.chunk_size, &args.null, args.seed).map_err(|e| e.to_string())?;
    match args.output {
        OutputFormat::Csv => {
            writeln!(out, "{}", sim::BENCH_CSV_HEADER).map_err(io_err)?;
            writeln!(out, "{}", r.to_csv_record()).map_err(io_err)?;
        }
        OutputFormat::Json => writeln!(
            out,
            "{}",
            serde_json::json!({
                "n": r.n,
                "J": r.j,
                "caks_s": r.caks_seconds,
                "batch_stat_s": r.batch_stat_seconds,
                "batch_pvalue_s": r.batch_pvalue_seconds,
                "caks_peak_bytes": r.caks_peak_bytes,
            })
        )
        .map_err(io_err)?,
        OutputFormat::Text => writeln!(
            out,
            "N={} J={}: CAKS {:.3e} s, batch statistic {:.3e} s, batch p-value {:.3e} s, CAKS state {} bytes",
            r.n, r.j, r.caks_seconds, r.batch_stat_seconds, r.batch_pvalue_seconds, r.caks_peak_bytes
        )
        .map_err(io_err)?,
    }
    Ok(EXIT_ACCEPT)
}
