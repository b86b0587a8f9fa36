use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use subjhist::explore::{explore_exhaustive_with, run_random, Reduction};
use subjhist::native::{run_native_stress, NativeObject};
use subjhist::report::ExplorationReport;
use subjhist::scenarios::{parse_values, registry, Scenario, ScenarioParams};
use subjhist::trace::Trace;
use subjhist::vm::Bounds;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "subjhist",
    version,
    about = "Explore interleavings of concurrent object clients and check their ghost-state specs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the registered scenarios.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario.
    Run(RunArgs),
    /// Replay a trace file with full checking.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Random,
    Native,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectArg {
    Exchanger,
    Network,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReductionArg {
    Auto,
    None,
    StateCache,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (see `list`).
    #[arg(value_name = "SCENARIO", conflicts_with = "scenario")]
    name: Option<String>,
    #[arg(short, long)]
    scenario: Option<String>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    /// Interferer calls for e-qqc.
    #[arg(long)]
    n: Option<usize>,
    /// Calls per interferer for e-qc.
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated values for the first ex-seq thread.
    #[arg(long)]
    vs1: Option<String>,
    /// Comma-separated values for the second ex-seq thread.
    #[arg(long)]
    vs2: Option<String>,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Scheduler seed; the SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    threads: usize,
    #[arg(long, default_value_t = 10_000)]
    ops: usize,
    /// Native object; inferred from the scenario when omitted.
    #[arg(long, value_enum)]
    object: Option<ObjectArg>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    yields: Option<u32>,
    #[arg(long, value_enum, default_value = "auto")]
    reduction: ReductionArg,
    #[arg(long)]
    json: bool,
    /// Write the schedule of the first violation, else of the first witness,
    /// else of the first complete execution.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(value_name = "TRACE", conflicts_with = "trace_in")]
    path: Option<PathBuf>,
    #[arg(long)]
    trace_in: Option<PathBuf>,
    /// Expected scenario; the trace header must name the same one.
    #[arg(short, long)]
    scenario: Option<String>,
    #[arg(long)]
    json: bool,
}

/// Errors mapped to exit code 2.
struct ConfigError(String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

/// Prints the report; a closed stdout (e.g. piped into `head`) is not an error.
fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    let out = if json {
        serde_json::to_string_pretty(value).expect("report serializes") + "\n"
    } else {
        text()
    };
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
}

fn verdict(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn list(json: bool) -> ExitCode {
    let reg = registry();
    emit(json, &reg, || {
        reg.iter()
            .map(|i| {
                format!(
                    "{:<14} {}\n{:<14} params: {}\n",
                    i.name, i.assertion, "", i.params
                )
            })
            .collect()
    });
    ExitCode::SUCCESS
}

fn seed(args: &RunArgs) -> Result<u64, ConfigError> {
    match std::env::var("SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("SEED must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(args.seed),
    }
}

fn scenario(args: &RunArgs) -> Result<Scenario, ConfigError> {
    let name = args
        .name
        .as_deref()
        .or(args.scenario.as_deref())
        .ok_or_else(|| ConfigError("no scenario given; see `subjhist list`".into()))?;
    let values = |s: &Option<String>| {
        s.as_deref()
            .map(parse_values)
            .transpose()
            .map_err(ConfigError)
    };
    let params = ScenarioParams {
        n: args.n,
        k: args.k,
        vs1: values(&args.vs1)?,
        vs2: values(&args.vs2)?,
    };
    Ok(Scenario::from_name(name, &params)?)
}

fn bounds(args: &RunArgs) -> Bounds {
    let d = Bounds::default();
    Bounds {
        max_steps: args.max_steps.unwrap_or(d.max_steps),
        retry_bound: args.retries.unwrap_or(d.retry_bound),
        yield_count: args.yields.unwrap_or(d.yield_count),
    }
}

fn native_object(args: &RunArgs, s: &Scenario) -> Result<NativeObject, ConfigError> {
    match (args.object, s) {
        (Some(ObjectArg::Exchanger), _) => Ok(NativeObject::Exchanger),
        (Some(ObjectArg::Network), _) => Ok(NativeObject::Network),
        (None, Scenario::ExchangePair { .. } | Scenario::ExSeq { .. }) => {
            Ok(NativeObject::Exchanger)
        }
        (None, Scenario::EQc { .. } | Scenario::EQqc { .. }) => Ok(NativeObject::Network),
        (None, other) => Err(ConfigError(format!(
            "scenario {} has no native counterpart; pass --object",
            other.name()
        ))),
    }
}

fn trace_schedule(r: &ExplorationReport) -> Option<&[usize]> {
    r.violations
        .first()
        .map(|v| v.schedule.as_slice())
        .or_else(|| r.witnesses.first().map(|w| w.schedule.as_slice()))
        .or_else(|| r.outcomes.first().map(|o| o.schedule.as_slice()))
}

fn run(args: RunArgs) -> Result<ExitCode, ConfigError> {
    let s = scenario(&args)?;
    let bounds = bounds(&args);
    let seed = seed(&args)?;
    let report = match args.mode {
        ModeArg::Native => {
            if args.threads == 0 {
                return Err(ConfigError("--threads must be at least 1".into()));
            }
            let r = run_native_stress(native_object(&args, &s)?, args.threads, args.ops, seed);
            emit(args.json, &r, || r.render());
            return Ok(verdict(r.passed()));
        }
        ModeArg::Exhaustive => {
            let reduction = match args.reduction {
                ReductionArg::Auto => Reduction::Auto,
                ReductionArg::None => Reduction::None,
                ReductionArg::StateCache => Reduction::StateCache,
            };
            explore_exhaustive_with(&s, bounds, reduction)?
        }
        ModeArg::Random => run_random(&s, args.runs, seed, bounds),
    };
    if let Some(path) = &args.trace_out {
        let schedule = trace_schedule(&report).unwrap_or(&[]);
        let trace = Trace::record(&s, bounds, schedule, report.seed)?;
        fs::write(path, trace.format())
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    }
    emit(args.json, &report, || report.render());
    Ok(verdict(report.passed()))
}

fn replay(args: ReplayArgs) -> Result<ExitCode, ConfigError> {
    let path = args
        .path
        .or(args.trace_in)
        .ok_or_else(|| ConfigError("no trace file given".into()))?;
    let text =
        fs::read_to_string(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let trace = Trace::parse(&text)?;
    if let Some(name) = &args.scenario {
        if name != trace.scenario.name() {
            return Err(ConfigError(format!(
                "trace records scenario {}, not {name}",
                trace.scenario.name()
            )));
        }
    }
    let (report, _) = trace.replay()?;
    emit(args.json, &report, || report.render());
    Ok(verdict(report.passed()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::List { json } => Ok(list(json)),
        Command::Run(args) => run(args),
        Command::Replay(args) => replay(args),
    };
    result.unwrap_or_else(|ConfigError(msg)| {
        eprintln!("error: {msg}");
        ExitCode::from(EXIT_CONFIG)
    })
}
