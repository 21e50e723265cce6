use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scpir::audit::{AuditConfig, AuditMode, Mutant, PlacementKind, DEFAULT_BUDGET, DEFAULT_TRIALS};
use scpir::engine::EngineChoice;
use scpir::harness::{
    cmd_audit, cmd_capacity, cmd_placement, cmd_run, cmd_sweep, parse_start_policy, sweep_csv,
    AuditRequest, ExperimentConfig, EXIT_FAILED, EXIT_OK, EXIT_USAGE,
};
use scpir::placement::PlacementSpec;
use scpir::rational::{self, Rational};
use scpir::Error;

#[derive(Parser, Debug)]
#[command(name = "scpir", version, about = "Storage-constrained PIR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run private retrievals and report the measured rate.
    Run(RunArgs),
    /// Measure rate against capacity over a grid of t values (CSV).
    Sweep(SweepArgs),
    /// Check that query distributions do not depend on the desired message.
    Audit(AuditArgs),
    /// Print and validate a placement.
    Placement(PlacementArgs),
    /// Evaluate the capacity and message-length formulas.
    Capacity(CapacityArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Number of databases.
    #[arg(long = "n")]
    n: Option<usize>,
    /// Number of messages.
    #[arg(long = "k")]
    k: Option<usize>,
    /// Storage fraction per database, as p/q.
    #[arg(long, value_parser = parse_rational, conflicts_with = "t")]
    mu: Option<Rational>,
    /// Replication factor mu*N, as p/q.
    #[arg(long, value_parser = parse_rational)]
    t: Option<Rational>,
    #[arg(long, value_enum, default_value_t = PlacementArg::Auto)]
    placement: PlacementArg,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    engine: EngineArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PlacementArg {
    Partition,
    Cyclic,
    Mixed,
    Auto,
}

impl From<PlacementArg> for PlacementKind {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Partition => PlacementKind::Partition,
            PlacementArg::Cyclic => PlacementKind::Cyclic,
            PlacementArg::Mixed => PlacementKind::Mixed,
            PlacementArg::Auto => PlacementKind::Auto,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum EngineArg {
    A,
    B,
    Auto,
}

impl From<EngineArg> for EngineChoice {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::A => EngineChoice::A,
            EngineArg::B => EngineChoice::B,
            EngineArg::Auto => EngineChoice::Auto,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// JSON experiment config; replaces the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Desired message index, or "uniform".
    #[arg(long, default_value = "1")]
    theta: String,
    /// Message length in bits (default: the smallest supported).
    #[arg(long = "l")]
    l: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Directory receiving one transcript JSON per trial.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long = "n")]
    n: usize,
    #[arg(long = "k")]
    k: usize,
    /// Comma-separated t values, e.g. 1,3/2,2 (default: 1, 3/2, ..., N).
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Statistical,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = ModeArg::Statistical)]
    mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    /// Pass threshold for the statistical estimate, as p/q.
    #[arg(long, value_parser = parse_rational, default_value = "1/20")]
    threshold: Rational,
    /// Start database of engine-B groups: anchor or uniform.
    #[arg(long, default_value = "uniform")]
    start: String,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Planner mutant: none, no-permutation, asymmetric-types, skip-undesired, desired-only.
    #[arg(long, default_value = "none")]
    mutant: String,
    /// Shorthand for --mutant asymmetric-types.
    #[arg(long)]
    break_symmetry: bool,
}

#[derive(Args, Debug)]
struct PlacementArgs {
    #[command(flatten)]
    common: Common,
    /// Validate this placement JSON instead of constructing one.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long = "l")]
    l: Option<u64>,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[command(flatten)]
    common: Common,
}

fn parse_rational(text: &str) -> Result<Rational, String> {
    rational::parse(text).map_err(|e| e.to_string())
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl Common {
    fn n(&self) -> Result<usize, Error> {
        self.n.ok_or_else(|| usage("--n is required"))
    }

    fn k(&self) -> Result<usize, Error> {
        self.k.ok_or_else(|| usage("--k is required"))
    }

    fn t(&self) -> Result<Rational, Error> {
        let n = self.n()?;
        match (self.mu, self.t) {
            (Some(mu), None) => Ok(mu * rational::int(n as i128)),
            (None, Some(t)) => Ok(t),
            _ => Err(usage("exactly one of --mu or --t is required")),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

fn run(args: RunArgs) -> Result<i32, Error> {
    let config = match &args.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => {
            let c = &args.common;
            let theta = match args.theta.as_str() {
                "uniform" => None,
                other => Some(other.parse().map_err(|_| usage(format!("bad --theta {other:?}")))?),
            };
            ExperimentConfig {
                mu: c.mu,
                t: c.t,
                placement: c.placement.into(),
                engine: c.engine.into(),
                seed: c.seed,
                trials: args.trials,
                theta,
                message_len: args.l,
                workers: args.workers,
                ..ExperimentConfig::new(c.n()?, c.k()?)
            }
        }
    };
    let outcome = cmd_run(&config)?;
    if let Some(dir) = &args.transcripts {
        fs::create_dir_all(dir)?;
        for (i, t) in outcome.transcripts.iter().enumerate() {
            fs::write(dir.join(format!("trial-{i:05}.json")), json(t))?;
        }
    }
    emit(args.common.out.as_deref(), &json(&outcome.report))?;
    for failure in &outcome.report.failures {
        eprintln!("{failure}");
    }
    Ok(outcome.exit_code)
}

fn sweep(args: SweepArgs) -> Result<i32, Error> {
    let grid: Vec<Rational> = match &args.t_grid {
        Some(text) => text.split(',').map(rational::parse).collect::<Result<_, _>>()?,
        None => (2..=2 * args.n as i128).map(|h| Rational::new(h, 2)).collect(),
    };
    let rows = cmd_sweep(args.n, args.k, &grid, args.seed)?;
    let text = match args.format {
        Format::Csv => sweep_csv(&rows),
        Format::Json => json(&rows),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(if rows.iter().all(|r| r.rate == r.capacity) {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn audit(args: AuditArgs) -> Result<i32, Error> {
    let c = &args.common;
    let mutant: Mutant = if args.break_symmetry {
        Mutant::AsymmetricTypes
    } else {
        args.mutant.parse()?
    };
    let mut config = AuditConfig::new(c.n()?, c.k()?, c.t()?)
        .placement(c.placement.into())
        .engine(c.engine.into())
        .mutant(mutant)
        .start(parse_start_policy(&args.start)?);
    config.budget = args.budget;
    let mode = match args.mode {
        ModeArg::Exhaustive => AuditMode::Exhaustive,
        ModeArg::Statistical => AuditMode::Statistical,
    };
    let request = AuditRequest {
        trials: args.trials,
        threshold: args.threshold,
        seed: c.seed,
        ..AuditRequest::new(config, mode)
    };
    let (verdict, code) = cmd_audit(&request)?;
    emit(c.out.as_deref(), &json(&verdict))?;
    Ok(code)
}

fn placement(args: PlacementArgs) -> Result<i32, Error> {
    let c = &args.common;
    let spec = match &args.from {
        Some(path) => PlacementSpec::from_json(&fs::read_to_string(path)?)?,
        None => PlacementKind::from(c.placement).build(c.n()?, c.t()?)?,
    };
    let summary = cmd_placement(spec, c.k.unwrap_or(1), c.engine.into(), args.l)?;
    emit(c.out.as_deref(), &json(&summary))?;
    Ok(if summary.validation.valid { EXIT_OK } else { EXIT_FAILED })
}

fn capacity(args: CapacityArgs) -> Result<i32, Error> {
    let c = &args.common;
    let summary = cmd_capacity(c.n()?, c.k()?, c.t()?)?;
    emit(c.out.as_deref(), &json(&summary))?;
    Ok(EXIT_OK)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Internal(_) | Error::DecodeFailure(_) => EXIT_FAILED,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Audit(a) => audit(a),
        Command::Placement(a) => placement(a),
        Command::Capacity(a) => capacity(a),
    };
    let code = result.unwrap_or_else(|err| {
        eprintln!("error: {err}");
        exit_code_for(&err)
    });
    ExitCode::from(code as u8)
}
