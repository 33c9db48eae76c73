//! Command-line front end: run single experiments, parameter sweeps, the
//! worst-case construction, and trace audits.
//!
//! Exit codes: 0 on success, 1 when a runtime check fails, 2 on an invalid
//! spec or I/O error.

use aqt::harness::{
    self, default_jobs, lower_bound_report, run_experiment, run_optimal, sweep,
    validate_stored_trace, write_sweep_csv, SchedulerSpec, SpecArgs, SweepSpec,
};
use aqt::lower_bound::LbParams;
use aqt::rational::parse_rational;
use aqt::{AqtError, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "aqt", about = "Adversarial packet scheduling on lines and trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and print a summary line.
    Simulate(SpecArgs),
    /// Run a grid of experiments and emit an aggregate CSV.
    Sweep(SweepArgs),
    /// Generate the worst-case pattern, audit it against a scheduler set,
    /// and print the report.
    Lowerbound(LowerboundArgs),
    /// Audit a stored trace: internal consistency plus a byte-exact replay.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep grid (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel cells; defaults to AQT_JOBS, then the core count.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    ell: u32,
    /// Injection rate as num/den; must exceed 1/(ell+1).
    #[arg(long)]
    rho: String,
    /// Schedulers to audit; prefix with drain- to keep forwarding stored
    /// packets past the pure rule.
    #[arg(long, value_delimiter = ',', default_value = "ppts,hpts,greedy,drain-ppts")]
    schedulers: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// The trace to audit (JSON lines).
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(report) = harness::checker_report(&e) {
                eprintln!("{report}");
            }
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate(args) => simulate(args),
        Cmd::Sweep(args) => run_sweep(args),
        Cmd::Lowerbound(args) => lowerbound(args),
        Cmd::Validate(args) => {
            let spec = args.spec.into_spec()?;
            validate_stored_trace(&spec, &args.trace)?;
            println!("ok: trace is consistent and replays byte-identically");
            Ok(())
        }
    }
}

fn simulate(args: SpecArgs) -> Result<()> {
    let spec = args.into_spec()?;
    if spec.scheduler == SchedulerSpec::Optimal {
        let best = run_optimal(&spec)?;
        println!("optimal max_load={best}");
        return Ok(());
    }
    let outcome = run_experiment(&spec)?;
    let bound = outcome
        .bound
        .map_or_else(String::new, |b| format!(" bound={b}"));
    println!(
        "scheduler={} n={} horizon={} packets={} max_load={}{} delivered={} remaining={}",
        spec.scheduler.name(),
        outcome.topo.node_count(),
        outcome.trace.meta().horizon,
        outcome.pattern.len(),
        outcome.trace.peak_load(),
        bound,
        outcome.trace.total_delivered(),
        outcome.trace.remaining(),
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let spec = SweepSpec::read_json(&args.spec)?;
    let jobs = args.jobs.unwrap_or_else(default_jobs);
    let rows = sweep(&spec, jobs)?;
    match &args.out {
        Some(path) => write_sweep_csv(&rows, std::fs::File::create(path)?)?,
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn lowerbound(args: LowerboundArgs) -> Result<()> {
    let rho = parse_rational(&args.rho).map_err(AqtError::Spec)?;
    let params = LbParams::new(args.m, args.ell, rho)?;
    let report = lower_bound_report(&params, &args.schedulers)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| AqtError::Spec(format!("json: {e}")))?
    );
    let bad: Vec<_> = report.runs.iter().filter(|r| !r.violations.is_empty()).collect();
    if let Some(first) = bad.first() {
        return Err(AqtError::CheckerFailure {
            checker: "stale-audit".into(),
            round: 0,
            detail: format!("{}: {}", first.scheduler, first.violations[0].clone()),
        });
    }
    Ok(())
}
