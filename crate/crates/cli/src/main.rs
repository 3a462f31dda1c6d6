//! `wftune`: run tuning scenarios over synthetic workloads, or serve
//! interactive sessions over HTTP.

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;
use wftune_core::harness::{prepare_experiment, run_scenarios, write_csv, write_csv_file, Scenario};
use wftune_core::synthetic::{SyntheticWorkload, WorkloadSpec};
use wftune_core::{TuneError, TunerConfig};

#[derive(Parser)]
#[command(name = "wftune", version, about = "Online semi-automatic index tuning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or all scenarios and write per-statement metrics as CSV.
    Run(RunArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PartitionArg {
    Fixed,
    Auto,
}

#[derive(Args)]
struct RunArgs {
    /// baseline, wfit-ind, good-feedback, bad-feedback, lagged, lagged-T,
    /// auto-partition, or all.
    #[arg(long, default_value = "baseline")]
    scenario: String,
    /// Acceptance period for the lagged scenario.
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long, default_value_t = 8)]
    phases: usize,
    #[arg(long = "per-phase", default_value_t = 50)]
    per_phase: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Indices in the generated catalog.
    #[arg(long, default_value_t = 24)]
    universe: usize,
    #[arg(long = "idx-cnt", default_value_t = 40)]
    idx_cnt: usize,
    #[arg(long = "state-cnt", default_value_t = 128)]
    state_cnt: usize,
    #[arg(long = "hist-size", default_value_t = 100)]
    hist_size: usize,
    #[arg(long = "rand-cnt", default_value_t = 100)]
    rand_cnt: usize,
    /// `auto` turns the baseline into the auto-partition scenario.
    #[arg(long, value_enum, default_value = "fixed")]
    partition: PartitionArg,
    /// Load the workload from a JSON file instead of generating it.
    #[arg(long = "workload-file")]
    workload_file: Option<PathBuf>,
    /// Write the workload used to a JSON file.
    #[arg(long = "save-workload")]
    save_workload: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record elapsed wall-clock milliseconds in the output.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Restore sessions from this file at startup and save them on shutdown.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

fn scenarios(args: &RunArgs) -> Result<Vec<Scenario>, TuneError> {
    if args.lag == Some(0) {
        return Err(TuneError::Config("lag must be at least 1".into()));
    }
    let list = if args.scenario == "all" {
        Scenario::standard(args.lag.unwrap_or(10))
    } else {
        vec![Scenario::parse(&args.scenario, args.lag)?]
    };
    if args.partition == PartitionArg::Fixed {
        return Ok(list);
    }
    match list.as_slice() {
        [Scenario::Baseline] | [Scenario::AutoPartition] => Ok(vec![Scenario::AutoPartition]),
        _ => Err(TuneError::Config(
            "--partition auto applies to the baseline scenario only".into(),
        )),
    }
}

fn run(args: RunArgs) -> Result<(), TuneError> {
    let scenarios = scenarios(&args)?;
    let tuner = TunerConfig {
        idx_cnt: args.idx_cnt,
        state_cnt: args.state_cnt,
        hist_size: args.hist_size,
        rand_cnt: args.rand_cnt,
        seed: args.seed,
        ..Default::default()
    };
    tuner.validate()?;
    let workload = match &args.workload_file {
        Some(p) => SyntheticWorkload::load(p)?,
        None => SyntheticWorkload::generate(&WorkloadSpec {
            phases: args.phases,
            statements_per_phase: args.per_phase,
            seed: args.seed,
            universe: args.universe,
            ..WorkloadSpec::desk()
        })?,
    };
    if let Some(p) = &args.save_workload {
        workload.save(p)?;
    }
    let exp = prepare_experiment(workload, tuner)?;
    let rows = run_scenarios(&exp, &scenarios, args.timing)?;
    match &args.out {
        Some(p) => write_csv_file(&rows, p),
        None => write_csv(&rows, std::io::stdout().lock()),
    }
}

fn serve(args: ServeArgs) -> Result<(), TuneError> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(wftune_service::serve(SocketAddr::new(args.host, args.port), args.snapshot))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WFTUNE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("wftune: {e}");
            match e {
                TuneError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
