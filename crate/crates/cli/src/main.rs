//! `czlab`: batch runner for the experiments of `czlab-core`.
//!
//! Exit status: 0 when every assertion passes, 1 when one fails (the failing
//! invariant is named on stderr), 2 for configuration errors.

mod config;
mod experiments;
mod fixture;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, Experiment, ExperimentConfig, RunArgs};

#[derive(Parser)]
#[command(name = "czlab", version, about = "Dyadic Calderon-Zygmund experiments on matrix-valued functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write `<name>.csv` and `<name>.json` to `--out`.
    Run {
        /// Experiment name, e.g. `decompose-audit` or `counterexample:appb`.
        experiment: String,
        /// JSON file with default values for the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Write a deterministic fixture grid function.
    GenFixture(fixture::FixtureArgs),
    /// List the experiment names.
    List,
}

const EXIT_ASSERTION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn init_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("CZLAB_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("CZLAB_THREADS = `{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| ConfigError(e.to_string()))
}

fn exit_for(err: anyhow::Error) -> ExitCode {
    if err.downcast_ref::<ConfigError>().is_some() {
        eprintln!("configuration error: {err}");
        ExitCode::from(EXIT_CONFIG)
    } else {
        eprintln!("error: {err:#}");
        ExitCode::from(EXIT_ASSERTION)
    }
}

fn run(experiment: &str, config: Option<PathBuf>, args: RunArgs) -> anyhow::Result<bool> {
    let experiment = Experiment::parse(experiment)?;
    let args = match config {
        Some(path) => args.over(RunArgs::from_file(&path)?),
        None => args,
    };
    let cfg = ExperimentConfig::resolve(experiment, args)?;
    let outcome = experiments::run(&cfg)?;
    let (csv, json) = report::write_outputs(&cfg, &outcome)?;
    for a in &outcome.assertions {
        println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
        if !a.pass {
            eprintln!("assertion failed: {}", a.name);
        }
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(outcome.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return exit_for(e.into());
    }
    match cli.command {
        Command::Run { experiment, config, args } => match run(&experiment, config, args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(EXIT_ASSERTION),
            Err(e) => exit_for(e),
        },
        Command::GenFixture(a) => match fixture::gen_fixture(&a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(e),
        },
        Command::List => {
            for e in Experiment::ALL {
                println!("{}", e.name());
            }
            ExitCode::SUCCESS
        }
    }
}
