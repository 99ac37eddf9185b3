//! `wbary`: batch driver for free-support Wasserstein barycenters and the
//! benchmark experiments built on them.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::RunConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "wbary", version, about = "Free-support Wasserstein barycenters and their benchmarks")]
struct Cli {
    /// Flat `key = value` config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Config override, repeatable: --set seed=3
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Validate the configuration and print it without running
    #[arg(long, global = true)]
    dry_run: bool,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact optimal transport between two point-cloud CSVs
    #[command(after_help = commands::OT_HELP)]
    Ot {
        source: PathBuf,
        target: PathBuf,
        /// Write the plan as i,j,mass rows
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Free-support barycenter of measure CSVs
    #[command(after_help = commands::BARYCENTER_HELP)]
    Barycenter { inputs: Vec<PathBuf> },
    /// Gaussian benchmark against the exact Bures-Wasserstein barycenter
    #[command(name = "gauss-bench", after_help = commands::GAUSS_BENCH_HELP)]
    GaussBench,
    /// WASP aggregation of subset posteriors in Bayesian linear regression
    #[command(after_help = commands::WASP_HELP)]
    Wasp,
    /// Nearest-barycenter classification of grayscale images
    #[command(after_help = commands::CLASSIFY_HELP)]
    Classify,
    /// Distributed vector quantization by barycenters of subset summaries
    #[command(after_help = commands::DVQ_HELP)]
    Dvq,
    /// Write synthetic benchmark data (glyphs or blobs)
    #[command(after_help = commands::GENERATE_HELP)]
    Generate { kind: String },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let ctx = Context { dry_run: cli.dry_run, out: cli.out };
    match cli.command {
        Command::Ot { source, target, plan } => {
            cfg.finish()?;
            commands::ot(&source, &target, plan.as_deref(), &ctx)
        }
        Command::Barycenter { inputs } => commands::barycenter(inputs, &mut cfg, &ctx),
        Command::GaussBench => commands::gauss_bench(&mut cfg, &ctx),
        Command::Wasp => commands::wasp(&mut cfg, &ctx),
        Command::Classify => commands::classify(&mut cfg, &ctx),
        Command::Dvq => commands::dvq(&mut cfg, &ctx),
        Command::Generate { kind } => commands::generate(&kind, &mut cfg, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().target(env_logger::Target::Stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
