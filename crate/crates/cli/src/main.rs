//! Command-line front end.
//!
//! Every run is driven by a single JSON config plus a handful of override
//! flags. Outputs are written only under the resolved output directory,
//! and only after the whole computation has succeeded, so a failing run
//! leaves no partial artifacts. Logs go to stderr as `level key=value`
//! lines; repeated runs with identical inputs produce byte-identical
//! output files.

mod commands;
mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relprior_core::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "relprior", version, about = "Reliability fitting, priors, and posterior sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap the worker thread count (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Run simulations at the full production sampler budget
    /// (4 chains x 2,500 retained draws) instead of the reduced default.
    #[arg(long)]
    paper_fidelity: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum likelihood fit with profile intervals and plot data.
    Fit(CommonArgs),
    /// Posterior sampling with interval summaries and draw export.
    Bayes(CommonArgs),
    /// Relative prior density surface over a parameter grid.
    PriorSurface(CommonArgs),
    /// Nonparametric failure-probability estimate and plot points.
    Npe(CommonArgs),
    /// Coverage-probability simulation sweep.
    Simulate(CommonArgs),
    /// Posterior sensitivity to weakly informative prior settings.
    Sensitivity(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Bayes(_) => "bayes",
            Command::PriorSurface(_) => "prior-surface",
            Command::Npe(_) => "npe",
            Command::Simulate(_) => "simulate",
            Command::Sensitivity(_) => "sensitivity",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Fit(a)
            | Command::Bayes(a)
            | Command::PriorSurface(a)
            | Command::Npe(a)
            | Command::Simulate(a)
            | Command::Sensitivity(a) => a,
        }
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Guard => 4,
        ErrorClass::Config => 5,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let args = cli.command.args();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let cfg = config::load(&args.config, cli.command.name(), args.seed, args.out.clone())?;
    emit::log(
        "info",
        &[
            ("command", cli.command.name().to_string()),
            ("config", args.config.display().to_string()),
            ("out", cfg.output_dir.display().to_string()),
        ],
    );
    match &cli.command {
        Command::Fit(_) => commands::fit(&cfg),
        Command::Bayes(_) => commands::bayes(&cfg),
        Command::PriorSurface(_) => commands::prior_surface(&cfg),
        Command::Npe(_) => commands::npe(&cfg),
        Command::Simulate(_) => commands::simulate(&cfg, args.paper_fidelity),
        Command::Sensitivity(_) => commands::sensitivity(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit::log(
                "error",
                &[
                    ("class", format!("{:?}", e.class()).to_lowercase()),
                    ("msg", e.to_string()),
                ],
            );
            ExitCode::from(exit_code(e.class()))
        }
    }
}
