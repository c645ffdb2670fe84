use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use plasmon_cli::{run, CliError, Experiment, RunConfig};

#[derive(Parser)]
#[command(
    name = "plasmon",
    version,
    about = "Emitter dynamics near a metal-dielectric interface"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads.
    #[arg(long, env = "PLASMON_JOBS", global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Tabulate the spectral density J(omega).
    Spectral,
    /// Tabulate the memory kernel K(tau).
    Kernel,
    /// Solve for alpha(t) and P_e(t).
    Evolve,
    /// Bound-state existence, energy and residue over the delta_z grid.
    BoundState,
    /// Bound-state energy against the band edge over the delta_z grid.
    Spectrum,
    /// Time-dependent decay rate and the Markov reference.
    Rates,
    /// Exact dynamics against the pseudomode model.
    Compare,
    /// Long-time population against Z^2 over the delta_z grid.
    SweepZ,
    /// Maximal trapped population for each eps_d.
    SweepEps,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectral => Experiment::Spectral,
            Command::Kernel => Experiment::Kernel,
            Command::Evolve => Experiment::Evolve,
            Command::BoundState => Experiment::BoundState,
            Command::Spectrum => Experiment::Spectrum,
            Command::Rates => Experiment::Rates,
            Command::Compare => Experiment::Compare,
            Command::SweepZ => Experiment::SweepZ,
            Command::SweepEps => Experiment::SweepEps,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    for (i, item) in cli.set.iter().enumerate() {
        cfg.apply_override(item, i)?;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            error!("--jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("thread pool is configured once");
    }
    let result = load(&cli).and_then(|cfg| run(cli.command.into(), &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
