//! `cpexit`: batch front-end. One subcommand per job; everything else lives in
//! the TOML config.

mod config;
mod jobs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::{JobConfig, JobKind};

#[derive(Debug, Parser)]
#[command(name = "cpexit", version, about = "Exit and entry transforms of a compound Poisson process")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Job configuration (TOML). Optional for `validate`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory receiving the output file.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    /// Worker threads.
    #[arg(long, global = true, env = "CPEXIT_THREADS")]
    threads: Option<usize>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// R_x(s) and S_x(s) on a grid.
    Resolvent,
    /// One-boundary passage transforms.
    OneBoundary,
    /// Exit transforms on [0, B].
    Exit,
    /// Entry transforms into [0, B].
    Entry,
    /// P[chi(y) > t] by inversion in s.
    Survival,
    /// Monte Carlo estimates.
    Simulate,
    /// The acceptance suite; exits nonzero on any failure.
    Validate,
}

impl Command {
    fn kind(self) -> JobKind {
        match self {
            Command::Resolvent => JobKind::Resolvent,
            Command::OneBoundary => JobKind::OneBoundary,
            Command::Exit => JobKind::Exit,
            Command::Entry => JobKind::Entry,
            Command::Survival => JobKind::Survival,
            Command::Simulate => JobKind::Simulate,
            Command::Validate => JobKind::Validate,
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let kind = cli.command.kind();
    let cfg = match &cli.config {
        Some(path) => JobConfig::load(path)?,
        None if kind == JobKind::Validate => JobConfig::default(),
        None => bail!("`{}` needs --config", kind.name()),
    };
    if let Some(job) = cfg.job {
        if job != kind {
            bail!("config is for the `{}` job, not `{}`", job.name(), kind.name());
        }
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (artifact, ok) = match kind {
        JobKind::Resolvent => (jobs::resolvent(&cfg)?, true),
        JobKind::OneBoundary => (jobs::one_boundary(&cfg)?, true),
        JobKind::Exit => (jobs::exit(&cfg)?, true),
        JobKind::Entry => (jobs::entry(&cfg)?, true),
        JobKind::Survival => (jobs::survival(&cfg)?, true),
        JobKind::Simulate => (jobs::simulate(&cfg)?, true),
        JobKind::Validate => jobs::validate(&cfg)?,
    };
    let path = output::write(&artifact, kind, &cfg, &cli.output_dir)?;
    log::info!("wrote {}", path.display());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
