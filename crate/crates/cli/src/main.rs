//! `pab`: probabilistic available bandwidth estimation from the command line.

mod estimate;
mod fit;
mod probe;
mod settings;
mod simulate;
mod topo;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "pab", version, about = "Probabilistic available bandwidth estimation over many paths")]
struct Cli {
    /// Directory for every file a command writes.
    #[arg(long, global = true, env = "PAB_OUTPUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a seeded simulation experiment comparing selection policies.
    Simulate(simulate::Args),
    /// Estimate every path of a topology with live probes.
    Estimate(estimate::Args),
    /// Fit the likelihood slope to training outcomes.
    Fit(fit::Args),
    /// Probe one receiver at one rate.
    Probe(probe::ProbeArgs),
    /// Run a probe receiver.
    Receive(probe::ReceiveArgs),
    /// Inspect or generate topologies.
    #[command(subcommand)]
    Topo(topo::Command),
}

/// A failed command, split by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad input or configuration: exit 2.
    Config(anyhow::Error),
    /// Anything that went wrong while running: exit 1.
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

pub trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Output directory, created on first use.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn prepare(&self) -> Result<&Path, Failure> {
        std::fs::create_dir_all(&self.0)
            .map_err(|e| Failure::Config(anyhow::anyhow!("output directory {}: {e}", self.0.display())))?;
        Ok(&self.0)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let path = self.prepare()?.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Failure::Runtime(anyhow::anyhow!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    let out = OutDir(cli.out_dir);
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(args, &out),
        Command::Estimate(args) => estimate::run(args, &out),
        Command::Fit(args) => fit::run(args, &out),
        Command::Probe(args) => probe::run_probe(args),
        Command::Receive(args) => probe::run_receive(args),
        Command::Topo(cmd) => topo::run(cmd, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
