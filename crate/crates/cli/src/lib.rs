//! `vagt` command-line runner: JSON configs in, JSON and CSV artifacts out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "vagt", version, about = "Variational adiabatic gauge transformation experiments")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true, env = "VAGT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the flow and write result.json plus the requested outputs.
    Run(RunArgs),
    /// Write dense energy levels of H_mu along the sweep grid.
    Sweep(RunArgs),
    /// Run, then write the correlation functions.
    Correlate(RunArgs),
    /// Run, then write the effective Hamiltonian and fidelities.
    Effective(RunArgs),
    /// Run the invariant suite.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; also replaces the shot seed of the strategy.
    #[arg(long)]
    pub seed: Option<u64>,
    /// e.g. `analytic`, `circuit-exact`, `circuit-shots:100:0`, `cheap-n2:100:0`.
    #[arg(long)]
    pub strategy: Option<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::load(&self.config)?.with_overrides(self.seed, self.strategy.as_deref(), self.out.as_deref())
    }
}

/// Execute a parsed command; returns whether it fully succeeded.
pub fn execute(command: &Command) -> Result<bool> {
    let written = match command {
        Command::Validate { seed } => return validate::run_suite(*seed, &mut std::io::stdout()),
        Command::Run(a) => commands::cmd_run(&a.resolve()?)?,
        Command::Sweep(a) => commands::cmd_sweep(&a.resolve()?)?,
        Command::Correlate(a) => commands::cmd_correlate(&a.resolve()?)?,
        Command::Effective(a) => commands::cmd_effective(&a.resolve()?)?,
    };
    for p in &written.0 {
        println!("wrote {}", p.display());
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from(["vagt", "run", "--config", "c.json", "--seed", "4", "--threads", "2"]).unwrap();
        assert_eq!(cli.threads, Some(2));
        match cli.command {
            Command::Run(a) => assert_eq!((a.config, a.seed), (PathBuf::from("c.json"), Some(4))),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["vagt", "run"]).is_err());
    }
}
