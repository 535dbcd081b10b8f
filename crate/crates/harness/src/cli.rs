//! Argument parsing and exit-code mapping.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, parse_values, Exit, Outcome, SweepParam};
use crate::config::{Overrides, RunConfig};
use crate::suites::Suite;

/// Fractional total-variation denoising with optimality certificates and
/// level-set diagnostics.
#[derive(Debug, Parser)]
#[command(name = "nltv", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write u, the dual pattern and a report.
    Denoise(Common),
    /// Run property suites against the configuration.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite to run; repeat for several, omit for all.
        #[arg(long = "suite", value_enum)]
        suites: Vec<Suite>,
    },
    /// Re-run the configuration over values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values; fractions such as 1/64 are accepted.
        #[arg(long)]
        values: String,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; defaults are used for absent fields or a missing flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solver log interval in iterations (0 disables).
    #[arg(long)]
    pub log_every: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides { out_dir: self.out.clone(), seed: self.seed, log_every: self.log_every });
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Usage.code() } else { Exit::Pass.code() };
        }
    };
    let outcome = match &cli.command {
        Command::Denoise(common) => common.config().map(|cfg| commands::denoise(&cfg)),
        Command::Verify { common, suites } => common.config().map(|cfg| commands::verify(&cfg, suites)),
        Command::Sweep { common, param, values } => common.config().and_then(|cfg| {
            let values = parse_values(values)?;
            Ok(commands::sweep(&cfg, *param, &values))
        }),
    };
    let outcome = outcome.unwrap_or_else(|msg| Outcome { exit: Exit::Usage, report: None, message: Some(msg) });
    finish(&outcome)
}

fn finish(outcome: &Outcome) -> i32 {
    if let Some(msg) = &outcome.message {
        eprintln!("nltv: {msg}");
    }
    if let Some(report) = &outcome.report {
        for suite in &report.suites {
            println!("{:<14} {}", suite.name, if suite.passed { "pass" } else { "FAIL" });
            for d in &suite.diagnostics {
                println!("    {d}");
            }
        }
        if let Some(solve) = &report.solve {
            println!("solve: converged={} iters={} gap={:e}", solve.converged, solve.iters, solve.final_gap);
        }
    }
    outcome.exit.code()
}
