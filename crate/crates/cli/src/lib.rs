//! Command-line front end for the captrade simulator.
//!
//! The binary is a thin wrapper over [`main_with_args`]; the commands are
//! exposed as library functions so tests can call them directly.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{
    check_report, cmd_run, cmd_sweep, cmd_verify, report_lines, Figure, SweepOverrides,
};
pub use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "captrade",
    version,
    about = "Cap-and-trade simulator for AI compute"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario file and write years.csv, trades.csv and summary.csv.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write single-firm parameter sweeps as figN.csv tables.
    Sweep {
        /// Figures to produce; repeat or omit for all four.
        #[arg(long, value_enum)]
        figure: Vec<Figure>,
        #[arg(long)]
        k: Option<f64>,
        /// Allowance price (ignored by fig1b, which uses sqrt(a)).
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        grid_min: Option<f64>,
        #[arg(long)]
        grid_max: Option<f64>,
        #[arg(long)]
        grid_points: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Cross-check the closed-form equilibria on random parameters.
    Verify {
        #[arg(long, default_value_t = 1000)]
        sample: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Swap in a known-wrong solver to confirm failures are detected.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { scenario, out } => {
            let result = cmd_run(&scenario, &out)?;
            for d in &result.defaults {
                eprintln!("{d}");
            }
            for f in &result.manifest.files {
                println!("wrote {}", f.display());
            }
            println!("config_hash={}", result.manifest.config_hash);
        }
        Command::Sweep {
            figure,
            k,
            b,
            grid_min,
            grid_max,
            grid_points,
            out,
        } => {
            let overrides = SweepOverrides {
                k,
                b,
                grid_min,
                grid_max,
                grid_points,
            };
            let figures = if figure.is_empty() {
                Figure::ALL.to_vec()
            } else {
                figure
            };
            for fig in figures {
                let result = cmd_sweep(fig, &overrides, &out)?;
                println!(
                    "wrote {} rows={}",
                    result.path.display(),
                    result.result.rows.len()
                );
                if let Some(c) = result.result.crossover {
                    println!("crossover_axis_value={c}");
                }
            }
        }
        Command::Verify {
            sample,
            seed,
            inject_fault,
        } => {
            let report = cmd_verify(sample, seed, inject_fault)?;
            for line in report_lines(&report) {
                println!("{line}");
            }
            check_report(&report)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::VALIDATION
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            e.exit_code()
        }
    }
}
