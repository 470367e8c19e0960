mod commands;
mod matrix_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::TypedValueParser;
use clap::{error::ErrorKind, Parser, Subcommand};
use expconvex::convexity::DEFAULT_PSD_TOL;
use expconvex::par::Execution;
use expconvex::transform::DEFAULT_FIT_REG;
use expconvex::verify::{VerifyConfig, GRAM_POINTS, GRID_HI, GRID_LO};

use commands::{CheckEcArgs, FitArgs, EXIT_OK, EXIT_USAGE};

/// Exponential convexity tools for trace functions tr exp(tA + B).
///
/// Matrix files are JSON: {"A": {"n": 2, "entries": [[re, im], ...]}, "B": {...}}
/// with entries in row-major order.
///
/// Exit codes: 0 ok, 1 usage or I/O error, 2 A is not rank one,
/// 3 a check failed, 4 the fit was ill-conditioned.
#[derive(Parser, Debug)]
#[command(name = "expconvex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find W with W A W* diagonal and W B W* entrywise nonnegative off the diagonal.
    Reduce {
        input: PathBuf,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test the Gram matrix [f(t_r + t_s)] of f(t) = tr exp(tA + B) for positive semidefiniteness.
    CheckEc {
        input: PathBuf,
        #[arg(long, default_value_t = GRAM_POINTS, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
        grid_n: usize,
        #[arg(long, default_value_t = GRID_LO, allow_negative_numbers = true)]
        grid_lo: f64,
        #[arg(long, default_value_t = GRID_HI, allow_negative_numbers = true)]
        grid_hi: f64,
        /// Relative PSD tolerance.
        #[arg(long, env = "EXPCONVEX_TOL", default_value_t = DEFAULT_PSD_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a nonnegative atomic measure whose Laplace transform matches tr exp(tA + B).
    FitMeasure {
        input: PathBuf,
        /// Number of candidate atom locations across the spectral interval of A.
        #[arg(long, default_value_t = 41, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
        resolution: usize,
        #[arg(long, default_value_t = DEFAULT_FIT_REG)]
        reg: f64,
        /// Number of equispaced sample points in [t-lo, t-hi].
        #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u64).range(2..).map(|v| v as usize))]
        t_points: usize,
        #[arg(long, default_value_t = GRID_LO, allow_negative_numbers = true)]
        t_lo: f64,
        #[arg(long, default_value_t = GRID_HI, allow_negative_numbers = true)]
        t_hi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized verification suite and write a JSON report.
    Verify {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        /// Largest matrix dimension, between 2 and 12.
        #[arg(long, default_value_t = 7)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative PSD tolerance for the Gram checks.
        #[arg(long, env = "EXPCONVEX_TOL", default_value_t = DEFAULT_PSD_TOL)]
        tol: f64,
        /// Record per-check wall-clock times (makes the report nondeterministic).
        #[arg(long)]
        timings: bool,
        /// Evaluate cases on the calling thread only.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<u8, commands::CliError> {
    match cli.command {
        Command::Reduce { input, out } => commands::cmd_reduce(&input, out.as_deref()),
        Command::CheckEc {
            input,
            grid_n,
            grid_lo,
            grid_hi,
            tol,
            out,
        } => commands::cmd_check_ec(&CheckEcArgs {
            input: &input,
            grid_n,
            grid_lo,
            grid_hi,
            tol,
            out: out.as_deref(),
        }),
        Command::FitMeasure {
            input,
            resolution,
            reg,
            t_points,
            t_lo,
            t_hi,
            out,
        } => commands::cmd_fit_measure(&FitArgs {
            input: &input,
            resolution,
            reg,
            t_points,
            t_lo,
            t_hi,
            out: out.as_deref(),
        }),
        Command::Verify {
            cases,
            max_n,
            seed,
            tol,
            timings,
            sequential,
            out,
        } => {
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let config = VerifyConfig {
                cases,
                max_n,
                seed,
                timings,
            };
            commands::cmd_verify(&config, tol, exec, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
