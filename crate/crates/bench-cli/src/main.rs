use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use vmfbf_bench::{compare, load_config, run, Certify, CliError, RunOptions};

/// Runs a solver configuration and writes its trace and report.
///
/// Exit codes: 0 converged, 2 iteration limit reached, 1 error.
#[derive(Debug, Parser)]
#[command(name = "vmfbf", version)]
struct Args {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration limit override.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Stopping tolerance override.
    #[arg(long)]
    tol: Option<f64>,
    /// Certificates to evaluate; may be repeated.
    #[arg(long, value_enum)]
    certify: Vec<Certify>,
    /// Second configuration to compare against.
    #[arg(long)]
    compare: Option<PathBuf>,
}

fn main_inner(args: Args) -> Result<i32, CliError> {
    let options = RunOptions {
        out: args.out,
        max_iter: args.max_iter,
        tol: args.tol,
        certify: args.certify,
    };
    let a = load_config(&args.config)?;
    match args.compare {
        Some(path) => {
            let b = load_config(&path)?;
            let out = compare(&a, &b, &options)?;
            print!("{}", out.report.lines().take(3).map(|l| format!("{l}\n")).collect::<String>());
            Ok(out.exit_code)
        }
        None => {
            let out = run(&a, &options)?;
            print!("{}", out.solve.report);
            if let Err(msg) = &out.solve.result {
                eprintln!("error: {msg}");
            }
            Ok(out.exit_code)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
