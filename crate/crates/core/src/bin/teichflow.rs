use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use teichflow::cli::scenario::{load_config, output_root, plot_run, run_scenario, summarize_run, sweep};
use teichflow::cli::validate::{run_validation, DEFAULT_KAPPA};

/// Teichmüller harmonic map flow from the torus: simulate, validate, analyze.
///
/// Run directories are created under $TEICHFLOW_OUTPUT_ROOT (default `runs`).
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write its artifacts.
    Simulate { config: PathBuf },
    /// Run the closed-form identity suites.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the quadratic-differential norm constant (negative control).
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
    },
    /// Run every config matching a glob, in parallel.
    Sweep { pattern: String },
    /// Summarize a finished run directory.
    Report { run_dir: PathBuf },
    /// Regenerate the SVG plots of a run directory.
    Plot { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            match run_scenario(&cfg, &output_root()) {
                Ok(run) => {
                    for w in &run.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("{}", run.dir.display());
                    if let Ok(summary) = summarize_run(&run.dir) {
                        print!("{summary}");
                    }
                    if run.invariants.violations() > 0 {
                        eprintln!(
                            "invariant violations: {} tracking, {} monotonicity",
                            run.invariants.tracking_violations, run.invariants.monotonicity_violations
                        );
                        return ExitCode::from(2);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Validate { seed, kappa } => {
            let report = run_validation(seed, kappa);
            print!("{report}");
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Sweep { pattern } => match sweep(&pattern, &output_root()) {
            Ok(runs) if runs.is_empty() => {
                eprintln!("no config matches `{pattern}`");
                ExitCode::from(1)
            }
            Ok(runs) => {
                let mut code = ExitCode::SUCCESS;
                for (path, result) in runs {
                    match result {
                        Ok(run) if run.invariants.violations() == 0 => {
                            println!("ok        {} -> {}", path.display(), run.dir.display())
                        }
                        Ok(run) => {
                            println!("violation {} -> {}", path.display(), run.dir.display());
                            code = ExitCode::from(2);
                        }
                        Err(e) => {
                            println!("failed    {}: {e}", path.display());
                            code = ExitCode::from(1);
                        }
                    }
                }
                code
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Report { run_dir } => match summarize_run(&run_dir) {
            Ok(s) => {
                print!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Plot { run_dir } => match plot_run(&run_dir) {
            Ok((files, warnings)) => {
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
