use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mae_rve::config::load_config;
use mae_rve::linear::LinearBackend;
use mae_rve::runner::{oracle_report, run, self_check};

#[derive(Parser)]
#[command(name = "mae-rve", version, about = "Periodic magneto-mechanical RVE solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the load path of a configuration and write CSV (and VTK) output.
    Run {
        config: PathBuf,
        /// Override the number of load steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Override the CSV output path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write VTK snapshots.
        #[arg(long)]
        vtk: bool,
        /// Log Newton iterations to stderr.
        #[arg(long)]
        verbose: bool,
        #[arg(long, value_enum)]
        linear_solver: Option<Backend>,
    },
    /// Print the small-strain magnetostriction coefficients of both phases.
    Oracle { config: PathBuf },
    /// Run the built-in consistency checks.
    Check,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Backend {
    Direct,
    Iterative,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            steps,
            output,
            vtk,
            verbose,
            linear_solver,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::FAILURE;
                }
            };
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::FAILURE;
                }
            };
            if let Some(s) = steps {
                if s == 0 {
                    eprintln!("error: --steps must be at least 1");
                    return ExitCode::FAILURE;
                }
                cfg.path.steps = s;
            }
            if let Some(o) = output {
                cfg.output.csv = o;
            }
            cfg.output.vtk |= vtk;
            cfg.output.verbose |= verbose;
            cfg.newton.verbose |= verbose;
            if let Some(b) = linear_solver {
                cfg.newton.linear_solver = match b {
                    Backend::Direct => LinearBackend::Direct,
                    Backend::Iterative => LinearBackend::Iterative,
                };
            }
            match run(&cfg, &text) {
                Ok(summary) => {
                    eprintln!("wrote {} steps to {}", summary.records.len(), summary.csv.display());
                    if !summary.vtk_files.is_empty() {
                        eprintln!("wrote {} VTK files to {}", summary.vtk_files.len(), cfg.output.vtk_dir.display());
                    }
                    match summary.failure {
                        Some(e) => {
                            eprintln!("error: load path stopped early: {e}");
                            ExitCode::FAILURE
                        }
                        None => ExitCode::SUCCESS,
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Oracle { config } => match load_config(&config) {
            Ok(cfg) => {
                print!("{}", oracle_report(&cfg));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                ExitCode::FAILURE
            }
        },
        Command::Check => {
            let results = self_check();
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
