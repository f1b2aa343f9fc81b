use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use calderon_core::dirac::Discretization;
use calderon_core::scenario::{
    convergence_checks, convergence_csv, run_scenario, selfcheck_configs, RunReport, ScenarioConfig,
};
use calderon_core::Error;

#[derive(Parser)]
#[command(name = "calderon", version, about = "Boundary projectors for Dirac operators over C*-algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task listed in a scenario file.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the scenario's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid refinement study on the dense discretization.
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in fixtures.
    Selfcheck,
}

fn config_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn finish(report: &RunReport) -> ExitCode {
    for t in &report.tasks {
        let status = if t.passed { "ok" } else { "FAILED" };
        println!("{:<14} {status}", t.task);
        if let Some(e) = &t.error {
            println!("  error: {e}");
        }
        for c in t.checks.iter().filter(|c| !c.passed) {
            println!("  {}: {:.3e} (want {} {:.3e})", c.name, c.value, c.relation, c.threshold);
        }
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = match ScenarioConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            let out = out.or_else(|| cfg.output_dir.clone());
            match run_scenario(&cfg, out.as_deref()) {
                Ok(r) => finish(&r),
                Err(e @ Error::Config(_)) => config_error(&e),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Convergence { config, levels, out } => {
            let cfg = match ScenarioConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            if cfg.discretization != Discretization::Dense {
                return config_error(&Error::Config("convergence study requires dense path".into()));
            }
            if levels < 3 {
                return config_error(&Error::Config(format!("need at least 3 levels, got {levels}")));
            }
            let model = match cfg.build_model() {
                Ok(m) => m,
                Err(e) => return config_error(&e),
            };
            let r = match calderon_core::convergence::convergence_study(&model, cfg.grid, levels, cfg.seed) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let csv = convergence_csv(&r);
            print!("{csv}");
            println!("calderon order {:?}, green order {:?}", r.calderon_fitted, r.green_fitted);
            if let Some(dir) = out.or_else(|| cfg.output_dir.clone()) {
                if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("convergence.csv"), &csv)) {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            let mut rep = calderon_core::scenario::TaskReport::empty("convergence");
            convergence_checks(&r, &cfg.tolerances, &mut rep);
            for c in rep.checks.iter().filter(|c| !c.passed) {
                println!("  {}: {:.3e} (want {} {:.3e})", c.name, c.value, c.relation, c.threshold);
            }
            if rep.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Selfcheck => {
            let mut ok = true;
            for cfg in selfcheck_configs() {
                let name = cfg.name.clone().unwrap_or_default();
                match run_scenario(&cfg, None) {
                    Ok(r) => {
                        println!("[{name}]");
                        ok &= finish(&r) == ExitCode::SUCCESS;
                    }
                    Err(e) => {
                        println!("[{name}] error: {e}");
                        ok = false;
                    }
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
