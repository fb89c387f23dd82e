use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lagfwi::harness::commands::{forward, invert};
use lagfwi::harness::selfcheck::{run_selected, Fault, SelfcheckOptions};
use lagfwi::harness::ExperimentConfig;
use lagfwi::iterations::Scheme;
use lagfwi::Result;

#[derive(Parser)]
#[command(name = "lagfwi", version, about = "Time-domain FWI with Lagrangian, penalty and augmented-Lagrangian iterations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model synthetic traces in the configured true model.
    Forward {
        #[arg(long)]
        config: PathBuf,
    },
    /// Invert the traces written by `forward`.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Scheme,
    },
    /// Run the identity battery (dot tests, saddle and scheme equivalences,
    /// gradient check).
    Selfcheck {
        /// Run only the checks whose name contains this text.
        #[arg(long)]
        only: Option<String>,
        #[arg(long, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Adjoint,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|_| {
        let names: Vec<String> = Scheme::ALL.iter().map(|s| s.to_string()).collect();
        format!("unknown scheme `{s}`; expected one of: {}", names.join(", "))
    })
}

fn run_forward(config: &PathBuf) -> Result<bool> {
    let cfg = ExperimentConfig::from_file(config)?;
    if let Some(d) = &cfg.true_model {
        let vmin = d.velocities(&cfg.grid)?.into_iter().fold(f64::INFINITY, f64::min);
        let ppw = cfg.nodes_per_wavelength(vmin);
        if ppw < 10.0 {
            eprintln!("warning: {ppw:.1} nodes per minimum wavelength (fewer than 10)");
        }
    }
    for path in forward(&cfg)? {
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn run_invert(config: &PathBuf, scheme: Scheme) -> Result<bool> {
    let cfg = ExperimentConfig::from_file(config)?;
    let report = invert(&cfg, scheme)?;
    let last = report.outcome.history.last().expect("history holds the initial state");
    println!(
        "{scheme}: mu {:e}, {} iterations, misfit {:.3e}, constraint {:.3e}{}, stop {:?}",
        report.mu,
        last.iter,
        last.misfit,
        last.constraint,
        last.model_error.map_or(String::new(), |e| format!(", model error {e:.3e}")),
        report.outcome.stop,
    );
    println!("wrote {} and {}", cfg.model_out.display(), cfg.log.display());
    if report.diverged() {
        eprintln!("error: iteration diverged; the log and model hold the last valid iterate");
    }
    Ok(!report.diverged())
}

fn run_selfcheck(only: Option<&str>, fault: Option<FaultArg>) -> bool {
    let opts = SelfcheckOptions {
        fault: fault.map(|FaultArg::Adjoint| Fault::Adjoint),
    };
    let results = run_selected(&opts, |name| only.is_none_or(|o| name.contains(o)));
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        println!("{} checks passed", results.len());
        true
    } else {
        println!("{} of {} checks failed: {}", failed.len(), results.len(), failed.join(", "));
        false
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Forward { config } => run_forward(config),
        Command::Invert { config, scheme } => run_invert(config, *scheme),
        Command::Selfcheck { only, inject_fault } => Ok(run_selfcheck(only.as_deref(), *inject_fault)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
