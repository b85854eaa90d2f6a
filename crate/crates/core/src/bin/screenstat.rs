use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use screenstat::io::{cmd_analyze, cmd_cost_benefit, cmd_simulate, AnalyzeOptions};
use screenstat::AdjustPolicy;

#[derive(Parser)]
#[command(name = "screenstat", version, about = "Per-category metrics for multi-category screening tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate accuracy, predictive values and marginal readout rates.
    Analyze {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        incidence: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "auto")]
        adjust: AdjustPolicy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo study from a scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit benefit/cost points from an analysis report.
    CostBenefit {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            matrix,
            incidence,
            alpha,
            adjust,
            out,
        } => cmd_analyze(&matrix, &incidence, AnalyzeOptions { alpha, adjust }, &out).map(drop),
        Command::Simulate { scenario, out } => cmd_simulate(&scenario, &out).map(drop),
        Command::CostBenefit { report, out } => cmd_cost_benefit(&report, &out).map(drop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("screenstat: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
