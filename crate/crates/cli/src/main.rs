//! `attrikit` command-line driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Outcome;

#[derive(Parser, Debug)]
#[command(name = "attrikit", version, about = "Generator attribution toolkit")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "ATTRIKIT_THREADS")]
    threads: Option<usize>,

    /// TOML run config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a procedural multi-generator corpus and its manifest.
    Synth(commands::synth::SynthArgs),
    /// Cache style vectors or feature pyramids for every record.
    Extract(commands::extract::ExtractArgs),
    /// Train an attribution head.
    Train(commands::train::TrainArgs),
    /// Evaluate a trained head on a manifest.
    Eval(commands::eval::EvalArgs),
    /// Retrain and evaluate across resolutions, patch sizes or training sizes.
    Sweep(commands::sweep::SweepArgs),
    /// Export colour densities, averaged images, Gram densities or composition masks.
    Analyze(commands::analyze::AnalyzeArgs),
    /// Summarize evaluation reports into one table.
    Report(commands::report::ReportArgs),
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let file = cli.config.as_deref();
    match cli.command {
        Command::Synth(a) => commands::synth::run(a, file),
        Command::Extract(a) => commands::extract::run(a, file),
        Command::Train(a) => commands::train::run(a, file),
        Command::Eval(a) => commands::eval::run(a, file),
        Command::Sweep(a) => commands::sweep::run(a, file),
        Command::Analyze(a) => commands::analyze::run(a, file),
        Command::Report(a) => commands::report::run(a, file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::SampleFailures(n)) => {
            eprintln!("{n} sample(s) failed; see the failure log in the output directory");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
