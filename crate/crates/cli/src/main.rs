//! `dcosim` — train demapper networks and run Monte-Carlo BER sweeps for an
//! LDPC-coded DCO-OFDM link under double-sided clipping.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod analyze;
mod config;
mod simulate;
mod train;

use config::ConfigStage;

#[derive(Parser)]
#[command(
    name = "dcosim",
    version,
    about = "LDPC-coded DCO-OFDM link simulator with NN-aided BICM receivers"
)]
struct Cli {
    /// Worker threads (overrides DCOSIM_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a demapper network on simulated channel observations.
    Train(train::TrainArgs),
    /// Monte-Carlo BER sweep; emits one CSV row per receiver and Eb/N0.
    Simulate(simulate::SimulateArgs),
    /// Summarize result CSVs into curve files and a dB-gap report.
    Analyze(analyze::AnalyzeArgs),
    /// Write a training dataset as CSV without fitting anything.
    GenDataset(train::GenDatasetArgs),
    /// Show the layer layout of a saved model file.
    InspectModel(train::InspectArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let result = match cli.command {
        Command::Train(args) => train::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::GenDataset(args) => train::run_gen_dataset(args),
        Command::InspectModel(args) => train::run_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<ConfigStage>() { 2 } else { 3 })
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag
        .or_else(|| std::env::var("DCOSIM_THREADS").ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0);
    if let Some(n) = n {
        // The global pool can only be initialized once; later calls are moot.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
