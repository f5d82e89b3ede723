//! `critlab`: experiments on Glauber dynamics for the Ising model on sparse random graphs.
//!
//! Exit codes: 0 success, 1 a checked inequality or identity failed,
//! 2 configuration error, 3 resource limit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use critlab::Error;

#[derive(Parser)]
#[command(name = "critlab", version, about = "Exact and simulated Glauber dynamics on sparse random graphs")]
struct Cli {
    /// JSON config; a key named after the subcommand selects a section.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Emit JSON instead of CSV where both exist.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample G(n, d/n) and write its edge list.
    Generate(commands::GenerateArgs),
    /// Split vertices into A (fast ball growth) and B.
    Partition(commands::PartitionArgs),
    /// Check the four structural properties and the no-tangle events.
    VerifyStructure(commands::VerifyArgs),
    /// Count self-avoiding walks from one vertex.
    SawCount(commands::SawArgs),
    /// Non-backtracking operator: Perron data, rank-one residual, walk sums.
    NbAnalyze(commands::NbArgs),
    /// Compare a marginal with its value on the self-avoiding-walk tree.
    WeitzCheck(commands::WeitzArgs),
    /// Exact susceptibility by enumeration.
    Susceptibility(commands::SusceptibilityArgs),
    /// Simulate one of the chains and compare with its heat kernel.
    Simulate(commands::SimulateArgs),
    /// Spectrum and gap of one chain.
    Spectra(commands::SpectraArgs),
    /// Gap comparisons between all chains on random instances.
    CompareSuite(commands::CompareArgs),
    /// Gap lower bound from stochastic localization.
    ChenEldan(commands::ChenEldanArgs),
    /// Mixing-time growth with n.
    ScalingStudy(commands::ScalingArgs),
    /// Smallest constants making the structural properties hold.
    Calibrate(commands::CalibrateArgs),
    /// Every check at once.
    Battery(commands::BatteryArgs),
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Ok,
    CheckFailed(String),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::InvalidArgument(_) | Error::Parse(_) => 2,
        Error::ResourceLimit(_) => 3,
        Error::Io(_) => 2,
        Error::UndefinedState(_) | Error::Inapplicable(_) | Error::SpectralGapTooSmall { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let io = commands::Io { config: cli.config, out: cli.out, json: cli.json };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&io, a),
        Command::Partition(a) => commands::partition(&io, a),
        Command::VerifyStructure(a) => commands::verify_structure(&io, a),
        Command::SawCount(a) => commands::saw_count(&io, a),
        Command::NbAnalyze(a) => commands::nb_analyze(&io, a),
        Command::WeitzCheck(a) => commands::weitz_check(&io, a),
        Command::Susceptibility(a) => commands::susceptibility(&io, a),
        Command::Simulate(a) => commands::simulate(&io, a),
        Command::Spectra(a) => commands::spectra(&io, a),
        Command::CompareSuite(a) => commands::compare_suite(&io, a),
        Command::ChenEldan(a) => commands::chen_eldan(&io, a),
        Command::ScalingStudy(a) => commands::scaling_study(&io, a),
        Command::Calibrate(a) => commands::calibrate(&io, a),
        Command::Battery(a) => commands::battery(&io, a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(why)) => {
            eprintln!("check failed: {why}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
