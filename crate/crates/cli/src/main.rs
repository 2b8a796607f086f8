//! `dakd` — BB84 with a controllable dephasing channel: analytic QBER
//! and leakage curves, seeded Monte Carlo protocol runs, and the
//! detector time-tag sifting pipeline.

mod commands;
mod error;
mod output;

use clap::{Parser, Subcommand};

use commands::{qber_scan, renyi, simulate, timetag};

#[derive(Parser, Debug)]
#[command(
    name = "dakd",
    version,
    about = "BB84 with a controllable dephasing channel: curves, Monte Carlo runs, time-tag sifting"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic QBER(d_a, d_b) sweep over d_b, optionally with a Monte
    /// Carlo column.
    QberScan(qber_scan::QberScanArgs),
    /// Rényi-leakage curves against the QBER the attack induces.
    Renyi(renyi::RenyiArgs),
    /// One protocol run from a JSON config, writing a run record.
    Simulate(simulate::SimulateArgs),
    /// Detector time-tag pipeline: gen | g2 | fit | sift.
    Timetag {
        #[command(subcommand)]
        cmd: timetag::TimetagCmd,
    },
}

/// Uses the given seed, or draws one and prints it so the run can be
/// reproduced.
pub(crate) fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed = {s}");
            s
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Command::QberScan(args) => qber_scan::run(args),
        Command::Renyi(args) => renyi::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Timetag { cmd } => timetag::run(cmd),
    };
    if let Err(e) = result {
        eprintln!("{}", e.message());
        std::process::exit(e.exit_code());
    }
}
