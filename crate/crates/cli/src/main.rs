//! `gbmsum`: reproducible batch runs over sums of geometric Brownian motion.
//! Every command writes CSV/JSON into `--out` together with a manifest.

mod batch;
mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::*;

#[derive(Parser, Debug)]
#[command(name = "gbmsum", version, about = "Laws, tails and prices of discrete sums of geometric Brownian motion")]
struct Cli {
    /// Directory for output files and manifests.
    #[arg(long, global = true, env = "GBMSUM_OUT_DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the density of the perpetuity (p = 0) or the stopped sum.
    Density(DensityArgs),
    /// Price a discretely monitored arithmetic Asian option.
    Asian(AsianArgs),
    /// Shortfall probabilities, tail and VaR for a geometrically stopped annuity.
    Annuity(AnnuityArgs),
    /// Match the geometric mortality parameter to a Makeham law.
    Calibrate(CalibrateArgs),
    /// Exact moments of the perpetuity or the stopped sum.
    Moments(MomentsArgs),
    /// Monte Carlo estimates from simulated paths.
    Mc(McArgs),
    /// Run a JSON list of Asian and annuity scenarios.
    Batch(batch::BatchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.as_path();
    let result = match &cli.command {
        Command::Density(a) => density(a, out),
        Command::Asian(a) => asian(a, out),
        Command::Annuity(a) => annuity(a, out),
        Command::Calibrate(a) => calibrate(a, out),
        Command::Moments(a) => moments(a, out),
        Command::Mc(a) => mc(a, out),
        Command::Batch(a) => batch::run(a, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gbmsum: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
