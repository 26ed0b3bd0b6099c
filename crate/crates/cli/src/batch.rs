use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use gbmsum::pricing::{asian_call, put_call_parity_gap, AsianPrice, ParityGap};
use gbmsum::AsianSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{solve_annuity, AnnuityResult, AnnuityScenario, SHORTFALL_HEADER};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, Run};

#[derive(Args, Debug, Serialize)]
pub struct BatchArgs {
    /// JSON file with `asian` and `annuity` scenario lists.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BatchConfig {
    #[serde(default)]
    pub asian: Vec<AsianSpec>,
    #[serde(default)]
    pub annuity: Vec<AnnuityScenario>,
}

#[derive(Debug, Serialize)]
struct AsianResult {
    spec: AsianSpec,
    price: AsianPrice,
    parity: ParityGap,
}

#[derive(Debug, Serialize)]
struct BatchRecord {
    config_sha256: String,
    asian: Vec<AsianResult>,
    annuity: Vec<AnnuityResult>,
}

/// Runs every scenario in parallel; rows keep the order of the config file.
pub fn run(a: &BatchArgs, out: &Path) -> CliResult<()> {
    let bytes = fs::read(&a.config)?;
    let config: BatchConfig = serde_json::from_slice(&bytes)?;
    if config.asian.is_empty() && config.annuity.is_empty() {
        return Err(CliError::Usage(format!("{} lists no scenarios", a.config.display())));
    }

    let asian = config
        .asian
        .par_iter()
        .map(|spec| {
            Ok(AsianResult {
                spec: *spec,
                price: asian_call(spec)?,
                parity: put_call_parity_gap(spec)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let annuity = config
        .annuity
        .par_iter()
        .map(solve_annuity)
        .collect::<CliResult<Vec<_>>>()?;

    let mut run = Run::start(out, "batch", a)?;
    if !asian.is_empty() {
        let mut csv = String::from("n,s0,call\n");
        for r in &asian {
            writeln!(csv, "{},{},{:.4}", r.spec.n_fixings, r.spec.s0, r.price.price).unwrap();
        }
        run.write("asian_prices.csv", csv.as_bytes())?;
    }
    if !annuity.is_empty() {
        let mut csv = String::from(SHORTFALL_HEADER);
        for r in &annuity {
            r.table_rows(&mut csv);
        }
        run.write("shortfalls.csv", csv.as_bytes())?;
    }
    run.write_json(
        "batch.json",
        &BatchRecord {
            config_sha256: sha256_hex(&bytes),
            asian,
            annuity,
        },
    )?;
    run.finish()?;
    println!(
        "{} asian and {} annuity scenarios written to {}",
        config.asian.len(),
        config.annuity.len(),
        out.display()
    );
    Ok(())
}
