//! The `estimate-priors` subcommand: fit each historical segment CSV with a
//! multivariate regression and back out the prior hyperparameters, written
//! as a TOML file that `detect` runs can reference.

use std::path::PathBuf;

use bocpd_core::numerics::RectMatrix;
use bocpd_core::priors::{estimate_hyperparameters, fit_segment};

use crate::config::{self, EtaFile};
use crate::ingest::{covariates_for, ingest};
use crate::{CliError, Result};

pub struct EstimateArgs {
    pub config: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    pub overrides: Vec<String>,
}

pub fn run(args: &EstimateArgs) -> Result<()> {
    if args.inputs.len() < 2 {
        return Err(CliError::Usage(
            "estimate-priors needs at least two --input segment files".into(),
        ));
    }
    let raw = config::load_raw(&args.config, &args.overrides)?;

    let mut fits = Vec::new();
    let mut k = 0usize;
    let mut d = 0usize;
    for input in &args.inputs {
        let ingested = ingest(input, &raw.stream)?;
        if ingested.records.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no usable observations",
                input.display()
            )));
        }
        let origin = ingested.records[0].time_value;
        let n = ingested.records.len();
        let x0 = covariates_for(&ingested.records[0], origin, &raw.covariates);
        k = x0.len();
        d = ingested.records[0].values.len();
        let mut x = RectMatrix::zeros(n, k);
        let mut y = RectMatrix::zeros(n, d);
        for (i, record) in ingested.records.iter().enumerate() {
            let xr = covariates_for(record, origin, &raw.covariates);
            for (j, v) in xr.iter().enumerate() {
                x.set(i, j, *v);
            }
            for (j, v) in record.values.iter().enumerate() {
                y.set(i, j, *v);
            }
        }
        fits.push(fit_segment(&x, &y)?);
    }

    let eta = estimate_hyperparameters(&fits, d, k)?;
    let rendered = EtaFile::from_core(&eta).render();
    std::fs::write(&args.output, rendered)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", args.output.display())))?;
    eprintln!(
        "estimated hyperparameters from {} segments (k = {k}, d = {d}, nu0 = {:.4}) -> {}",
        fits.len(),
        eta.nu0(),
        args.output.display()
    );
    Ok(())
}
