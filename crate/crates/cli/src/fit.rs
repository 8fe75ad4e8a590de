use std::path::PathBuf;

use anyhow::{anyhow, Context};
use pab_core::likelihood::{fit, read_training_csv, AlphaGrid, LikelihoodError};
use pab_core::{BandwidthDomain, LikelihoodModel};

use crate::{Classify, Failure, OutDir};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// CSV with header `path,rate,z`, one outcome per row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    b_min: u32,
    #[arg(long, default_value_t = 100)]
    b_max: u32,
    /// Bounding constant written alongside the fitted slope.
    #[arg(long, default_value_t = LikelihoodModel::DEFAULT_KAPPA)]
    kappa: f64,
    /// Name of the model file inside the output directory.
    #[arg(long, default_value = "model.toml")]
    model_file: String,
}

pub fn run(args: Args, out: &OutDir) -> Result<(), Failure> {
    let domain = BandwidthDomain::new(args.b_min, args.b_max).config()?;
    let file = std::fs::File::open(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))
        .config()?;
    let samples = read_training_csv(file)
        .with_context(|| args.data.display().to_string())
        .config()?;
    let result = match fit(&samples, domain, AlphaGrid::default()) {
        Ok(r) => r,
        Err(e @ LikelihoodError::InsufficientData { .. }) => {
            return Err(Failure::Runtime(anyhow!("no path can be fitted: {e}")));
        }
        Err(e) => return Err(Failure::Config(e.into())),
    };
    let model = LikelihoodModel::new(result.alpha, args.kappa).config()?;

    println!("alpha {:.4}", result.alpha);
    for (path, y) in &result.y_hat {
        println!("{path:<12} y_hat {y}");
    }
    let text = format!("alpha = {:?}\nkappa = {:?}\n", model.alpha(), model.kappa());
    let written = out.write(&args.model_file, text)?;
    println!("model written to {}", written.display());

    if result.unidentifiable.is_empty() {
        return Ok(());
    }
    for e in &result.unidentifiable {
        eprintln!("unidentifiable: {e}");
    }
    Err(Failure::Runtime(anyhow!(
        "{} of {} paths could not be fitted",
        result.unidentifiable.len(),
        samples.len()
    )))
}
