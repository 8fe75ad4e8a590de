use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use log::info;
use pab_core::simkit::{run_experiment_with, ExperimentSpec, TrialRecord};
use toml::Value;

use crate::settings::{apply_overrides, read_table, to_text};
use crate::{Classify, Failure, OutDir};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Experiment file of `key = value` lines.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override one experiment key, e.g. `--set trials=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

pub fn load_spec(args: &Args) -> Result<ExperimentSpec, Failure> {
    let mut table = match &args.spec {
        Some(path) => read_table(path).config()?,
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, &args.overrides).config()?;
    if let Some(seed) = args.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| Failure::Config(anyhow::anyhow!("seed {seed} is too large for a spec file")))?;
        table.insert("seed".into(), Value::Integer(seed));
    }
    if let Some(trials) = args.trials {
        table.insert("trials".into(), Value::Integer(trials as i64));
    }
    ExperimentSpec::from_config_str(&to_text(&table)).config()
}

pub fn run(args: Args, out: &OutDir) -> Result<(), Failure> {
    let spec = load_spec(&args)?;
    let dir = out.prepare()?;

    // completed trials land here as they finish, so an interrupted run keeps
    // its partial results
    let progress_path = dir.join("progress.jsonl");
    let progress = std::fs::File::create(&progress_path).runtime()?;
    let progress = Mutex::new(progress);
    let report = run_experiment_with(&spec, |t: &TrialRecord| {
        info!("trial {} done: {} links, {} tight", t.trial, t.num_links, t.tight_links);
        if let Ok(line) = serde_json::to_string(t) {
            let mut f = progress.lock().expect("progress file lock");
            let _ = writeln!(f, "{line}");
        }
    })
    .runtime()?;
    drop(progress);

    out.write("report.json", report.to_json().runtime()?)?;
    let mut trials = Vec::new();
    report.write_trials_csv(&mut trials).runtime()?;
    out.write("trials.csv", trials)?;
    let mut scatter = Vec::new();
    report.write_scatter_csv(&mut scatter).runtime()?;
    out.write("scatter.csv", scatter)?;
    std::fs::remove_file(&progress_path).runtime()?;

    for s in &report.summaries {
        println!(
            "{:<4} measurements/path {:>8.3}  accuracy {:.4}  criteria met {:.2}",
            s.policy.as_str(),
            s.mean_measurements_per_path,
            s.mean_accuracy,
            s.criteria_met_fraction
        );
    }
    Ok(())
}
