use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use pab_core::domain::load_topology;
use pab_core::{
    run_session, BandwidthDomain, EstimatorConfig, LikelihoodModel, PolicyKind, SelectionPolicy, SessionOptions,
    Topology,
};
use pab_prober::{LiveMeasurer, ProbeSpec};
use serde::Deserialize;
use toml::Value;

use crate::settings::{apply_overrides, read_table, to_text};
use crate::{Classify, Failure, OutDir};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Topology file (`link` and `path` lines).
    #[arg(long)]
    topology: PathBuf,
    /// Lines of `<path name> <host:port>` naming each path's receiver.
    #[arg(long)]
    endpoints: PathBuf,
    /// Settings file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fitted model file with `alpha` and `kappa`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Override one setting, e.g. `--set beta=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Path selection policy: RR, SEQ, WE or WCI.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Every key an estimate settings file may hold.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    epsilon: Option<f64>,
    delta: Option<f64>,
    eta: Option<f64>,
    beta: Option<f64>,
    max_measurements: Option<usize>,
    b_min: Option<u32>,
    b_max: Option<u32>,
    alpha: Option<f64>,
    kappa: Option<f64>,
    policy: Option<String>,
    seed: Option<u64>,
    trains: Option<usize>,
    packets: Option<usize>,
    size: Option<usize>,
    inter_train_ms: Option<u64>,
    connect_timeout_ms: Option<u64>,
}

struct Plan {
    config: EstimatorConfig,
    model: LikelihoodModel,
    policy: SelectionPolicy,
    probe: ProbeSpec,
    connect_timeout: Duration,
}

fn plan(args: &Args) -> anyhow::Result<Plan> {
    let mut table = toml::Table::new();
    if let Some(path) = &args.model {
        let model = read_table(path)?;
        for (k, v) in model {
            if k != "alpha" && k != "kappa" {
                return Err(anyhow!("{}: unknown model key `{k}`", path.display()));
            }
            table.insert(k, v);
        }
    }
    if let Some(path) = &args.config {
        table.extend(read_table(path)?);
    }
    apply_overrides(&mut table, &args.overrides)?;
    if let Some(p) = &args.policy {
        table.insert("policy".into(), Value::String(p.clone()));
    }
    if let Some(seed) = args.seed {
        table.insert("seed".into(), Value::Integer(i64::try_from(seed).context("seed too large")?));
    }
    let s: Settings = toml::from_str(&to_text(&table)).map_err(|e| anyhow!("settings: {}", e.message()))?;

    let mut config = EstimatorConfig::default();
    config.epsilon = s.epsilon.unwrap_or(config.epsilon);
    config.delta = s.delta.unwrap_or(config.delta);
    config.eta = s.eta.unwrap_or(config.eta);
    config.beta = s.beta.unwrap_or(config.beta);
    config.max_measurements = s.max_measurements.unwrap_or(config.max_measurements);
    config.domain = BandwidthDomain::new(
        s.b_min.unwrap_or(config.domain.b_min()),
        s.b_max.unwrap_or(config.domain.b_max()),
    )?;
    config.validate()?;
    let defaults = LikelihoodModel::default();
    let model = LikelihoodModel::new(s.alpha.unwrap_or(defaults.alpha()), s.kappa.unwrap_or(defaults.kappa()))?;
    let kind: PolicyKind = match &s.policy {
        Some(name) => name.parse().map_err(|_| anyhow!("policy: unknown policy `{name}`"))?,
        None => PolicyKind::WeightedInterval,
    };
    let base = ProbeSpec::default();
    let probe = ProbeSpec {
        trains: s.trains.unwrap_or(base.trains),
        packets_per_train: s.packets.unwrap_or(base.packets_per_train),
        packet_size: s.size.unwrap_or(base.packet_size),
        inter_train_gap: s.inter_train_ms.map(Duration::from_millis).unwrap_or(base.inter_train_gap),
        ..base
    };
    probe.validate()?;
    Ok(Plan {
        config,
        model,
        policy: SelectionPolicy::new(kind, s.seed.unwrap_or(0)),
        probe,
        connect_timeout: Duration::from_millis(s.connect_timeout_ms.unwrap_or(2000)),
    })
}

fn read_endpoints(path: &Path, topology: &Topology) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_name = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(addr), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(anyhow!("{} line {}: expected `<path> <host:port>`", path.display(), i + 1));
        };
        if topology.path_by_name(name).is_none() {
            return Err(anyhow!("{} line {}: unknown path `{name}`", path.display(), i + 1));
        }
        if by_name.insert(name.to_string(), addr.to_string()).is_some() {
            return Err(anyhow!("{} line {}: path `{name}` listed twice", path.display(), i + 1));
        }
    }
    topology
        .path_names()
        .iter()
        .map(|n| {
            by_name
                .remove(n)
                .ok_or_else(|| anyhow!("{}: no endpoint for path `{n}`", path.display()))
        })
        .collect()
}

pub fn run(args: Args, out: &OutDir) -> Result<(), Failure> {
    let plan = plan(&args).config()?;
    let text = std::fs::read_to_string(&args.topology)
        .with_context(|| format!("reading {}", args.topology.display()))
        .config()?;
    let topology = load_topology(&text)
        .with_context(|| args.topology.display().to_string())
        .config()?;
    let endpoints = read_endpoints(&args.endpoints, &topology).config()?;
    out.prepare()?;

    let mut measurer =
        LiveMeasurer::new(endpoints, plan.probe, plan.config.epsilon).with_connect_timeout(plan.connect_timeout);
    let report = run_session(
        &topology,
        plan.config,
        plan.model,
        plan.policy,
        SessionOptions::default(),
        &mut measurer,
    )
    .runtime()?;

    out.write("session.json", report.to_json().runtime()?)?;
    let mut csv = Vec::new();
    report.write_summary_csv(&mut csv).runtime()?;
    out.write("summary.csv", csv)?;

    println!(
        "{} measurements, policy {}, {:?}",
        report.measurements, report.policy.kind, report.termination
    );
    for e in &report.estimates {
        let state = if e.failed {
            "failed"
        } else if e.estimate.satisfied {
            "ok"
        } else {
            "unsatisfied"
        };
        println!(
            "{:<12} [{}, {}] mass {:.3} {state}",
            e.name, e.estimate.lb, e.estimate.ub, e.estimate.mass_in_interval
        );
    }
    Ok(())
}
